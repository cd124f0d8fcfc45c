//! Batch measurements over chat logs: sessions, corpus statistics and
//! pairwise familiarity.

mod sessions;
mod stats;

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use sessions::{segment_sessions, segment_sessions_scoped, Session, TimeoutScope, DEFAULT_TIMEOUT_MS};
pub use stats::{
    corpus_stats, familiarity, familiarity_table, CorpusStats, FamiliarityBand, FamiliarityOptions, FamiliarityReport,
};

use crate::error::{Error, Result};
use crate::message::{Annotation, Message};

/// One log line: a bare message, or a message with its annotation as the
/// service writes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub message: Message,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<Annotation>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LogLine {
    Annotated { message: Message, annotation: Option<Annotation> },
    Bare(Message),
}

/// Parses one JSON-lines record; `None` for anything malformed or invalid.
pub fn parse_log_line(line: &str) -> Option<LogEntry> {
    let entry = match serde_json::from_str::<LogLine>(line).ok()? {
        LogLine::Annotated { message, annotation } => LogEntry { message, annotation },
        LogLine::Bare(message) => LogEntry {
            message,
            annotation: None,
        },
    };
    entry.message.validate().ok()?;
    Some(entry)
}

/// A parsed chat log. Malformed lines are counted, not fatal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChatLog {
    pub entries: Vec<LogEntry>,
    pub skipped: usize,
}

impl ChatLog {
    pub fn from_entries(entries: Vec<LogEntry>) -> Self {
        ChatLog { entries, skipped: 0 }
    }

    pub fn from_messages(messages: impl IntoIterator<Item = Message>) -> Self {
        Self::from_entries(
            messages
                .into_iter()
                .map(|message| LogEntry {
                    message,
                    annotation: None,
                })
                .collect(),
        )
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut log = ChatLog::default();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match parse_log_line(&line) {
                Some(entry) => log.entries.push(entry),
                None => {
                    tracing::warn!(line = log.entries.len() + log.skipped + 1, "skipping malformed log record");
                    log.skipped += 1;
                }
            }
        }
        Ok(log)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path).map_err(|e| Error::file(path, e))?)
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.entries.iter().map(|e| &e.message)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_annotated_and_malformed_lines() {
        let text = concat!(
            r#"{"id":"1","conversation_id":"c","sender_id":"a","sender_name":"A","timestamp":5,"text":"hi"}"#,
            "\n",
            "not json\n",
            "\n",
            r#"{"id":"2","conversation_id":"c","sender_id":"a","sender_name":"A","timestamp":0,"text":"bad ts"}"#,
            "\n",
            r#"{"message":{"id":"3","conversation_id":"c","sender_id":"b","sender_name":"B","timestamp":9,"text":"yo","is_group":true},"annotation":null}"#,
            "\n",
        );
        let log = ChatLog::read(text.as_bytes()).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.skipped, 2);
        assert!(log.entries[1].message.is_group);
    }
}
