//! Append-only JSON-lines log of annotated messages.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use emocue_core::analytics::{ChatLog, LogEntry};

use crate::error::{Result, ServiceError};

#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    file: File,
}

impl LogWriter {
    /// Opens `path` for appending and returns the records already in it.
    /// A trailing partial line left by an interrupted write is counted as
    /// skipped and terminated so the next record starts on its own line.
    pub fn open(path: &Path) -> Result<(Self, ChatLog)> {
        let persist = |source| ServiceError::Persist {
            path: path.to_path_buf(),
            source,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .map_err(persist)?;
        let mut text = Vec::new();
        file.read_to_end(&mut text).map_err(persist)?;
        let existing = ChatLog::read(text.as_slice())?;
        if text.last().is_some_and(|&b| b != b'\n') {
            file.write_all(b"\n").map_err(persist)?;
            file.flush().map_err(persist)?;
        }
        file.seek(SeekFrom::End(0)).map_err(persist)?;
        Ok((
            LogWriter {
                path: path.to_path_buf(),
                file,
            },
            existing,
        ))
    }

    /// Writes one record and hands it to the operating system before
    /// returning.
    pub fn append(&mut self, entry: &LogEntry) -> Result<()> {
        let mut line = serde_json::to_vec(entry).map_err(emocue_core::Error::from)?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|()| self.file.flush())
            .map_err(|source| ServiceError::Persist {
                path: self.path.clone(),
                source,
            })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
