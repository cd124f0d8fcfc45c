use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::sessions::{segment_sessions, DEFAULT_TIMEOUT_MS};
use super::ChatLog;
use crate::message::Message;
use crate::taxonomy::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_messages: usize,
    pub total_sessions: usize,
    pub group_messages: usize,
    /// `group_messages / total_messages`, 0 for an empty log.
    pub group_message_fraction: f64,
    pub annotated_messages: usize,
    /// Annotated messages per category, every category present.
    pub category_counts: BTreeMap<Category, usize>,
    pub skipped_records: usize,
}

impl Default for CorpusStats {
    fn default() -> Self {
        CorpusStats {
            total_messages: 0,
            total_sessions: 0,
            group_messages: 0,
            group_message_fraction: 0.0,
            annotated_messages: 0,
            category_counts: Category::ALL.iter().map(|&c| (c, 0)).collect(),
            skipped_records: 0,
        }
    }
}

fn fraction(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

impl CorpusStats {
    /// Combines statistics of two logs that share no conversation.
    pub fn merge(&self, other: &CorpusStats) -> CorpusStats {
        let mut category_counts = self.category_counts.clone();
        for (c, n) in &other.category_counts {
            *category_counts.entry(*c).or_insert(0) += n;
        }
        let total_messages = self.total_messages + other.total_messages;
        let group_messages = self.group_messages + other.group_messages;
        CorpusStats {
            total_messages,
            total_sessions: self.total_sessions + other.total_sessions,
            group_messages,
            group_message_fraction: fraction(group_messages, total_messages),
            annotated_messages: self.annotated_messages + other.annotated_messages,
            category_counts,
            skipped_records: self.skipped_records + other.skipped_records,
        }
    }
}

pub fn corpus_stats(log: &ChatLog, timeout_ms: i64) -> CorpusStats {
    let mut stats = CorpusStats {
        total_messages: log.len(),
        total_sessions: segment_sessions(log.messages(), timeout_ms).len(),
        skipped_records: log.skipped,
        ..Default::default()
    };
    for e in &log.entries {
        if e.message.is_group {
            stats.group_messages += 1;
        }
        if let Some(a) = &e.annotation {
            stats.annotated_messages += 1;
            *stats.category_counts.entry(a.category).or_insert(0) += 1;
        }
    }
    stats.group_message_fraction = fraction(stats.group_messages, stats.total_messages);
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamiliarityBand {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamiliarityOptions {
    pub high_threshold: usize,
    /// Count exchanges inside group conversations too.
    pub include_groups: bool,
    pub timeout_ms: i64,
}

impl Default for FamiliarityOptions {
    fn default() -> Self {
        FamiliarityOptions {
            high_threshold: 100,
            include_groups: false,
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamiliarityReport {
    /// The two users in lexicographic order.
    pub pair: (String, String),
    pub message_count: usize,
    pub session_count: usize,
    pub band: FamiliarityBand,
}

/// Messages of conversations, grouped by conversation id.
fn conversations(log: &ChatLog) -> BTreeMap<&str, Vec<&Message>> {
    let mut convs: BTreeMap<&str, Vec<&Message>> = BTreeMap::new();
    for m in log.messages() {
        convs.entry(&m.conversation_id).or_default().push(m);
    }
    convs
}

fn eligible(messages: &[&Message], options: &FamiliarityOptions) -> bool {
    options.include_groups || !messages.iter().any(|m| m.is_group)
}

/// How much two users talk to each other: messages they sent in
/// conversations where both of them speak.
pub fn familiarity(log: &ChatLog, user_a: &str, user_b: &str, options: &FamiliarityOptions) -> FamiliarityReport {
    let pair = if user_a <= user_b {
        (user_a.to_string(), user_b.to_string())
    } else {
        (user_b.to_string(), user_a.to_string())
    };
    let mut message_count = 0;
    let mut session_count = 0;
    if user_a != user_b {
        for messages in conversations(log).values() {
            if !eligible(messages, options) {
                continue;
            }
            let senders: BTreeSet<&str> = messages.iter().map(|m| m.sender_id.as_str()).collect();
            if !(senders.contains(user_a) && senders.contains(user_b)) {
                continue;
            }
            let involved = |m: &Message| m.sender_id == user_a || m.sender_id == user_b;
            message_count += messages.iter().filter(|m| involved(m)).count();
            let ids: BTreeSet<&str> = messages.iter().filter(|m| involved(m)).map(|m| m.id.as_str()).collect();
            session_count += segment_sessions(messages.iter().copied(), options.timeout_ms)
                .iter()
                .filter(|s| s.message_ids.iter().any(|id| ids.contains(id.as_str())))
                .count();
        }
    }
    FamiliarityReport {
        pair,
        message_count,
        session_count,
        band: if message_count >= options.high_threshold {
            FamiliarityBand::High
        } else {
            FamiliarityBand::Low
        },
    }
}

/// Familiarity of every pair of users who share an eligible conversation.
pub fn familiarity_table(log: &ChatLog, options: &FamiliarityOptions) -> Vec<FamiliarityReport> {
    let mut pairs = BTreeSet::new();
    for messages in conversations(log).values() {
        if !eligible(messages, options) {
            continue;
        }
        let senders: BTreeSet<&str> = messages.iter().map(|m| m.sender_id.as_str()).collect();
        for a in &senders {
            for b in senders.range::<&str, _>((std::ops::Bound::Excluded(a), std::ops::Bound::Unbounded)) {
                pairs.insert((*a, *b));
            }
        }
    }
    pairs.into_iter().map(|(a, b)| familiarity(log, a, b, options)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::LogEntry;

    fn msg(id: usize, conv: &str, sender: &str, ts: i64, group: bool) -> Message {
        Message {
            id: id.to_string(),
            conversation_id: conv.into(),
            sender_id: sender.into(),
            sender_name: sender.to_uppercase(),
            timestamp: ts,
            text: "x".into(),
            is_group: group,
            conversation_name: None,
        }
    }

    #[test]
    fn group_fraction() {
        let ms = (0..10).map(|i| msg(i, if i < 8 { "d" } else { "g" }, "a", 1 + i as i64, i >= 8));
        let s = corpus_stats(&ChatLog::from_messages(ms), DEFAULT_TIMEOUT_MS);
        assert_eq!(s.total_messages, 10);
        assert_eq!(s.group_message_fraction, 0.2);
        assert_eq!(s.total_sessions, 2);
    }

    #[test]
    fn empty_log() {
        let s = corpus_stats(&ChatLog::default(), DEFAULT_TIMEOUT_MS);
        assert_eq!(s, CorpusStats::default());
    }

    #[test]
    fn familiarity_counts_and_symmetry() {
        let mut ms: Vec<Message> = (0..150)
            .map(|i| msg(i, "ab", if i % 2 == 0 { "a" } else { "b" }, 1 + i as i64 * 1000, false))
            .collect();
        ms.extend((150..160).map(|i| msg(i, "grp", if i % 2 == 0 { "a" } else { "b" }, 1 + i as i64, true)));
        ms.push(msg(200, "ac", "a", 5, false));
        let log = ChatLog::from_entries(
            ms.into_iter()
                .map(|message| LogEntry {
                    message,
                    annotation: None,
                })
                .collect(),
        );
        let opts = FamiliarityOptions::default();
        let r = familiarity(&log, "a", "b", &opts);
        assert_eq!(r.message_count, 150);
        assert_eq!(r.session_count, 1);
        assert_eq!(r.band, FamiliarityBand::High);
        assert_eq!(r, familiarity(&log, "b", "a", &opts));
        let with_groups = FamiliarityOptions {
            include_groups: true,
            ..opts.clone()
        };
        assert_eq!(familiarity(&log, "a", "b", &with_groups).message_count, 160);
        let none = familiarity(&log, "a", "c", &opts);
        assert_eq!((none.message_count, none.band), (0, FamiliarityBand::Low));
        assert_eq!(familiarity_table(&log, &opts).len(), 1);
    }
}
