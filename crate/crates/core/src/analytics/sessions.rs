use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::message::Message;

pub const DEFAULT_TIMEOUT_MS: i64 = 300_000;

/// A maximal run of messages in one conversation with no gap above the timeout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub conversation_id: String,
    /// Set when sessions were cut per sender.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_id: Option<String>,
    pub start_ts: i64,
    pub end_ts: i64,
    pub message_ids: Vec<String>,
}

/// Whose inactivity closes a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeoutScope {
    /// Any message in the conversation keeps the session open.
    #[default]
    AnyParty,
    /// Each sender's messages are segmented on their own.
    PerSender,
}

/// Cuts each conversation into sessions; a gap of exactly `timeout_ms`
/// stays in the session. Messages are sorted by timestamp (stably) first.
/// Output is ordered by conversation id, then sender, then time.
pub fn segment_sessions<'a, I>(messages: I, timeout_ms: i64) -> Vec<Session>
where
    I: IntoIterator<Item = &'a Message>,
{
    segment_sessions_scoped(messages, timeout_ms, TimeoutScope::AnyParty)
}

pub fn segment_sessions_scoped<'a, I>(messages: I, timeout_ms: i64, scope: TimeoutScope) -> Vec<Session>
where
    I: IntoIterator<Item = &'a Message>,
{
    let mut streams: BTreeMap<(&str, Option<&str>), Vec<&Message>> = BTreeMap::new();
    for m in messages {
        let sender = (scope == TimeoutScope::PerSender).then_some(m.sender_id.as_str());
        streams.entry((m.conversation_id.as_str(), sender)).or_default().push(m);
    }
    let mut sessions = Vec::new();
    for ((conversation, sender), mut stream) in streams {
        stream.sort_by_key(|m| m.timestamp);
        let mut current: Option<Session> = None;
        for m in stream {
            match current.as_mut() {
                Some(s) if m.timestamp.saturating_sub(s.end_ts) <= timeout_ms => {
                    s.end_ts = m.timestamp;
                    s.message_ids.push(m.id.clone());
                }
                _ => {
                    sessions.extend(current.take());
                    current = Some(Session {
                        conversation_id: conversation.to_string(),
                        sender_id: sender.map(str::to_string),
                        start_ts: m.timestamp,
                        end_ts: m.timestamp,
                        message_ids: vec![m.id.clone()],
                    });
                }
            }
        }
        sessions.extend(current);
    }
    sessions
}
