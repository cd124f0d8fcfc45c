//! JSON shapes exchanged with clients: notification payloads, cue state
//! and stream frames.

use std::collections::{BTreeMap, BTreeSet};

use emocue_core::{Annotation, Category, ColorMap, FeedbackTier, Flag, Message};
use serde::{Deserialize, Serialize};

/// Notification previews are cut to this many codepoints.
pub const PREVIEW_CHARS: usize = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationPayload {
    pub message_id: String,
    pub conversation_id: String,
    pub conversation_name: String,
    pub sender_id: String,
    pub sender_name: String,
    pub preview: String,
    pub category: Category,
    /// `None` for unsupported languages, which show the notice instead.
    pub color: Option<String>,
    pub feedback_tier: FeedbackTier,
    pub flags: BTreeSet<Flag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

impl NotificationPayload {
    /// With `smoothed` unset the payload reports the category the message
    /// had before sender smoothing.
    pub fn new(message: &Message, annotation: &Annotation, colors: &ColorMap, smoothed: bool) -> Self {
        let mut category = annotation.category;
        let mut flags = annotation.flags.clone();
        if !smoothed {
            if let Some(raw) = annotation.unsmoothed_category {
                category = raw;
                flags.remove(&Flag::Smoothed);
            }
        }
        NotificationPayload {
            message_id: message.id.clone(),
            conversation_id: message.conversation_id.clone(),
            conversation_name: message.conversation_display_name().to_string(),
            sender_id: message.sender_id.clone(),
            sender_name: if message.sender_name.is_empty() {
                message.sender_id.clone()
            } else {
                message.sender_name.clone()
            },
            preview: message.text.chars().take(PREVIEW_CHARS).collect(),
            category,
            color: cue_color(annotation, category, colors),
            feedback_tier: annotation.feedback_tier,
            flags,
            notice: annotation.notice.clone(),
        }
    }
}

fn cue_color(annotation: &Annotation, category: Category, colors: &ColorMap) -> Option<String> {
    (!annotation.has_flag(Flag::UnsupportedLanguage)).then(|| colors.hex(category).to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub category: Category,
    pub color: Option<String>,
    pub ts: i64,
}

impl Cue {
    pub fn of(message: &Message, annotation: &Annotation, colors: &ColorMap) -> Self {
        Cue {
            category: annotation.category,
            color: cue_color(annotation, annotation.category, colors),
            ts: message.timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LastMessageCue {
    pub sender_id: String,
    #[serde(flatten)]
    pub cue: Cue,
}

/// What a conversation's cue bubble and per-sender rings show.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationCueState {
    pub conversation_id: String,
    pub last_message_cue: LastMessageCue,
    pub per_sender_cues: BTreeMap<String, Cue>,
}

impl ConversationCueState {
    pub fn new(conversation_id: &str, sender_id: &str, cue: Cue) -> Self {
        ConversationCueState {
            conversation_id: conversation_id.to_string(),
            last_message_cue: LastMessageCue {
                sender_id: sender_id.to_string(),
                cue: cue.clone(),
            },
            per_sender_cues: [(sender_id.to_string(), cue)].into_iter().collect(),
        }
    }

    /// Records a sender's cue. Entries only move forward in time: a cue
    /// older than the stored one is ignored, an equal timestamp replaces.
    pub fn apply(&mut self, sender_id: &str, cue: Cue) {
        if self.last_message_cue.cue.ts <= cue.ts {
            self.last_message_cue = LastMessageCue {
                sender_id: sender_id.to_string(),
                cue: cue.clone(),
            };
        }
        match self.per_sender_cues.get_mut(sender_id) {
            Some(existing) if existing.ts > cue.ts => {}
            Some(existing) => *existing = cue,
            None => {
                self.per_sender_cues.insert(sender_id.to_string(), cue);
            }
        }
    }
}

/// Server to client frames on the stream endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Notification {
        payload: NotificationPayload,
    },
    CueUpdate {
        conversation_id: String,
        per_sender_cues: BTreeMap<String, Cue>,
        last_message_cue: LastMessageCue,
    },
    Error {
        error: String,
    },
}

impl ServerFrame {
    pub fn cue_update(state: &ConversationCueState) -> Self {
        ServerFrame::CueUpdate {
            conversation_id: state.conversation_id.clone(),
            per_sender_cues: state.per_sender_cues.clone(),
            last_message_cue: state.last_message_cue.clone(),
        }
    }
}

/// Client to server frames on the stream endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientFrame {
    Send { message: Message },
}

/// Client-side view rebuilt from stream frames alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameFold {
    pub states: BTreeMap<String, ConversationCueState>,
    pub notifications: Vec<NotificationPayload>,
}

impl FrameFold {
    pub fn apply(&mut self, frame: &ServerFrame) {
        match frame {
            ServerFrame::Notification { payload } => self.notifications.push(payload.clone()),
            ServerFrame::CueUpdate {
                conversation_id,
                per_sender_cues,
                last_message_cue,
            } => {
                self.states.insert(
                    conversation_id.clone(),
                    ConversationCueState {
                        conversation_id: conversation_id.clone(),
                        last_message_cue: last_message_cue.clone(),
                        per_sender_cues: per_sender_cues.clone(),
                    },
                );
            }
            ServerFrame::Error { .. } => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use emocue_core::CompactScores;

    fn message(text: &str) -> Message {
        Message {
            id: "m1".into(),
            conversation_id: "g".into(),
            sender_id: "u1".into(),
            sender_name: "Ann".into(),
            timestamp: 10,
            text: text.into(),
            is_group: true,
            conversation_name: Some("Hiking club".into()),
        }
    }

    fn annotation(category: Category, flags: &[Flag]) -> Annotation {
        let mut compact = CompactScores([0.0; 7]);
        compact.set(category, 1.0);
        Annotation {
            message_id: "m1".into(),
            raw_scores: BTreeMap::new(),
            compact_scores: compact,
            category,
            color: ColorMap::default().hex(category).into(),
            confidence: 0.4,
            feedback_tier: FeedbackTier::Tentative,
            flags: flags.iter().copied().collect(),
            segments: None,
            notice: None,
            unsmoothed_category: None,
        }
    }

    fn cue(category: Category, ts: i64) -> Cue {
        Cue {
            category,
            color: Some(ColorMap::default().hex(category).into()),
            ts,
        }
    }

    #[test]
    fn payload_names_sender_and_group() {
        let colors = ColorMap::default();
        let p = NotificationPayload::new(&message("hello"), &annotation(Category::Joy, &[]), &colors, true);
        assert_eq!((p.sender_name.as_str(), p.conversation_name.as_str()), ("Ann", "Hiking club"));
        assert_eq!(p.color.as_deref(), Some(colors.hex(Category::Joy)));
    }

    #[test]
    fn preview_counts_codepoints() {
        let text: String = "好".repeat(200);
        let p = NotificationPayload::new(&message(&text), &annotation(Category::Joy, &[]), &ColorMap::default(), true);
        assert_eq!(p.preview.chars().count(), PREVIEW_CHARS);
    }

    #[test]
    fn unsupported_has_no_color() {
        let p = NotificationPayload::new(
            &message("Привет"),
            &annotation(Category::Neutral, &[Flag::UnsupportedLanguage]),
            &ColorMap::default(),
            true,
        );
        assert_eq!(p.color, None);
        assert!(serde_json::to_string(&p).unwrap().contains("\"color\":null"));
    }

    #[test]
    fn unsmoothed_notifications_report_the_raw_category() {
        let colors = ColorMap::default();
        let mut a = annotation(Category::Joy, &[Flag::Smoothed]);
        a.unsmoothed_category = Some(Category::Tired);
        let p = NotificationPayload::new(&message("x"), &a, &colors, false);
        assert_eq!(p.category, Category::Tired);
        assert_eq!(p.color.as_deref(), Some(colors.hex(Category::Tired)));
        assert!(!p.flags.contains(&Flag::Smoothed));
    }

    #[test]
    fn cue_state_tracks_newest_timestamp() {
        let mut s = ConversationCueState::new("g", "a", cue(Category::Joy, 10));
        s.apply("b", cue(Category::Tired, 20));
        s.apply("a", cue(Category::Anger, 5));
        assert_eq!(s.last_message_cue.sender_id, "b");
        assert_eq!(s.per_sender_cues["a"].category, Category::Joy);
        s.apply("a", cue(Category::Sadness, 20));
        assert_eq!(s.last_message_cue.sender_id, "a");
        let newest = s.per_sender_cues.values().map(|c| c.ts).max().unwrap();
        assert_eq!(s.last_message_cue.cue.ts, newest);
    }

    #[test]
    fn frames_round_trip_with_type_tags() {
        let state = ConversationCueState::new("g", "a", cue(Category::Joy, 10));
        let frame = ServerFrame::cue_update(&state);
        let json = serde_json::to_value(&frame).unwrap();
        assert_eq!(json["type"], "cue_update");
        assert_eq!(json["last_message_cue"]["sender_id"], "a");
        assert_eq!(json["last_message_cue"]["category"], "Joy");
        assert_eq!(serde_json::from_value::<ServerFrame>(json).unwrap(), frame);

        let send = r#"{"type":"send","message":{"id":"x","conversation_id":"g","sender_id":"a","sender_name":"A","timestamp":1,"text":"hi"}}"#;
        assert!(matches!(serde_json::from_str::<ClientFrame>(send).unwrap(), ClientFrame::Send { .. }));
    }

    #[test]
    fn fold_replaces_conversation_state() {
        let mut fold = FrameFold::default();
        let mut state = ConversationCueState::new("g", "a", cue(Category::Joy, 10));
        fold.apply(&ServerFrame::cue_update(&state));
        state.apply("b", cue(Category::Fear, 11));
        fold.apply(&ServerFrame::cue_update(&state));
        assert_eq!(fold.states["g"], state);
    }
}
