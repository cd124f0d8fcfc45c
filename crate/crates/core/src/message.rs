//! Inbound chat messages and the annotations produced for them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{Category, ColorMap, CompactScores};

/// One chat message as received from a conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub conversation_id: String,
    pub sender_id: String,
    pub sender_name: String,
    /// Milliseconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub text: String,
    #[serde(default)]
    pub is_group: bool,
    /// Display name of the conversation; group chats usually have one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversation_name: Option<String>,
}

impl Message {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Schema("message id is empty".into()));
        }
        if self.conversation_id.is_empty() {
            return Err(Error::Schema(format!("message {}: conversation_id is empty", self.id)));
        }
        if self.sender_id.is_empty() {
            return Err(Error::Schema(format!("message {}: sender_id is empty", self.id)));
        }
        if self.timestamp <= 0 {
            return Err(Error::Schema(format!(
                "message {}: timestamp must be positive, got {}",
                self.id, self.timestamp
            )));
        }
        Ok(())
    }

    pub fn conversation_display_name(&self) -> &str {
        self.conversation_name.as_deref().unwrap_or(&self.conversation_id)
    }
}

/// How strongly a client should signal an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeedbackTier {
    Strong,
    Tentative,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Flag {
    UnsupportedLanguage,
    CodeSwitched,
    EmojiOnly,
    LongMessage,
    AllOov,
    Smoothed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub message_id: String,
    /// Decision values of the fine-label models; empty when no model ran.
    pub raw_scores: BTreeMap<String, f64>,
    pub compact_scores: CompactScores,
    pub category: Category,
    pub color: String,
    pub confidence: f64,
    pub feedback_tier: FeedbackTier,
    pub flags: BTreeSet<Flag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<Annotation>>,
    /// User-facing explanation, set for unsupported languages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
    /// Category before sender smoothing, present only when smoothing changed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unsmoothed_category: Option<Category>,
}

impl Annotation {
    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    /// Checks the structural invariants every emitted annotation must hold.
    pub fn check_invariants(&self, colors: &ColorMap) -> std::result::Result<(), String> {
        let expected = self.compact_scores.argmax().unwrap_or(Category::FALLBACK);
        if self.category != expected {
            return Err(format!("category {} is not the argmax {}", self.category, expected));
        }
        if self.color != colors.hex(self.category) {
            return Err(format!("color {} does not belong to {}", self.color, self.category));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        let silent = self.has_flag(Flag::UnsupportedLanguage) || self.has_flag(Flag::AllOov);
        if silent != (self.feedback_tier == FeedbackTier::None) {
            return Err(format!(
                "feedback tier {:?} inconsistent with flags {:?}",
                self.feedback_tier, self.flags
            ));
        }
        let gates = [Flag::EmojiOnly, Flag::UnsupportedLanguage]
            .iter()
            .filter(|f| self.has_flag(**f))
            .count();
        if gates > 1 {
            return Err(format!("more than one processing gate in {:?}", self.flags));
        }
        if self.has_flag(Flag::UnsupportedLanguage) && self.notice.as_deref().is_none_or(str::is_empty) {
            return Err("unsupported language without a notice".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Annotation {
        let mut compact = CompactScores([0.1, -0.2, 0.0, 0.05, 0.3, -1.0, 0.0]);
        compact.set(Category::Neutral, CompactScores::SENTINEL);
        Annotation {
            message_id: "m1".into(),
            raw_scores: [("tired".to_string(), 0.3), ("happy".to_string(), 0.1)].into_iter().collect(),
            compact_scores: compact,
            category: Category::Tired,
            color: ColorMap::default().hex(Category::Tired).into(),
            confidence: 0.62,
            feedback_tier: FeedbackTier::Tentative,
            flags: [Flag::Smoothed].into_iter().collect(),
            segments: None,
            notice: None,
            unsmoothed_category: Some(Category::Joy),
        }
    }

    #[test]
    fn annotation_wire_round_trip() {
        let a = sample();
        let json = serde_json::to_string(&a).unwrap();
        let back: Annotation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert!(a.check_invariants(&ColorMap::default()).is_ok());
    }

    #[test]
    fn message_validation() {
        let mut m = Message {
            id: "1".into(),
            conversation_id: "c".into(),
            sender_id: "u".into(),
            sender_name: "U".into(),
            timestamp: 1,
            text: String::new(),
            is_group: false,
            conversation_name: None,
        };
        assert!(m.validate().is_ok());
        m.timestamp = 0;
        assert!(m.validate().is_err());
        let parsed: Message = serde_json::from_str(
            r#"{"id":"x","conversation_id":"c","sender_id":"s","sender_name":"S","timestamp":5,"text":"hi"}"#,
        )
        .unwrap();
        assert!(!parsed.is_group);
    }

    #[test]
    fn invariant_violations_are_reported() {
        let colors = ColorMap::default();
        let mut a = sample();
        a.category = Category::Joy;
        assert!(a.check_invariants(&colors).is_err());

        let mut a = sample();
        a.flags.insert(Flag::AllOov);
        assert!(a.check_invariants(&colors).is_err());
    }
}
