//! Per-sender exponential smoothing of compact scores within a session.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::taxonomy::CompactScores;

/// `alpha * current + (1 - alpha) * previous`, component-wise. Without a
/// previous vector, or where either side is non-finite, the current value
/// is kept.
pub fn smooth(previous: Option<&CompactScores>, current: &CompactScores, alpha: f64) -> CompactScores {
    let Some(prev) = previous else {
        return *current;
    };
    let mut out = *current;
    for (o, (&p, &c)) in out.0.iter_mut().zip(prev.0.iter().zip(&current.0)) {
        if p.is_finite() && c.is_finite() {
            *o = alpha * c + (1.0 - alpha) * p;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenderState {
    pub conversation_id: String,
    pub sender_id: String,
    /// `None` until the sender's first scored message in the session.
    pub smoothed_scores: Option<CompactScores>,
    pub last_update: i64,
    /// Start timestamp of the session this state belongs to.
    pub session_marker: i64,
}

impl SenderState {
    fn new(conversation_id: &str, sender_id: &str, session_start: i64) -> Self {
        SenderState {
            conversation_id: conversation_id.to_string(),
            sender_id: sender_id.to_string(),
            smoothed_scores: None,
            last_update: session_start,
            session_marker: session_start,
        }
    }

    /// Folds `current` into the running average and returns the new value.
    pub fn apply(&mut self, current: &CompactScores, alpha: f64) -> CompactScores {
        let next = smooth(self.smoothed_scores.as_ref(), current, alpha);
        self.smoothed_scores = Some(next);
        next
    }
}

/// Session tracking and sender states of one conversation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConversationSessions {
    pub conversation_id: String,
    last_ts: Option<i64>,
    session_start: i64,
    senders: BTreeMap<String, SenderState>,
}

impl ConversationSessions {
    pub fn new(conversation_id: impl Into<String>) -> Self {
        ConversationSessions {
            conversation_id: conversation_id.into(),
            ..Default::default()
        }
    }

    /// Registers a message at `ts` and returns its sender's state, reset if
    /// the inactivity gap exceeded `timeout_ms`. The gap is measured since
    /// the conversation's previous message, or since the sender's own
    /// previous message when `per_sender` is set.
    pub fn observe(&mut self, sender_id: &str, ts: i64, timeout_ms: i64, per_sender: bool) -> &mut SenderState {
        if !per_sender && self.last_ts.is_some_and(|last| ts.saturating_sub(last) > timeout_ms) {
            self.senders.clear();
            self.session_start = ts;
        }
        if self.last_ts.is_none() {
            self.session_start = ts;
        }
        self.last_ts = Some(self.last_ts.map_or(ts, |last| last.max(ts)));

        let conversation_id = &self.conversation_id;
        let session_start = self.session_start;
        let state = self
            .senders
            .entry(sender_id.to_string())
            .or_insert_with(|| SenderState::new(conversation_id, sender_id, if per_sender { ts } else { session_start }));
        if per_sender && ts.saturating_sub(state.last_update) > timeout_ms {
            state.smoothed_scores = None;
            state.session_marker = ts;
        }
        state.last_update = state.last_update.max(ts);
        state
    }

    pub fn sender(&self, sender_id: &str) -> Option<&SenderState> {
        self.senders.get(sender_id)
    }

    pub fn senders(&self) -> impl Iterator<Item = &SenderState> {
        self.senders.values()
    }

    pub fn session_start(&self) -> i64 {
        self.session_start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: [f64; 7]) -> CompactScores {
        CompactScores(x)
    }

    #[test]
    fn alpha_one_is_identity() {
        let prev = v([3.0, -1.0, 0.0, 0.0, 2.0, 1.0, 0.5]);
        let cur = v([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        assert_eq!(smooth(Some(&prev), &cur, 1.0), cur);
    }

    #[test]
    fn half_step_arithmetic() {
        let one = v([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let two = v([0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut s = SenderState::new("c", "a", 1);
        s.apply(&one, 0.5);
        assert_eq!(s.apply(&two, 0.5), v([0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn sentinel_components_take_the_current_value() {
        let mut prev = v([1.0; 7]);
        prev.0[6] = CompactScores::SENTINEL;
        let cur = v([0.0; 7]);
        let out = smooth(Some(&prev), &cur, 0.5);
        assert_eq!(out.0[6], 0.0);
        assert_eq!(out.0[0], 0.5);
    }

    #[test]
    fn session_gap_resets_every_sender() {
        let mut conv = ConversationSessions::new("c");
        conv.observe("a", 1_000, 300_000, false).apply(&v([1.0; 7]), 0.5);
        conv.observe("b", 301_000, 300_000, false).apply(&v([1.0; 7]), 0.5);
        // exactly the timeout after the last message stays in-session
        assert!(conv.observe("a", 601_000, 300_000, false).smoothed_scores.is_some());
        let a = conv.observe("a", 901_001, 300_000, false);
        assert!(a.smoothed_scores.is_none());
        assert_eq!(a.session_marker, 901_001);
        assert!(conv.sender("b").is_none());
    }

    #[test]
    fn per_sender_gap_only_resets_that_sender() {
        let mut conv = ConversationSessions::new("c");
        conv.observe("a", 1_000, 300_000, true).apply(&v([1.0; 7]), 0.5);
        conv.observe("b", 200_000, 300_000, true).apply(&v([1.0; 7]), 0.5);
        conv.observe("b", 400_000, 300_000, true);
        assert!(conv.observe("a", 400_000, 300_000, true).smoothed_scores.is_none());
        assert!(conv.sender("b").unwrap().smoothed_scores.is_some());
    }
}
