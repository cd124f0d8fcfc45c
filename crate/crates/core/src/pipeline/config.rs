use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::Category;

/// Tunables of the annotation pipeline, read from the `pipeline` block of
/// the service configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Weight of the newest message in the per-sender moving average;
    /// 1 turns smoothing off.
    pub smoothing_alpha: f64,
    /// Messages with more sentences than this are scored sentence by sentence.
    pub long_message_sentence_threshold: usize,
    pub cjk_fraction_threshold: f64,
    pub strong_confidence_threshold: f64,
    pub reliable_categories: BTreeSet<Category>,
    /// `None` selects the built-in lexicon.
    pub emoticon_lexicon_path: Option<PathBuf>,
    pub session_timeout_ms: i64,
    /// Measure inactivity per sender instead of per conversation.
    pub per_sender_timeout: bool,
    /// When false, notifications carry the unsmoothed category while the
    /// cue bubble still follows the smoothed one.
    pub smooth_notifications: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            smoothing_alpha: 0.6,
            long_message_sentence_threshold: 4,
            cjk_fraction_threshold: 0.3,
            strong_confidence_threshold: 0.5,
            reliable_categories: [Category::Joy, Category::Anger, Category::Sadness].into_iter().collect(),
            emoticon_lexicon_path: None,
            session_timeout_ms: 300_000,
            per_sender_timeout: false,
            smooth_notifications: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha <= 1.0) {
            return bad(&format!("smoothing_alpha must be in (0, 1], got {}", self.smoothing_alpha));
        }
        if self.long_message_sentence_threshold == 0 {
            return bad("long_message_sentence_threshold must be at least 1");
        }
        if !(self.cjk_fraction_threshold > 0.0 && self.cjk_fraction_threshold <= 1.0) {
            return bad(&format!(
                "cjk_fraction_threshold must be in (0, 1], got {}",
                self.cjk_fraction_threshold
            ));
        }
        if !(0.0..=1.0).contains(&self.strong_confidence_threshold) {
            return bad(&format!(
                "strong_confidence_threshold must be in [0, 1], got {}",
                self.strong_confidence_threshold
            ));
        }
        if self.session_timeout_ms < 0 {
            return bad("session_timeout_ms must not be negative");
        }
        Ok(())
    }
}
