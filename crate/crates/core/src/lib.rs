//! Emotion annotation for chat messages.
//!
//! Messages are featurized as averaged word embeddings, scored by one
//! linear model per fine emotion label, compacted to seven categories and
//! mapped to a color. Around that sit a language gate, symbol handling,
//! long-message splitting and per-sender smoothing ([`pipeline`]), plus
//! batch analytics over chat logs ([`analytics`]).

pub mod analytics;
pub mod classify;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod message;
pub mod pipeline;
pub mod script;
pub mod taxonomy;
pub mod vectorize;

pub use error::{Error, Result};
pub use message::{Annotation, FeedbackTier, Flag, Message};
pub use pipeline::{Annotator, PipelineConfig};
pub use taxonomy::{compact_to_7, pick_category, Category, ColorEntry, ColorMap, CompactScores, CompactionMap};
