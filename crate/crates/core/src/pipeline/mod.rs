//! From a raw message to an annotation: language gate, symbol handling,
//! long-message splitting, scoring, smoothing and feedback tiers.

mod config;
mod language;
mod sentences;
mod smoothing;
mod symbols;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

pub use config::PipelineConfig;
pub use language::{detect_language, script_runs, LanguageTag, LanguageVerdict, UNSUPPORTED_NOTICE};
pub use sentences::split_sentences;
pub use smoothing::{smooth, ConversationSessions, SenderState};
pub use symbols::{SymbolLexicon, SymbolScan};

use crate::classify::{load_with_embeddings, LinearModelBundle};
use crate::error::{Error, Result};
use crate::message::{Annotation, FeedbackTier, Flag, Message};
use crate::taxonomy::{Category, ColorMap, CompactScores, CompactionMap};
use crate::vectorize::{embed_text, tokenize, EmbeddingTable, Language};

/// Fixed confidence of an annotation decided by lexicon symbols.
pub const SYMBOL_CONFIDENCE: f64 = 0.3;

/// Strong for reliable categories at or above the threshold, None for
/// messages the models could not read, Tentative otherwise.
pub fn feedback_tier(category: Category, confidence: f64, flags: &BTreeSet<Flag>, config: &PipelineConfig) -> FeedbackTier {
    if flags.contains(&Flag::UnsupportedLanguage) || flags.contains(&Flag::AllOov) {
        FeedbackTier::None
    } else if config.reliable_categories.contains(&category) && confidence >= config.strong_confidence_threshold {
        FeedbackTier::Strong
    } else {
        FeedbackTier::Tentative
    }
}

#[derive(Debug, Clone)]
struct LanguageModel {
    table: EmbeddingTable,
    bundle: LinearModelBundle,
}

/// Model output for a piece of text, in canonical label order.
#[derive(Debug, Clone)]
struct Scored {
    raw: Vec<f64>,
    compact: CompactScores,
    label_conf: Vec<f64>,
    /// In-vocabulary tokens behind the scores.
    weight: usize,
}

impl Scored {
    fn weighted_mean(parts: &[Scored]) -> Option<Scored> {
        let total: usize = parts.iter().map(|p| p.weight).sum();
        if total == 0 {
            return None;
        }
        let n = parts[0].raw.len();
        let mut raw = vec![0.0; n];
        let mut label_conf = vec![0.0; n];
        let mut compact = [0.0; 7];
        for p in parts {
            let w = p.weight as f64 / total as f64;
            raw.iter_mut().zip(&p.raw).for_each(|(a, v)| *a += w * v);
            label_conf.iter_mut().zip(&p.label_conf).for_each(|(a, v)| *a += w * v);
            compact.iter_mut().zip(&p.compact.0).for_each(|(a, v)| *a += w * v);
        }
        Some(Scored {
            raw,
            compact: CompactScores(compact),
            label_conf,
            weight: total,
        })
    }

    fn confidence_for(&self, category: Category, map: &CompactionMap) -> f64 {
        map.top_label_in(category, &self.raw)
            .map_or(0.0, |i| self.label_conf[i].clamp(0.0, 1.0))
    }
}

/// Turns messages into annotations. Immutable once built; sender state is
/// passed in by the caller.
#[derive(Debug, Clone)]
pub struct Annotator {
    config: PipelineConfig,
    map: CompactionMap,
    colors: ColorMap,
    lexicon: SymbolLexicon,
    en: Option<LanguageModel>,
    zh: Option<LanguageModel>,
}

impl Annotator {
    pub fn new(config: PipelineConfig, map: CompactionMap, colors: ColorMap, lexicon: SymbolLexicon) -> Result<Self> {
        config.validate()?;
        Ok(Annotator {
            config,
            map,
            colors,
            lexicon,
            en: None,
            zh: None,
        })
    }

    /// Adds the embeddings and bundle of one language. The bundle must have
    /// been trained on exactly this table and this compaction map.
    pub fn with_language(mut self, table: EmbeddingTable, bundle: LinearModelBundle) -> Result<Self> {
        if table.language() != bundle.language() {
            return Err(Error::Config(format!(
                "embeddings are {:?} but the bundle is {:?}",
                table.language(),
                bundle.language()
            )));
        }
        if table.dim() != bundle.dim() {
            return Err(Error::Schema(format!(
                "embeddings have dimension {}, bundle expects {}",
                table.dim(),
                bundle.dim()
            )));
        }
        if bundle.compaction_version() != self.map.version() {
            return Err(Error::VersionMismatch {
                bundle: bundle.compaction_version().to_string(),
                configured: self.map.version().to_string(),
            });
        }
        let found = table.checksum();
        if bundle.embedding_checksum() != found {
            return Err(Error::Checksum {
                expected: bundle.embedding_checksum().to_string(),
                found,
            });
        }
        let slot = match table.language() {
            Language::En => &mut self.en,
            Language::Zh => &mut self.zh,
        };
        *slot = Some(LanguageModel { table, bundle });
        Ok(self)
    }

    /// Loads a bundle from disk together with its embeddings. Without an
    /// explicit `embeddings` path the bundle's embeddings hint is resolved
    /// against the bundle's directory.
    pub fn load_language(self, bundle_path: &Path, embeddings: Option<&Path>) -> Result<Self> {
        let (bundle, table) = load_with_embeddings(bundle_path, embeddings, &self.map)?;
        self.with_language(table, bundle)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn compaction_map(&self) -> &CompactionMap {
        &self.map
    }

    pub fn colors(&self) -> &ColorMap {
        &self.colors
    }

    pub fn lexicon(&self) -> &SymbolLexicon {
        &self.lexicon
    }

    pub fn has_language(&self, language: Language) -> bool {
        self.model(language).is_some()
    }

    pub fn bundle(&self, language: Language) -> Option<&LinearModelBundle> {
        self.model(language).map(|m| &m.bundle)
    }

    fn model(&self, language: Language) -> Option<&LanguageModel> {
        match language {
            Language::En => self.en.as_ref(),
            Language::Zh => self.zh.as_ref(),
        }
    }

    fn require(&self, language: Language) -> Result<&LanguageModel> {
        self.model(language)
            .ok_or_else(|| Error::Unavailable(format!("no {language:?} model is loaded")))
    }

    /// Annotates a message and advances its sender's smoothing state.
    pub fn annotate(&self, message: &Message, sessions: &mut ConversationSessions) -> Result<Annotation> {
        let state = sessions.observe(
            &message.sender_id,
            message.timestamp,
            self.config.session_timeout_ms,
            self.config.per_sender_timeout,
        );
        self.annotate_with(&message.id, &message.text, Some(state))
    }

    /// Annotates text on its own, without sender smoothing.
    pub fn annotate_text(&self, message_id: &str, text: &str) -> Result<Annotation> {
        self.annotate_with(message_id, text, None)
    }

    /// The symbol-only path: `Some` when nothing but emoji, emoticons and
    /// symbol clusters remain once symbols are removed.
    pub fn handle_symbols(&self, message_id: &str, text: &str) -> Option<Annotation> {
        let scan = self.lexicon.scan(text);
        scan.is_symbol_only().then(|| self.symbol_annotation(message_id, &scan))
    }

    /// Scores each same-script run with its own language and averages the
    /// compact scores weighted by in-vocabulary token count.
    pub fn classify_code_switched(&self, message_id: &str, text: &str) -> Result<Annotation> {
        let scored = self.score_code_switched(text)?;
        let flags = [Flag::CodeSwitched].into_iter().collect();
        Ok(match scored {
            Some(s) => self.scored_annotation(message_id, &s, s.compact, flags, None),
            None => self.all_oov(message_id, flags, None),
        })
    }

    fn annotate_with(&self, id: &str, text: &str, state: Option<&mut SenderState>) -> Result<Annotation> {
        let scan = self.lexicon.scan(text);
        let verdict = detect_language(&scan.residual, self.config.cjk_fraction_threshold);
        if verdict.tag == LanguageTag::Unsupported {
            return Ok(self.unsupported(id, verdict));
        }
        if scan.is_symbol_only() {
            return Ok(self.symbol_annotation(id, &scan));
        }
        let text = scan.residual.as_str();
        let tag = verdict.tag;
        let mut flags = BTreeSet::new();
        if tag == LanguageTag::CodeSwitched {
            flags.insert(Flag::CodeSwitched);
        }

        let sentences = split_sentences(text);
        if sentences.len() > self.config.long_message_sentence_threshold {
            flags.insert(Flag::LongMessage);
            return self.long_message(id, &sentences, tag, flags, state);
        }

        let Some(scored) = self.score_span(text, tag)? else {
            return Ok(self.all_oov(id, flags, None));
        };
        let compact = self.apply_smoothing(&scored.compact, state);
        let mut a = self.scored_annotation(id, &scored, compact, flags, None);
        self.mark_smoothing(&mut a, &scored.compact);
        Ok(a)
    }

    fn long_message(
        &self,
        id: &str,
        sentences: &[String],
        tag: LanguageTag,
        flags: BTreeSet<Flag>,
        state: Option<&mut SenderState>,
    ) -> Result<Annotation> {
        let mut segments = Vec::with_capacity(sentences.len());
        let mut scored_parts = Vec::new();
        for (k, sentence) in sentences.iter().enumerate() {
            let seg_id = format!("{id}#{k}");
            let mut seg_flags = BTreeSet::new();
            if tag == LanguageTag::CodeSwitched {
                seg_flags.insert(Flag::CodeSwitched);
            }
            match self.score_span(sentence, tag)? {
                Some(s) => {
                    let seg = self.scored_annotation(&seg_id, &s, s.compact, seg_flags, None);
                    scored_parts.push((seg.category, seg.confidence, s));
                    segments.push(seg);
                }
                None => segments.push(self.all_oov(&seg_id, seg_flags, None)),
            }
        }
        if scored_parts.is_empty() {
            return Ok(self.all_oov(id, flags, Some(segments)));
        }

        let n = scored_parts.len() as f64;
        let dims = scored_parts[0].2.raw.len();
        let mut mean = Scored {
            raw: vec![0.0; dims],
            compact: CompactScores([0.0; 7]),
            label_conf: vec![0.0; dims],
            weight: scored_parts.iter().map(|p| p.2.weight).sum(),
        };
        for (_, _, s) in &scored_parts {
            mean.raw.iter_mut().zip(&s.raw).for_each(|(a, v)| *a += v / n);
            mean.label_conf.iter_mut().zip(&s.label_conf).for_each(|(a, v)| *a += v / n);
            mean.compact.0.iter_mut().zip(&s.compact.0).for_each(|(a, v)| *a += v / n);
        }

        let compact = self.apply_smoothing(&mean.compact, state);
        let mut a = self.scored_annotation(id, &mean, compact, flags, Some(segments));
        let mean_conf = scored_parts.iter().map(|p| p.1).sum::<f64>() / n;
        let agreeing = scored_parts.iter().filter(|p| p.0 == a.category).count() as f64;
        a.confidence = (mean_conf * agreeing / n).clamp(0.0, 1.0);
        a.feedback_tier = feedback_tier(a.category, a.confidence, &a.flags, &self.config);
        self.mark_smoothing(&mut a, &mean.compact);
        Ok(a)
    }

    fn apply_smoothing(&self, compact: &CompactScores, state: Option<&mut SenderState>) -> CompactScores {
        match state {
            Some(s) => s.apply(compact, self.config.smoothing_alpha),
            None => *compact,
        }
    }

    fn mark_smoothing(&self, a: &mut Annotation, unsmoothed: &CompactScores) {
        let before = unsmoothed.argmax().unwrap_or(Category::FALLBACK);
        if before != a.category {
            a.flags.insert(Flag::Smoothed);
            a.unsmoothed_category = Some(before);
        }
    }

    fn score_span(&self, text: &str, tag: LanguageTag) -> Result<Option<Scored>> {
        match tag {
            LanguageTag::CodeSwitched => self.score_code_switched(text),
            LanguageTag::Chinese => self.score_language(text, Language::Zh),
            LanguageTag::English => {
                // text without letters reads the same in either language
                if self.en.is_none() && self.zh.is_some() && !text.chars().any(char::is_alphabetic) {
                    self.score_language(text, Language::Zh)
                } else {
                    self.score_language(text, Language::En)
                }
            }
            LanguageTag::Unsupported => Ok(None),
        }
    }

    fn score_language(&self, text: &str, language: Language) -> Result<Option<Scored>> {
        let model = self.require(language)?;
        let v = embed_text(&tokenize(text, language), &model.table);
        if v.is_all_oov() {
            return Ok(None);
        }
        let raw = model.bundle.score_all(&v.values)?;
        let label_conf = model.bundle.models().iter().zip(&raw).map(|(m, &s)| m.confidence(s)).collect();
        let compact = self.map.compact_slice(&raw);
        Ok(Some(Scored {
            raw,
            compact,
            label_conf,
            weight: v.token_count,
        }))
    }

    fn score_code_switched(&self, text: &str) -> Result<Option<Scored>> {
        if self.en.is_none() && self.zh.is_none() {
            return Err(Error::Unavailable("no language model is loaded".into()));
        }
        let mut parts = Vec::new();
        for (language, run) in script_runs(text) {
            if !self.has_language(language) {
                continue;
            }
            if let Some(s) = self.score_language(run, language)? {
                parts.push(s);
            }
        }
        Ok(Scored::weighted_mean(&parts))
    }

    fn scored_annotation(
        &self,
        id: &str,
        scored: &Scored,
        compact: CompactScores,
        flags: BTreeSet<Flag>,
        segments: Option<Vec<Annotation>>,
    ) -> Annotation {
        let category = compact.argmax().unwrap_or(Category::FALLBACK);
        let confidence = scored.confidence_for(category, &self.map);
        Annotation {
            message_id: id.to_string(),
            raw_scores: self.map.labels().iter().cloned().zip(scored.raw.iter().copied()).collect(),
            compact_scores: compact,
            category,
            color: self.colors.hex(category).to_string(),
            confidence,
            feedback_tier: feedback_tier(category, confidence, &flags, &self.config),
            flags,
            segments,
            notice: None,
            unsmoothed_category: None,
        }
    }

    fn all_oov(&self, id: &str, mut flags: BTreeSet<Flag>, segments: Option<Vec<Annotation>>) -> Annotation {
        flags.insert(Flag::AllOov);
        self.fallback(id, flags, segments, None)
    }

    fn unsupported(&self, id: &str, verdict: LanguageVerdict) -> Annotation {
        let flags = [Flag::UnsupportedLanguage].into_iter().collect();
        let notice = verdict.notice.unwrap_or_else(|| UNSUPPORTED_NOTICE.to_string());
        self.fallback(id, flags, None, Some(notice))
    }

    fn fallback(
        &self,
        id: &str,
        flags: BTreeSet<Flag>,
        segments: Option<Vec<Annotation>>,
        notice: Option<String>,
    ) -> Annotation {
        let category = Category::FALLBACK;
        Annotation {
            message_id: id.to_string(),
            raw_scores: BTreeMap::new(),
            compact_scores: CompactScores::sentinel(),
            category,
            color: self.colors.hex(category).to_string(),
            confidence: 0.0,
            feedback_tier: feedback_tier(category, 0.0, &flags, &self.config),
            flags,
            segments,
            notice,
            unsmoothed_category: None,
        }
    }

    fn symbol_annotation(&self, id: &str, scan: &SymbolScan) -> Annotation {
        let flags: BTreeSet<Flag> = [Flag::EmojiOnly].into_iter().collect();
        let counts = scan.vote_counts();
        let total: usize = counts.iter().sum();
        let (compact, confidence) = if total == 0 {
            (CompactScores::sentinel(), 0.0)
        } else {
            let mut c = CompactScores([0.0; 7]);
            for (slot, n) in c.0.iter_mut().zip(counts) {
                *slot = n as f64 / total as f64;
            }
            (c, SYMBOL_CONFIDENCE)
        };
        let category = compact.argmax().unwrap_or(Category::FALLBACK);
        Annotation {
            message_id: id.to_string(),
            raw_scores: BTreeMap::new(),
            compact_scores: compact,
            category,
            color: self.colors.hex(category).to_string(),
            confidence,
            feedback_tier: feedback_tier(category, confidence, &flags, &self.config),
            flags,
            segments: None,
            notice: None,
            unsmoothed_category: None,
        }
    }
}
