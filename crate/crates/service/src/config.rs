//! Service configuration: a TOML file, then `EMOCUE_*` environment
//! overrides.

use std::path::{Path, PathBuf};

use emocue_core::classify::LinearModelBundle;
use emocue_core::pipeline::SymbolLexicon;
use emocue_core::vectorize::Language;
use emocue_core::{Annotator, ColorMap, CompactionMap, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

/// Prefix of every environment override.
pub const ENV_PREFIX: &str = "EMOCUE_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanguagePaths {
    pub en: Option<PathBuf>,
    pub zh: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    /// Embedding tables; a missing entry falls back to the bundle's hint.
    pub embeddings: LanguagePaths,
    pub bundles: LanguagePaths,
    pub compaction_map: Option<PathBuf>,
    pub color_map: Option<PathBuf>,
    /// Append-only annotated log. Without one nothing is persisted.
    pub log_path: Option<PathBuf>,
    /// Session timeout; overrides `pipeline.session_timeout_ms` when set.
    pub timeout_ms: Option<i64>,
    /// Static bearer token required on every route except health.
    pub auth_token: Option<String>,
    pub pipeline: PipelineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            embeddings: LanguagePaths::default(),
            bundles: LanguagePaths::default(),
            compaction_map: None,
            color_map: None,
            log_path: None,
            timeout_ms: None,
            auth_token: None,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Reads the file if given, then applies overrides from the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => ServiceConfig::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Applies `EMOCUE_*` variables. Unknown names with the prefix are
    /// rejected so typos surface.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        for (key, value) in vars {
            let Some(name) = key.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let value: String = value.into();
            match name {
                "LISTEN" => self.listen = value,
                "EMBEDDINGS_EN" => self.embeddings.en = Some(value.into()),
                "EMBEDDINGS_ZH" => self.embeddings.zh = Some(value.into()),
                "BUNDLE_EN" => self.bundles.en = Some(value.into()),
                "BUNDLE_ZH" => self.bundles.zh = Some(value.into()),
                "COMPACTION_MAP" => self.compaction_map = Some(value.into()),
                "COLOR_MAP" => self.color_map = Some(value.into()),
                "LOG_PATH" => self.log_path = Some(value.into()),
                "AUTH_TOKEN" => self.auth_token = Some(value),
                "TIMEOUT_MS" => {
                    let ms = value
                        .parse()
                        .map_err(|_| ServiceError::Config(format!("{ENV_PREFIX}TIMEOUT_MS: not an integer: {value:?}")))?;
                    self.timeout_ms = Some(ms);
                }
                other => return Err(ServiceError::Config(format!("unknown variable {ENV_PREFIX}{other}"))),
            }
        }
        Ok(())
    }

    /// The pipeline block with the top-level timeout folded in.
    pub fn effective_pipeline(&self) -> PipelineConfig {
        let mut p = self.pipeline.clone();
        if let Some(ms) = self.timeout_ms {
            p.session_timeout_ms = ms;
        }
        p
    }

    /// Replaces the bundle and embedding paths, placing each bundle under
    /// the language it was trained for. `embeddings[i]` pairs with
    /// `bundles[i]`; missing entries fall back to the bundle's own hint.
    pub fn set_bundles(&mut self, bundles: &[PathBuf], embeddings: &[PathBuf]) -> Result<()> {
        if embeddings.len() > bundles.len() {
            return Err(ServiceError::Config("more embedding files than bundles".into()));
        }
        let map = match &self.compaction_map {
            Some(p) => CompactionMap::load(p)?,
            None => CompactionMap::builtin(),
        };
        self.bundles = LanguagePaths::default();
        self.embeddings = LanguagePaths::default();
        for (i, b) in bundles.iter().enumerate() {
            let language = LinearModelBundle::load(b, &map)?.language();
            let (bundle_slot, embeddings_slot) = match language {
                Language::En => (&mut self.bundles.en, &mut self.embeddings.en),
                Language::Zh => (&mut self.bundles.zh, &mut self.embeddings.zh),
            };
            if bundle_slot.is_some() {
                return Err(ServiceError::Config(format!("two bundles for {language:?}")));
            }
            *bundle_slot = Some(b.clone());
            *embeddings_slot = embeddings.get(i).cloned();
        }
        Ok(())
    }

    /// Loads maps, lexicon, bundles and embeddings.
    pub fn build_annotator(&self) -> Result<Annotator> {
        let pipeline = self.effective_pipeline();
        let map = match &self.compaction_map {
            Some(p) => CompactionMap::load(p)?,
            None => CompactionMap::builtin(),
        };
        let colors = match &self.color_map {
            Some(p) => ColorMap::load(p)?,
            None => ColorMap::default(),
        };
        let lexicon = match &pipeline.emoticon_lexicon_path {
            Some(p) => SymbolLexicon::load(p)?,
            None => SymbolLexicon::builtin(),
        };
        let mut annotator = Annotator::new(pipeline, map, colors, lexicon)?;
        for (bundle, embeddings) in [
            (&self.bundles.en, &self.embeddings.en),
            (&self.bundles.zh, &self.embeddings.zh),
        ] {
            if let Some(b) = bundle {
                annotator = annotator.load_language(b, embeddings.as_deref())?;
            }
        }
        Ok(annotator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_pipeline_block() {
        let c = ServiceConfig::from_toml(
            r#"
            listen = "0.0.0.0:9000"
            timeout_ms = 60000
            [bundles]
            en = "fixtures/intro.bundle"
            [pipeline]
            smoothing_alpha = 1.0
            "#,
        )
        .unwrap();
        assert_eq!(c.listen, "0.0.0.0:9000");
        assert_eq!(c.bundles.en.as_deref(), Some(Path::new("fixtures/intro.bundle")));
        assert_eq!(c.effective_pipeline().session_timeout_ms, 60_000);
        assert_eq!(c.pipeline.smoothing_alpha, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ServiceConfig::from_toml("lisen = \"x\"").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = ServiceConfig::default();
        c.apply_env([
            ("EMOCUE_LISTEN", "127.0.0.1:1"),
            ("EMOCUE_TIMEOUT_MS", "1000"),
            ("EMOCUE_AUTH_TOKEN", "s3cret"),
            ("PATH", "/bin"),
        ])
        .unwrap();
        assert_eq!(c.listen, "127.0.0.1:1");
        assert_eq!(c.timeout_ms, Some(1000));
        assert_eq!(c.auth_token.as_deref(), Some("s3cret"));
        assert!(c.apply_env([("EMOCUE_TIMEOUT_MS", "soon")]).is_err());
        assert!(c.apply_env([("EMOCUE_LISTN", "x")]).is_err());
    }
}
