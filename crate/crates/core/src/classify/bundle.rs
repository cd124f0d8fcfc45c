//! The set of 40 fine-label models and its on-disk container.
//!
//! File layout:
//!
//! ```text
//! magic      8 bytes   "EMOCUEB1"
//! length     u64 LE    manifest byte length
//! manifest   JSON      labels, dim, versions, checksums, per-model scalars
//! payload    f32 LE    dim weights per model, in manifest order
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::taxonomy::CompactionMap;
use crate::vectorize::{EmbeddingTable, Language, VectorFormat};

use super::linear::LinearModel;

const MAGIC: &[u8; 8] = b"EMOCUEB1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelBundle {
    pub(crate) dim: usize,
    pub(crate) language: Language,
    /// One model per fine label, in the compaction map's canonical order.
    pub(crate) models: Vec<LinearModel>,
    pub(crate) compaction_version: String,
    pub(crate) embedding_checksum: String,
    pub(crate) trained_at: i64,
    pub(crate) embeddings_hint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dim: usize,
    language: Language,
    compaction_version: String,
    embedding_checksum: String,
    trained_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embeddings_hint: Option<String>,
    payload_sha256: String,
    models: Vec<ModelEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelEntry {
    label: String,
    bias: f64,
    calib_a: f64,
    calib_b: f64,
}

impl LinearModelBundle {
    /// Assembles a bundle, ordering models canonically and checking that
    /// they cover exactly the map's fine labels with a shared dimension.
    pub fn new(
        models: Vec<LinearModel>,
        map: &CompactionMap,
        language: Language,
        embedding_checksum: impl Into<String>,
        trained_at: i64,
    ) -> Result<Self> {
        let dim = models.first().map(LinearModel::dim).unwrap_or(0);
        let mut by_label: BTreeMap<String, LinearModel> = BTreeMap::new();
        for m in models {
            if m.dim() != dim {
                return Err(Error::Schema(format!(
                    "model {:?} has dimension {}, expected {dim}",
                    m.label,
                    m.dim()
                )));
            }
            if by_label.insert(m.label.clone(), m).is_some() {
                return Err(Error::Schema("duplicate model label".into()));
            }
        }
        let bundle = LinearModelBundle {
            dim,
            language,
            models: by_label.into_values().collect(),
            compaction_version: map.version().to_owned(),
            embedding_checksum: embedding_checksum.into(),
            trained_at,
            embeddings_hint: None,
        };
        bundle.validate(map)?;
        Ok(bundle)
    }

    pub fn with_embeddings_hint(mut self, hint: impl Into<String>) -> Self {
        self.embeddings_hint = Some(hint.into());
        self
    }

    fn validate(&self, map: &CompactionMap) -> Result<()> {
        if self.compaction_version != map.version() {
            return Err(Error::VersionMismatch {
                bundle: self.compaction_version.clone(),
                configured: map.version().to_owned(),
            });
        }
        if self.dim == 0 {
            return Err(Error::Schema("bundle dimension must be positive".into()));
        }
        for label in map.labels() {
            if !self.models.iter().any(|m| &m.label == label) {
                return Err(Error::Schema(format!("bundle has no model for fine label {label:?}")));
            }
        }
        if let Some(extra) = self.models.iter().find(|m| map.index_of(&m.label).is_none()) {
            return Err(Error::Schema(format!("bundle model {:?} is not a fine label", extra.label)));
        }
        if self.models.len() != map.len() {
            return Err(Error::Schema("bundle has duplicate models".into()));
        }
        for (m, label) in self.models.iter().zip(map.labels()) {
            if &m.label != label {
                return Err(Error::Schema(format!("model order differs from the map at {label:?}")));
            }
            if m.dim() != self.dim {
                return Err(Error::Schema(format!("model {label:?} has dimension {}", m.dim())));
            }
            if !(m.calib_a >= 0.0 && m.calib_a.is_finite() && m.calib_b.is_finite() && m.bias.is_finite()) {
                return Err(Error::Schema(format!("model {label:?} has invalid scalars")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn models(&self) -> &[LinearModel] {
        &self.models
    }

    pub fn compaction_version(&self) -> &str {
        &self.compaction_version
    }

    pub fn embedding_checksum(&self) -> &str {
        &self.embedding_checksum
    }

    pub fn trained_at(&self) -> i64 {
        self.trained_at
    }

    /// Embedding file the bundle was trained with, relative to the bundle.
    pub fn embeddings_hint(&self) -> Option<&str> {
        self.embeddings_hint.as_deref()
    }

    /// Decision values `w·x + b` for every model, in canonical label order.
    pub fn score_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Schema(format!(
                "vector has dimension {}, bundle expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.models.iter().map(|m| m.decision(x)).collect())
    }

    pub fn score_named(&self, x: &[f64]) -> Result<BTreeMap<String, f64>> {
        let scores = self.score_all(x)?;
        Ok(self.models.iter().map(|m| m.label.clone()).zip(scores).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut payload = Vec::with_capacity(self.models.len() * self.dim * 4);
        for m in &self.models {
            for v in &m.weights {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            dim: self.dim,
            language: self.language,
            compaction_version: self.compaction_version.clone(),
            embedding_checksum: self.embedding_checksum.clone(),
            trained_at: self.trained_at,
            embeddings_hint: self.embeddings_hint.clone(),
            payload_sha256: hex::encode(Sha256::digest(&payload)),
            models: self
                .models
                .iter()
                .map(|m| ModelEntry {
                    label: m.label.clone(),
                    bias: m.bias,
                    calib_a: m.calib_a,
                    calib_b: m.calib_b,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        w.write_all(&payload)?;
        Ok(())
    }

    /// Loads a bundle and checks it against the configured compaction map.
    pub fn load(path: &Path, map: &CompactionMap) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes, map)
    }

    pub fn from_bytes(bytes: &[u8], map: &CompactionMap) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::load(0, "truncated bundle header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::load(0, "not a model bundle (bad magic)"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let manifest_end = 16usize
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::load(16, "truncated manifest"))?;
        let manifest: Manifest = serde_json::from_slice(&bytes[16..manifest_end])
            .map_err(|e| Error::load(16, format!("manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::load(
                16,
                format!("unsupported bundle format version {}", manifest.format_version),
            ));
        }
        let payload = &bytes[manifest_end..];
        let expected_len = manifest.models.len() * manifest.dim * 4;
        if payload.len() < expected_len {
            return Err(Error::load(
                bytes.len() as u64,
                format!("truncated payload: {} of {expected_len} bytes", payload.len()),
            ));
        }
        if payload.len() > expected_len {
            return Err(Error::load(
                (manifest_end + expected_len) as u64,
                "trailing bytes after weight payload",
            ));
        }
        let found = hex::encode(Sha256::digest(payload));
        if found != manifest.payload_sha256 {
            return Err(Error::Checksum {
                expected: manifest.payload_sha256,
                found,
            });
        }
        if manifest.compaction_version != map.version() {
            return Err(Error::VersionMismatch {
                bundle: manifest.compaction_version,
                configured: map.version().to_owned(),
            });
        }
        let models = manifest
            .models
            .iter()
            .zip(payload.chunks_exact(manifest.dim * 4))
            .map(|(entry, chunk)| LinearModel {
                label: entry.label.clone(),
                weights: chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                    .collect(),
                bias: entry.bias,
                calib_a: entry.calib_a,
                calib_b: entry.calib_b,
            })
            .collect();
        let bundle = LinearModelBundle {
            dim: manifest.dim,
            language: manifest.language,
            models,
            compaction_version: manifest.compaction_version,
            embedding_checksum: manifest.embedding_checksum,
            trained_at: manifest.trained_at,
            embeddings_hint: manifest.embeddings_hint,
        };
        bundle.validate(map)?;
        Ok(bundle)
    }

    /// SHA-256 of the serialized bundle, hex encoded.
    pub fn checksum(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        hex::encode(Sha256::digest(&buf))
    }
}

/// Loads a bundle and its embedding table. Without an explicit
/// `embeddings` path the bundle's embeddings hint is resolved against the
/// bundle's directory. Checksum agreement is left to the caller.
pub fn load_with_embeddings(
    bundle_path: &Path,
    embeddings: Option<&Path>,
    map: &CompactionMap,
) -> Result<(LinearModelBundle, EmbeddingTable)> {
    let bundle = LinearModelBundle::load(bundle_path, map)?;
    let table_path = match embeddings {
        Some(p) => p.to_path_buf(),
        None => {
            let hint = bundle.embeddings_hint().ok_or_else(|| {
                Error::Config(format!(
                    "{}: bundle names no embeddings file; pass one explicitly",
                    bundle_path.display()
                ))
            })?;
            bundle_path.parent().unwrap_or(Path::new(".")).join(hint)
        }
    };
    let table = EmbeddingTable::load(&table_path, VectorFormat::from_path(&table_path), bundle.language())?;
    Ok((bundle, table))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_bundle(map: &CompactionMap, dim: usize, seed: u64) -> LinearModelBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let models = map
            .labels()
            .iter()
            .map(|l| LinearModel {
                label: l.clone(),
                weights: (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
                bias: rng.random_range(-0.5..0.5),
                calib_a: rng.random_range(0.1..3.0),
                calib_b: rng.random_range(-1.0..1.0),
            })
            .collect();
        LinearModelBundle::new(models, map, Language::En, "abc123", 1_700_000_000_000).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let map = CompactionMap::builtin();
        let bundle = random_bundle(&map, 13, 4).with_embeddings_hint("en.bin");
        let mut buf = Vec::new();
        bundle.write_to(&mut buf).unwrap();
        let back = LinearModelBundle::from_bytes(&buf, &map).unwrap();
        assert_eq!(back, bundle);
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let map = CompactionMap::builtin();
        let mut buf = Vec::new();
        random_bundle(&map, 8, 1).write_to(&mut buf).unwrap();
        let last = buf.len() - 5;
        buf[last] ^= 0x40;
        assert!(matches!(LinearModelBundle::from_bytes(&buf, &map), Err(Error::Checksum { .. })));
    }

    #[test]
    fn truncation_and_version_mismatch() {
        let map = CompactionMap::builtin();
        let mut buf = Vec::new();
        random_bundle(&map, 8, 1).write_to(&mut buf).unwrap();
        let err = LinearModelBundle::from_bytes(&buf[..buf.len() - 4], &map).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let groups = map.iter().map(|(l, c)| (l.to_owned(), c)).collect();
        let other = CompactionMap::new("other.v2", groups).unwrap();
        assert!(matches!(
            LinearModelBundle::from_bytes(&buf, &other),
            Err(Error::VersionMismatch { .. })
        ));
    }

    #[test]
    fn missing_label_is_named() {
        let map = CompactionMap::builtin();
        let mut bundle = random_bundle(&map, 4, 2);
        let removed = bundle.models.remove(7).label;
        let mut buf = Vec::new();
        bundle.write_to(&mut buf).unwrap();
        let err = LinearModelBundle::from_bytes(&buf, &map).unwrap_err().to_string();
        assert!(err.contains(&removed), "{err}");

        let err = LinearModelBundle::new(bundle.models.clone(), &map, Language::En, "x", 0)
            .unwrap_err()
            .to_string();
        assert!(err.contains(&removed), "{err}");
    }

    #[test]
    fn scoring_basics() {
        let map = CompactionMap::builtin();
        let bundle = random_bundle(&map, 6, 3);
        let zero = bundle.score_all(&[0.0; 6]).unwrap();
        for (s, m) in zero.iter().zip(bundle.models()) {
            assert_eq!(*s, m.bias);
        }
        let mut m0 = bundle.models()[0].clone();
        m0.bias = 0.0;
        let x: Vec<f64> = m0.weights.iter().map(|&w| w as f64).collect();
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        assert!((m0.decision(&x) - norm_sq).abs() < 1e-12);
        assert!(matches!(bundle.score_all(&[0.0; 5]), Err(Error::Schema(_))));
    }

    #[test]
    fn scoring_matches_naive_multiply_add() {
        let map = CompactionMap::builtin();
        let bundle = random_bundle(&map, 32, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let x: Vec<f64> = (0..32).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = bundle.score_all(&x).unwrap();
            for (g, m) in got.iter().zip(bundle.models()) {
                let mut acc = m.bias;
                for d in 0..32 {
                    acc += m.weights[d] as f64 * x[d];
                }
                assert!((g - acc).abs() < 1e-9);
            }
        }
    }
}
