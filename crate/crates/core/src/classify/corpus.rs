use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::CompactionMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: String,
}

/// Texts labeled with fine emotion labels, one JSON object per line on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    records: Vec<LabeledText>,
}

/// Indices into a corpus, split per label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl LabeledCorpus {
    pub fn new(records: Vec<LabeledText>, map: &CompactionMap) -> Result<Self> {
        if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| map.index_of(&r.label).is_none()) {
            return Err(Error::Schema(format!("record {i}: {:?} is not a fine label", r.label)));
        }
        Ok(LabeledCorpus { records })
    }

    pub fn load(path: &Path, map: &CompactionMap) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        let mut records = Vec::new();
        let mut offset = 0u64;
        for line in BufReader::new(file).lines() {
            let line = line?;
            let at = offset;
            offset += line.len() as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: LabeledText =
                serde_json::from_str(&line).map_err(|e| Error::load(at, format!("corpus record: {e}")))?;
            if map.index_of(&record.label).is_none() {
                return Err(Error::load(at, format!("{:?} is not a fine label", record.label)));
            }
            records.push(record);
        }
        Ok(LabeledCorpus { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn records(&self) -> &[LabeledText] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.label.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Seeded per-label split; each label with at least two records keeps
    /// at least one on each side.
    pub fn split(&self, seed: u64, train_ratio: f64) -> Split {
        let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            by_label.entry(&r.label).or_default().push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut split = Split {
            train: Vec::new(),
            test: Vec::new(),
        };
        for indices in by_label.values_mut() {
            indices.shuffle(&mut rng);
            let n = indices.len();
            let mut k = (n as f64 * train_ratio).round() as usize;
            if n >= 2 {
                k = k.clamp(1, n - 1);
            } else {
                k = n;
            }
            split.train.extend_from_slice(&indices[..k]);
            split.test.extend_from_slice(&indices[k..]);
        }
        split.train.sort_unstable();
        split.test.sort_unstable();
        split
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> LabeledCorpus {
        let map = CompactionMap::builtin();
        let records = map
            .labels()
            .iter()
            .flat_map(|l| (0..10).map(move |i| LabeledText { text: format!("{l} {i}"), label: l.clone() }))
            .collect();
        LabeledCorpus::new(records, &map).unwrap()
    }

    #[test]
    fn split_is_seeded_and_stratified() {
        let c = corpus();
        let a = c.split(3, 0.8);
        assert_eq!(a, c.split(3, 0.8));
        assert_ne!(a, c.split(4, 0.8));
        assert_eq!(a.train.len(), 320);
        assert_eq!(a.test.len(), 80);
        let counts = a.test.iter().fold(BTreeMap::new(), |mut m, &i| {
            *m.entry(&c.records()[i].label).or_insert(0) += 1;
            m
        });
        assert!(counts.values().all(|&n| n == 2));
    }

    #[test]
    fn unknown_label_rejected() {
        let map = CompactionMap::builtin();
        let bad = vec![LabeledText {
            text: "x".into(),
            label: "grumpy".into(),
        }];
        assert!(LabeledCorpus::new(bad, &map).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let c = corpus();
        c.save(&path).unwrap();
        let back = LabeledCorpus::load(&path, &CompactionMap::builtin()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.counts()["happy"], 10);
    }
}
