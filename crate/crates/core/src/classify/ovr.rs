//! One-vs-rest training of the full fine-label bundle.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::CompactionMap;
use crate::vectorize::{embed_text, tokenize, EmbeddingTable};

use super::bundle::LinearModelBundle;
use super::calibration::fit_calibration;
use super::corpus::LabeledCorpus;
use super::linear::{train_binary, LinearModel, SgdParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub sgd: SgdParams,
    pub split_seed: u64,
    pub train_ratio: f64,
    /// Negatives sampled per positive for each label's model.
    pub negative_ratio: usize,
    /// Share of each label's training records held back for calibration.
    pub calibration_fraction: f64,
    pub trained_at: i64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sgd: SgdParams::default(),
            split_seed: 7,
            train_ratio: 0.8,
            negative_ratio: 5,
            calibration_fraction: 0.25,
            trained_at: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub bundle: LinearModelBundle,
    /// Labels whose calibration fit failed and fell back to `(1, 0)`.
    pub calibration_fallbacks: Vec<String>,
    /// Training records skipped because no token was in the vocabulary.
    pub skipped_oov: usize,
}

/// Vectors of the corpus records, `None` for all-OOV texts.
pub fn vectorize_corpus(corpus: &LabeledCorpus, table: &EmbeddingTable) -> Vec<Option<Vec<f64>>> {
    corpus
        .records()
        .iter()
        .map(|r| {
            let v = embed_text(&tokenize(&r.text, table.language()), table);
            (!v.is_all_oov()).then_some(v.values)
        })
        .collect()
}

pub fn train_bundle(
    corpus: &LabeledCorpus,
    table: &EmbeddingTable,
    map: &CompactionMap,
    config: &TrainConfig,
) -> Result<TrainingOutcome> {
    let vectors = vectorize_corpus(corpus, table);
    let skipped_oov = vectors.iter().filter(|v| v.is_none()).count();
    let split = corpus.split(config.split_seed, config.train_ratio);

    // fit / calibration partition of the training split, per label
    let n_labels = map.len();
    let mut fit: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    let mut calib: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    let mut seen = vec![0usize; n_labels];
    let period = if config.calibration_fraction > 0.0 {
        (1.0 / config.calibration_fraction).round().max(2.0) as usize
    } else {
        usize::MAX
    };
    for &i in &split.train {
        if vectors[i].is_none() {
            continue;
        }
        let l = map.index_of(&corpus.records()[i].label).expect("corpus labels are validated");
        seen[l] += 1;
        if seen[l] % period == 0 {
            calib[l].push(i);
        } else {
            fit[l].push(i);
        }
    }
    if let Some(l) = (0..n_labels).find(|&l| fit[l].is_empty()) {
        return Err(Error::Training(format!(
            "no usable training records for fine label {:?}",
            map.labels()[l]
        )));
    }

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n_labels);
    let results: Vec<Result<(LinearModel, bool)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (vectors, fit, calib) = (&vectors, &fit, &calib);
                scope.spawn(move || {
                    (w..n_labels)
                        .step_by(workers)
                        .map(|l| train_label(l, map, vectors, fit, calib, config).map(|r| (l, r)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut slots: Vec<Option<Result<(LinearModel, bool)>>> = (0..n_labels).map(|_| None).collect();
        for h in handles {
            for r in h.join().expect("training worker panicked") {
                match r {
                    Ok((l, m)) => slots[l] = Some(Ok(m)),
                    Err(e) => return vec![Err(e)],
                }
            }
        }
        slots.into_iter().map(|s| s.expect("every label trained")).collect()
    });

    let mut models = Vec::with_capacity(n_labels);
    let mut calibration_fallbacks = Vec::new();
    for r in results {
        let (model, calibrated) = r?;
        if !calibrated {
            calibration_fallbacks.push(model.label.clone());
        }
        models.push(model);
    }
    let bundle = LinearModelBundle::new(models, map, table.language(), table.checksum(), config.trained_at)?;
    Ok(TrainingOutcome {
        bundle,
        calibration_fallbacks,
        skipped_oov,
    })
}

fn sample_negatives(label: usize, pools: &[Vec<usize>], cap: usize, seed: u64) -> Vec<usize> {
    let pool: Vec<usize> = pools
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != label)
        .flat_map(|(_, idx)| idx.iter().copied())
        .collect();
    if pool.len() <= cap {
        return pool;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), cap).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    picked
}

fn train_label(
    l: usize,
    map: &CompactionMap,
    vectors: &[Option<Vec<f64>>],
    fit: &[Vec<usize>],
    calib: &[Vec<usize>],
    config: &TrainConfig,
) -> Result<(LinearModel, bool)> {
    let label = &map.labels()[l];
    let vec_of = |i: usize| vectors[i].as_deref().expect("only vectorized records are indexed");
    let seed = config.sgd.seed ^ (l as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);

    let positives: Vec<&[f64]> = fit[l].iter().map(|&i| vec_of(i)).collect();
    let cap = positives.len() * config.negative_ratio.max(1);
    let negatives: Vec<&[f64]> = sample_negatives(l, fit, cap, seed).into_iter().map(vec_of).collect();
    let mut model = train_binary(label, &positives, &negatives, &config.sgd)?;

    let cal_pos = &calib[l];
    let cal_neg = sample_negatives(l, calib, cal_pos.len() * config.negative_ratio.max(1), seed.rotate_left(17));
    let held_out: Vec<(&[f64], f64)> = cal_pos
        .iter()
        .map(|&i| (vec_of(i), 1.0))
        .chain(cal_neg.iter().map(|&i| (vec_of(i), -1.0)))
        .collect();
    match fit_calibration(&model, &held_out) {
        Ok((a, b)) => {
            model.calib_a = a;
            model.calib_b = b;
            Ok((model, true))
        }
        Err(Error::Calibration(reason)) => {
            tracing::warn!(label = %label, %reason, "calibration fell back to identity");
            Ok((model, false))
        }
        Err(e) => Err(e),
    }
}
