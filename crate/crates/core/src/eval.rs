//! Held-out evaluation of a trained bundle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::{auc, vectorize_corpus, LabeledCorpus, LinearModelBundle};
use crate::error::{Error, Result};
use crate::taxonomy::{Category, CompactionMap};
use crate::vectorize::EmbeddingTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDescription {
    pub seed: u64,
    pub train_ratio: f64,
    pub train_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    /// `None` when the category was never predicted.
    pub precision: Option<f64>,
    /// `None` when the category has no test records.
    pub recall: Option<f64>,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fixture_id: Option<String>,
    pub bundle_checksum: String,
    pub split: SplitDescription,
    /// AUC of every fine label with at least one positive test record.
    pub per_label_auc: BTreeMap<String, f64>,
    pub macro_auc: f64,
    pub per_category: BTreeMap<Category, CategoryMetrics>,
    /// Test records without any in-vocabulary token, left out of all metrics.
    pub skipped_oov: usize,
}

/// Scores the test side of the seeded split. Each fine label's AUC ranks
/// its model's decision values over all scored test records.
pub fn evaluate(
    bundle: &LinearModelBundle,
    table: &EmbeddingTable,
    corpus: &LabeledCorpus,
    map: &CompactionMap,
    seed: u64,
    train_ratio: f64,
) -> Result<EvalReport> {
    if bundle.embedding_checksum() != table.checksum() {
        return Err(Error::Checksum {
            expected: bundle.embedding_checksum().to_string(),
            found: table.checksum(),
        });
    }
    let split = corpus.split(seed, train_ratio);
    let vectors = vectorize_corpus(corpus, table);

    let mut scores: Vec<Vec<f64>> = Vec::new();
    let mut gold: Vec<usize> = Vec::new();
    let mut skipped_oov = 0;
    for &i in &split.test {
        match &vectors[i] {
            Some(v) => {
                scores.push(bundle.score_all(v)?);
                gold.push(map.index_of(&corpus.records()[i].label).expect("corpus labels are validated"));
            }
            None => skipped_oov += 1,
        }
    }

    let mut per_label_auc = BTreeMap::new();
    for (l, label) in map.labels().iter().enumerate() {
        let labels: Vec<bool> = gold.iter().map(|&g| g == l).collect();
        if !labels.iter().any(|&b| b) || labels.iter().all(|&b| b) {
            continue;
        }
        let s: Vec<f64> = scores.iter().map(|row| row[l]).collect();
        per_label_auc.insert(label.clone(), auc(&s, &labels)?);
    }
    if per_label_auc.is_empty() {
        return Err(Error::Evaluation("no fine label has both positive and negative test records".into()));
    }
    let macro_auc = per_label_auc.values().sum::<f64>() / per_label_auc.len() as f64;

    let mut support = [0usize; 7];
    let mut predicted = [0usize; 7];
    let mut correct = [0usize; 7];
    for (row, &g) in scores.iter().zip(&gold) {
        let truth = map.category_at(g).index();
        let guess = map.compact_slice(row).argmax().unwrap_or(Category::FALLBACK).index();
        support[truth] += 1;
        predicted[guess] += 1;
        if truth == guess {
            correct[truth] += 1;
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let per_category = Category::ALL
        .iter()
        .map(|&c| {
            let k = c.index();
            let m = CategoryMetrics {
                precision: ratio(correct[k], predicted[k]),
                recall: ratio(correct[k], support[k]),
                support: support[k],
                predicted: predicted[k],
            };
            (c, m)
        })
        .collect();

    Ok(EvalReport {
        fixture_id: None,
        bundle_checksum: bundle.checksum(),
        split: SplitDescription {
            seed,
            train_ratio,
            train_size: split.train.len(),
            test_size: split.test.len(),
        },
        per_label_auc,
        macro_auc,
        per_category,
        skipped_oov,
    })
}
