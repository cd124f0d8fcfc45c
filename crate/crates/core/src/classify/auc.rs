//! Area under the ROC curve from the Mann-Whitney rank statistic.

use crate::error::{Error, Result};

/// ROC AUC of `scores` against `labels` (true = positive class).
///
/// Tied scores receive the average rank, so each tied positive/negative
/// pair contributes one half. Ranks are kept doubled as integers, which
/// makes the result exact for any input size that fits in `u64`.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Evaluation("AUC needs both positive and negative examples".into()));
    }

    // adding 0.0 folds -0.0 into 0.0 so the two tie
    let key: Vec<f64> = scores.iter().map(|s| s + 0.0).collect();
    let mut order: Vec<usize> = (0..key.len()).collect();
    order.sort_unstable_by(|&a, &b| key[a].total_cmp(&key[b]));

    // Sum of doubled 1-based ranks of the positives.
    let mut doubled_rank_sum = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && key[order[j]].total_cmp(&key[order[i]]).is_eq() {
            j += 1;
        }
        // ranks i+1 ..= j share the mean rank (i + 1 + j) / 2
        let doubled_rank = (i + 1 + j) as u64;
        let positives_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        doubled_rank_sum += doubled_rank * positives_in_group;
        i = j;
    }
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_ranking() {
        let s = [0.1, 0.2, 0.8, 0.9];
        let l = [false, false, true, true];
        assert_eq!(auc(&s, &l).unwrap(), 1.0);
    }

    #[test]
    fn signed_zeros_tie() {
        assert_eq!(auc(&[-0.0, 0.0], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn total_ties() {
        assert_eq!(auc(&[0.4; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
    }

    #[test]
    fn known_value_with_tie() {
        // pos {3, 5, 2}, neg {1, 2, 4}: pairs won 2 + 3 + 1, plus one tie
        let s = [3.0, 5.0, 2.0, 1.0, 2.0, 4.0];
        let l = [true, true, true, false, false, false];
        assert_eq!(auc(&s, &l).unwrap(), 6.5 / 9.0);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(auc(&[1.0, 2.0], &[true, true]), Err(Error::Evaluation(_))));
    }

    proptest! {
        #[test]
        fn invariant_under_increasing_transform(
            pairs in proptest::collection::vec((-50i32..50, any::<bool>()), 2..80)
        ) {
            let scores: Vec<f64> = pairs.iter().map(|(s, _)| *s as f64 / 4.0).collect();
            let labels: Vec<bool> = pairs.iter().map(|(_, l)| *l).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let moved: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&moved, &labels).unwrap());
        }
    }
}
