//! Sentence featurization: tokenize, look up pre-trained word vectors,
//! and average the ones that are in the vocabulary.

mod embeddings;
mod tokenize;

use serde::{Deserialize, Serialize};

pub use embeddings::{EmbeddingTable, VectorFormat};
pub use tokenize::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

impl std::str::FromStr for Language {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(crate::Error::Config(format!("unknown language tag {other:?}"))),
        }
    }
}

/// Mean word vector of one piece of text.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector {
    pub values: Vec<f64>,
    /// In-vocabulary tokens that contributed to the mean.
    pub token_count: usize,
    pub oov_count: usize,
}

impl SentenceVector {
    pub fn is_all_oov(&self) -> bool {
        self.token_count == 0
    }
}

/// Averages the vectors of in-vocabulary tokens. Out-of-vocabulary tokens
/// are skipped and counted; with no known token the result is all zeros.
pub fn embed_text<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> SentenceVector {
    let mut sum = vec![0f64; table.dim()];
    let mut token_count = 0;
    let mut oov_count = 0;
    for token in tokens {
        match table.get(token.as_ref()) {
            Some(v) => {
                for (acc, &x) in sum.iter_mut().zip(v) {
                    *acc += f64::from(x);
                }
                token_count += 1;
            }
            None => oov_count += 1,
        }
    }
    if token_count > 0 {
        let n = token_count as f64;
        sum.iter_mut().for_each(|v| *v /= n);
    }
    SentenceVector {
        values: sum,
        token_count,
        oov_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn abc() -> EmbeddingTable {
        EmbeddingTable::read_text("3 3\na 1 0 0\nb 0 1 0\nc 0.25 -2 4\n".as_bytes(), Language::En).unwrap()
    }

    #[test]
    fn average_of_two() {
        let v = embed_text(&["a", "b"], &abc());
        assert_eq!(v.values, [0.5, 0.5, 0.0]);
        assert_eq!((v.token_count, v.oov_count), (2, 0));
    }

    #[test]
    fn single_token_is_identity() {
        let v = embed_text(&["c"], &abc());
        assert_eq!(v.values, [0.25, -2.0, 4.0]);
    }

    #[test]
    fn all_oov_is_zero() {
        let v = embed_text(&["zz", "yy"], &abc());
        assert!(v.is_all_oov());
        assert_eq!(v.values, [0.0; 3]);
        assert_eq!(v.oov_count, 2);
    }

    #[test]
    fn matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = 24;
        let entries: Vec<(String, Vec<f32>)> = (0..50)
            .map(|i| (format!("t{i}"), (0..dim).map(|_| rng.random_range(-3.0f32..3.0)).collect()))
            .collect();
        let table = EmbeddingTable::new(dim, Language::En, entries.clone()).unwrap();
        let tokens: Vec<&str> = entries.iter().map(|(t, _)| t.as_str()).collect();
        let got = embed_text(&tokens, &table);
        for d in 0..dim {
            let mut s = 0.0f64;
            for (_, v) in &entries {
                s += v[d] as f64;
            }
            assert!((got.values[d] - s / 50.0).abs() < 1e-6);
        }
    }

    fn table_strategy() -> impl Strategy<Value = (EmbeddingTable, Vec<String>)> {
        (1usize..6, proptest::collection::vec(proptest::collection::vec(-5.0f32..5.0, 4), 1..12)).prop_map(
            |(_, vecs)| {
                let entries: Vec<(String, Vec<f32>)> =
                    vecs.into_iter().enumerate().map(|(i, v)| (format!("t{i}"), v)).collect();
                let tokens = entries.iter().map(|(t, _)| t.clone()).collect();
                (EmbeddingTable::new(4, Language::En, entries).unwrap(), tokens)
            },
        )
    }

    proptest! {
        #[test]
        fn permutation_and_duplication_invariance((table, tokens) in table_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let base = embed_text(&tokens, &table);
            let mut shuffled = tokens.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let perm = embed_text(&shuffled, &table);
            let doubled: Vec<String> = tokens.iter().flat_map(|t| [t.clone(), t.clone()]).collect();
            let dup = embed_text(&doubled, &table);
            for d in 0..4 {
                prop_assert!((base.values[d] - perm.values[d]).abs() < 1e-9);
                prop_assert!((base.values[d] - dup.values[d]).abs() < 1e-9);
                let lo = tokens.iter().map(|t| table.get(t).unwrap()[d] as f64).fold(f64::INFINITY, f64::min);
                let hi = tokens.iter().map(|t| table.get(t).unwrap()[d] as f64).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(base.values[d] >= lo - 1e-9 && base.values[d] <= hi + 1e-9);
            }
        }
    }
}
