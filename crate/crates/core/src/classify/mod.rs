//! One-vs-rest linear emotion models: training, calibration, persistence
//! and ranking evaluation.

mod auc;
mod bundle;
mod calibration;
mod corpus;
pub mod linear;
mod ovr;

pub use auc::auc;
pub use bundle::{load_with_embeddings, LinearModelBundle};
pub use calibration::{fit_calibration, fit_logistic, log_loss};
pub use corpus::{LabeledCorpus, LabeledText, Split};
pub use linear::{objective, objective_gradient, train_binary, Example, LinearModel, SgdParams};
pub use ovr::{train_bundle, vectorize_corpus, TrainConfig, TrainingOutcome};

#[cfg(test)]
#[allow(unused_imports)]
pub(crate) use bundle::tests::random_bundle;
