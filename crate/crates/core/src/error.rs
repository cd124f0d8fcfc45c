use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem with labels, dimensions or map contents.
    #[error("schema error: {0}")]
    Schema(String),

    /// Embedding or bundle file could not be parsed.
    #[error("load error at byte {offset}: {message}")]
    Load { offset: u64, message: String },

    #[error("checksum mismatch: expected {expected}, found {found}")]
    Checksum { expected: String, found: String },

    #[error("compaction map version mismatch: bundle has {bundle:?}, configured map is {configured:?}")]
    VersionMismatch { bundle: String, configured: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A required model or embedding table has not been loaded.
    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn load(offset: u64, message: impl Into<String>) -> Self {
        Error::Load {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
