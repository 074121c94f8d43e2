use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed CSV: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: column not found: {column}", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("template {template:?} does not match message {raw:?}")]
    Alignment { raw: String, template: String },
    #[error("invalid template {template:?}: {reason}")]
    BadTemplate { template: String, reason: String },
    #[error("message has no tokens")]
    EmptyMessage,
    #[error("empty token")]
    EmptyToken,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("token index {index} out of range for message of {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("contrastive sample has no dissimilar vectors")]
    NoNegatives,
    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("unknown source {name:?}; valid sources: {}", valid.join(", "))]
    UnknownSource { name: String, valid: Vec<String> },
    #[error("training pool is empty")]
    EmptyPool,
    #[error("no labeled messages given")]
    NoLabels,
    #[error("partitions cover different message sets")]
    PartitionMismatch,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Error {
        Error::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for failures of numeric health rather than of input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient(_) | Error::NonFiniteLoss { .. }
        )
    }
}
