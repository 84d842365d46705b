use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::losses::LossError;
use crate::metrics::MetricError;
use crate::query::VocabError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("fingerprint mismatch: checkpoint has {checkpoint}, data needs {expected}")]
    Fingerprint { checkpoint: String, expected: String },
    #[error("{path}: line {line}: {reason}")]
    Format {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("scene generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that happen while a valid job is running, as
    /// opposed to rejected inputs.
    pub fn is_runtime(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. } | Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
