use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("single-class dataset: {0}")]
    SingleClass(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough rows: need more than {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },

    #[error("insufficient minority support: need at least 2 candidates, have {0}")]
    InsufficientMinority(usize),

    #[error("filtering removed too much ({kept} minor candidates left); lower q or disable filtering")]
    OverFiltered { kept: usize },

    #[error("no eligible cluster: no cluster has minority fraction above {threshold}")]
    NoEligibleCluster { threshold: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
