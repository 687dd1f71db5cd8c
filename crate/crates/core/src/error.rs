use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MotionError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("insufficient length: {0}")]
    InsufficientLength(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("skeleton validation failed: {0}")]
    Validation(String),

    #[error("parse error in {path} at line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("index error: {0}")]
    Index(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MotionError {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        MotionError::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MotionError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad flags, configs or missing inputs rather
    /// than a failure while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            MotionError::Usage(_)
                | MotionError::Config(_)
                | MotionError::Validation(_)
                | MotionError::Checkpoint(_)
                | MotionError::EmptyDataset(_)
        )
    }
}
