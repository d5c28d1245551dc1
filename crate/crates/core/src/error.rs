use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("document {0} has no in-vocabulary tokens")]
    EmptyDocument(String),

    #[error("insufficient documents for genre {genre}: need {needed}, have {available} (short by {})", needed - available)]
    Capacity {
        genre: String,
        needed: usize,
        available: usize,
    },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("adapter error: {message}")]
    Adapter {
        message: String,
        payload: Option<serde_json::Value>,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn adapter(message: impl Into<String>) -> Self {
        Error::Adapter {
            message: message.into(),
            payload: None,
        }
    }
}
