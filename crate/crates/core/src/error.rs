use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RrlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RrlError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RrlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RrlError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad input or usage rather than from a
    /// numeric failure during computation.
    pub fn is_contract_violation(&self) -> bool {
        !matches!(self, RrlError::NonFinite(_))
    }
}
