use thiserror::Error;

/// Error type shared across the whole pipeline.
#[derive(Debug, Error)]
pub enum ScrError {
    /// Tensor / vector dimension mismatch.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite loss or gradient during training.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScrError>;
