use thiserror::Error;

pub type Result<T> = std::result::Result<T, SdpError>;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("perturbation too large: {0}")]
    PerturbationTooLarge(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SdpError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        SdpError::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        SdpError::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        SdpError::NumericalFailure(msg.into())
    }
}
