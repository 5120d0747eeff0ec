use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside its admissible domain (depth outside `[0, 1]`, empty vector, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or problem instance failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Input row rejected during training or posterior updates.
    #[error("row {index}: {reason}")]
    InvalidRow { index: usize, reason: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Design matrix columns with zero variance and no regularisation to resolve them.
    #[error("degenerate features (constant columns {0:?}) with zero ridge penalty")]
    DegenerateFeatures(Vec<usize>),

    #[error("action {0} missing from log")]
    MissingAction(f64),

    #[error("instance too large for exhaustive search: {customers} customers x {actions} actions")]
    TooLarge { customers: usize, actions: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Validation failures are caller mistakes; everything else is a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
