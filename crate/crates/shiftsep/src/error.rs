//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    /// Fewer completed runs than requested after the retry budget.
    /// Carries the partial ensemble so a caller can still inspect it.
    #[error("ensemble underfilled for D={d}: {got} of {want} runs completed")]
    EnsembleUnderfilled {
        d: usize,
        want: usize,
        got: usize,
        partial: Box<crate::selection::RunEnsemble>,
    },

    #[error("selection degenerate for D={d}: {reason}")]
    SelectionDegenerate { d: usize, reason: String },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("localization failed: {0}")]
    LocalizationFailed(String),

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {file} at row {row}, column {col}: {message}")]
    Parse {
        file: String,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("JSON error in {file}: {source}")]
    Json {
        file: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }
}
