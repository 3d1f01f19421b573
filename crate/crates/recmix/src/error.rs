//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A weight sequence has no finite normalization (e.g. beta = 0 over an
    /// unbounded horizon).
    #[error("non-normalizable weights: {0}")]
    NonNormalizable(String),

    /// An operation was called on a value in the wrong state.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The operation is defined only for a narrower input class.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Every importance weight collapsed to zero after log-space
    /// stabilization; the step was aborted and the filter state left
    /// untouched.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// A malformed input record. `line` is 1-based for files, or the record
    /// index for in-memory streams.
    #[error("input error at line {line}: {message}")]
    Input { line: usize, message: String },

    /// An observation source produced no records.
    #[error("no observations in input")]
    NoData,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_parameter(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn input(line: usize, message: impl Into<String>) -> Self {
        Error::Input {
            line,
            message: message.into(),
        }
    }
}
