use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Malformed input file (WAV header, manifest line, interval file, ...).
    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// Inputs that are individually valid but cannot be combined.
    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Input too short or otherwise degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An internal invariant failed to hold. Always a bug.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn incompatible(msg: impl Into<String>) -> Self {
        Error::Incompatible(msg.into())
    }
}
