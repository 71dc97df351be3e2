//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Internal structural inconsistency (mismatched index sets, stale tape).
    #[error("structural error: {0}")]
    Structural(String),

    /// Text input could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A numeric failure (NaN/Inf) was detected. The message names the
    /// offending quantity.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Checkpoint bytes are malformed or truncated.
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    /// Checkpoint was written with an unsupported format version.
    #[error("checkpoint version mismatch: found {found}, supported {supported}")]
    VersionMismatch { found: u32, supported: u32 },

    /// Checkpoint lacks a parameter block the model requires.
    #[error("checkpoint missing key: {0}")]
    MissingKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
