use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the subset-selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed caller input: dimension mismatch, non-finite coordinates, bad indices.
    #[error("invalid input: {0}")]
    Input(String),

    /// CSV content that does not describe a dense point set.
    #[error("format error at row {row}: {message}")]
    Format { row: u64, message: String },

    /// Algorithm parameters outside their admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Oracle size guard exceeded (exact computations are restricted to small inputs).
    #[error("size guard exceeded: {0}")]
    Guard(String),

    /// Failure while reading a data pass; the pass is not counted.
    #[error("stream error reading {path:?}: {message}")]
    Stream { path: PathBuf, message: String },

    /// Broken internal invariant, e.g. a proposal pool that was sized too small.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Guard(_) => 3,
            Error::Internal(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
