//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid or tensor dimensions violate an operation's contract.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A scalar parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Field or image values are outside the expected range.
    #[error("range error: {0}")]
    Range(String),

    /// A gradient slot or parameter contract was violated.
    #[error("contract error: {0}")]
    Contract(String),

    /// A dataset or model file is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Dataset or weight-file schema version is not supported.
    #[error("unsupported schema version {found} (supported: {supported})")]
    UnsupportedSchema { found: u32, supported: u32 },

    /// An expected per-sample file is missing.
    #[error("missing file for sample {sample_id}: {path}")]
    MissingFile { sample_id: u64, path: PathBuf },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
