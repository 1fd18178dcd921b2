use std::io;

use thiserror::Error;

/// Decoding failures for the on-disk formats (PGM, PFM, weight files).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("unsupported format: magic {0:?}")]
    UnsupportedFormat(String),
    #[error("unsupported weight file version {0:?}")]
    UnsupportedVersion(String),
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingData(usize),
    #[error("invalid value at index {index}: {reason}")]
    InvalidValue { index: usize, reason: &'static str },
    #[error("layer {layer}: {reason}")]
    BadLayer { layer: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("config error on line {line}: {reason}")]
    Config { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
