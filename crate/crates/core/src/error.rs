use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("unexpected trailing data: expected {expected} bytes, found {found}")]
    TrailingData { expected: usize, found: usize },

    #[error("raw value {value} at sample {index} exceeds 4095")]
    RawOutOfRange { value: u16, index: usize },

    #[error("non-finite value at sample {0}")]
    NonFinite(usize),

    #[error("invalid class label code {0}")]
    InvalidLabel(u8),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("missing reference: {0}")]
    MissingReference(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
