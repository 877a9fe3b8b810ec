//! Shared error type for the whole crate.

use thiserror::Error;

/// Errors produced by any repalign operation.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a basic validity requirement (non-finite values, empty matrix).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An argument is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two operands have incompatible shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An on-disk artifact is malformed (bad magic, truncation, trailing bytes).
    #[error("format error: {0}")]
    Format(String),

    /// An on-disk artifact has a version this build does not understand.
    #[error("unsupported version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    /// A computation diverged or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A run configuration could not be parsed or resolved.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
