//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix shapes or row counts that cannot be combined.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter value outside its allowed range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// An API contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// IDX file carries the wrong magic number.
    #[error("bad IDX magic: expected {expected:#010x}, got {got:#010x}")]
    IdxMagic { expected: u32, got: u32 },

    /// IDX file ends before its header-declared payload.
    #[error("truncated IDX file: needed {needed} bytes, have {have}")]
    IdxTruncated { needed: usize, have: usize },

    /// Image and label files disagree on the sample count.
    #[error("IDX count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// A configuration key failed validation.
    #[error("config error: key `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// A checkpoint failed to load or did not match the run.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
