//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape disagreement between operands.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A vector whose norm is below the degeneracy threshold.
    #[error("degenerate vector: {0}")]
    Degenerate(String),

    /// Input that produced no tokens.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Token outside the vocabulary when no hash buckets are configured.
    #[error("unknown token {0:?} and vocabulary has no hash buckets")]
    UnknownToken(String),

    /// Malformed record in a line-oriented file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed but invalid data.
    #[error("validation error: {0}")]
    Validation(String),

    /// A generator was asked for more items than its space supports.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Inconsistent or unusable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite value where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Argument outside its documented range.
    #[error("out of range: {0}")]
    Range(String),

    /// A stored artifact failed an integrity check.
    #[error("corrupt artifact: {0}")]
    Corruption(String),

    /// Unknown serialization format version.
    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },

    /// Checkpoint/index fingerprints do not agree.
    #[error("incompatible artifacts: {0}")]
    Compatibility(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Failures of the remote answer backend, kept distinct so callers can
/// report them separately from data errors.
#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("request timed out: {0}")]
    Timeout(String),

    #[error("unexpected HTTP status {code}: {body}")]
    Status { code: u16, body: String },

    #[error("malformed response: {0}")]
    Malformed(String),

    #[error("transport failure: {0}")]
    Transport(String),
}
