use thiserror::Error;

/// Errors raised by the optimization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("vertex enumeration unsupported: {0}")]
    Unsupported(String),

    #[error("stream exhausted at round {reached} (requested {requested} rounds)")]
    StreamExhausted { reached: usize, requested: usize },

    #[error("comparator undefined: {0}")]
    ComparatorUndefined(String),

    #[error("{file}: expected {expected} bytes, found {actual}")]
    Truncated {
        file: String,
        expected: u64,
        actual: u64,
    },

    #[error("{file}: bad magic number {found:#010x} (expected {expected:#010x})")]
    BadMagic { file: String, expected: u32, found: u32 },

    #[error("malformed data in {file}: {reason}")]
    Malformed { file: String, reason: String },

    #[error("not enough usable points for the fit: {0} (need at least 4)")]
    TooFewPoints(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
