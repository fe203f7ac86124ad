use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain mismatch: {left} vs {right} buckets")]
    DomainMismatch { left: usize, right: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("measure is not normalized: total mass {total} differs from 1 by more than {tolerance:e}")]
    NotNormalized { total: f64, tolerance: f64 },

    #[error("invalid mass {value} at bucket {index}")]
    InvalidMass { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample size overflow: computed bound {value} does not fit a u64")]
    SampleSizeOverflow { value: f64 },

    #[error("miscalibrated constants: {0}")]
    Miscalibrated(String),

    #[error("sample source exhausted after {drawn} draws")]
    SourceExhausted { drawn: usize },

    #[error("sample {value} outside domain of size {size}")]
    OutOfDomain { value: usize, size: usize },

    #[error("truncation at {max_state} is inadequate: row {row} sums to {sum}")]
    TruncationInadequate { max_state: usize, row: usize, sum: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
