use thiserror::Error;

/// Errors raised by the arithmetic, series and group layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("series diverges: {0}")]
    Divergence(String),
    #[error("unsound substitution: {0}")]
    UnsoundSubstitution(String),
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error("variable set mismatch: {0}")]
    VariableMismatch(String),
    #[error("matrix is not in {tag}: {reason}")]
    NotInGroup { tag: String, reason: String },
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("truncation insufficient: {0}")]
    TruncationInsufficient(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
