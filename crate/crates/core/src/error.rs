use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("measurement matrix has operator norm {norm:.12} > 1")]
    OperatorNorm { norm: f64 },

    #[error("score requested for an unsmoothed (atomic) distribution")]
    Unsmoothed,

    #[error("seed dimension {d} too large for exhaustive enumeration (max {max})")]
    TooLarge { d: usize, max: usize },

    #[error("no interval satisfies the score threshold in the requested range")]
    NoGoodInterval,

    #[error("non-finite score at t = {t}")]
    NonFiniteScore { t: f64 },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("table is not normalized (sum = {sum})")]
    Unnormalized { sum: f64 },

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
