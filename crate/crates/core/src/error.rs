use crate::mode::ModeIndex;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too coarse: {0}")]
    BelowNyquist(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("field validation failed: {0}")]
    InvalidField(String),

    #[error("mode set is not closed under negation: {0} present but its negative is missing")]
    NotNegationClosed(ModeIndex),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sparse LU factorization failed at shift {shift_re}{shift_im:+}i: {reason}")]
    Factorization {
        shift_re: f64,
        shift_im: f64,
        reason: String,
    },

    #[error("coherent set at t = 0 is empty")]
    EmptyCoherentSet,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
