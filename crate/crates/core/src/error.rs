use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: bad dimensions, bad prices, bad priors and the like.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("theta {theta} outside support [{lo}, {hi}] of level {level}")]
    Domain {
        theta: f64,
        level: usize,
        lo: f64,
        hi: f64,
    },

    #[error("density vanishes at theta {theta} (level {level})")]
    SingularDensity { theta: f64, level: usize },

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    /// A served consumer whose threshold cannot be inverted.
    #[error("inconsistent trace: {0}")]
    InconsistentTrace(String),

    #[error("allocation is not monotone in the report: {0}")]
    MonotonicityViolation(String),

    /// A broken internal invariant, never a user error.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
