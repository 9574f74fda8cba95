use thiserror::Error;

/// Failures surfaced by the samplers and series evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violates the documented precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A series could not reach the requested tolerance within the term cap.
    #[error("truncation error: {what} reached {terms} terms with error bound {bound:e} > tol {tol:e}")]
    Truncation {
        what: &'static str,
        terms: usize,
        bound: f64,
        tol: f64,
    },

    /// An invariant that should hold with probability one was violated.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Short machine-parsable category tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Truncation { .. } => "truncation",
            Error::Internal(_) => "internal",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Parameter(msg()))
    }
}
