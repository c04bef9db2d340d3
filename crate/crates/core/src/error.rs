use thiserror::Error;

/// Errors raised by kernels, samplers, statistics and discriminators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A process parameter violates its admissible range. The message names the constraint.
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("one-sided derivative jump diverges at t = {t}")]
    DivergentJump { t: f64 },

    #[error("covariance matrix is not positive definite after jitter {jitter:e} (pivot {pivot})")]
    NotPositiveDefinite { jitter: f64, pivot: usize },

    #[error("circulant embedding has negative eigenvalue {min:e} (max {max:e})")]
    EmbeddingNotNonnegative { min: f64, max: f64 },

    #[error("index error: {0}")]
    Index(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("hypotheses indistinguishable: {0}")]
    HypothesesIndistinguishable(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::ParameterOutOfRange(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DivergentJump { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::EmbeddingNotNonnegative { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
