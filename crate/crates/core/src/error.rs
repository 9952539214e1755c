use thiserror::Error;

/// Errors raised by the samplers, estimators and special functions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("stick-breaking residual still above {eps} after {cap} sticks")]
    StickRunaway { eps: f64, cap: usize },

    #[error("degenerate stick law: E[(1-B)^{p}] = 1")]
    DegenerateSticks { p: usize },

    #[error("generalized stick law has no conjugate posterior update")]
    NonConjugate,

    #[error("quantile Q(y) is not integrable under base {0}")]
    NotIntegrable(String),

    #[error("no observations inside the kernel window at x = {x}")]
    EmptyWindow { x: f64 },

    #[error("prior precision and information weight are both zero at x = {x}")]
    ZeroPrecision { x: f64 },

    #[error("no closed-form Laplace transform for jump law {0}")]
    UnsupportedJumpLaw(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("numerical collapse: {0}")]
    Collapse(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
