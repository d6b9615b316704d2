use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by problem oracles, solvers and the verifier.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("component index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("rank-one update denominator {0:e} is below threshold")]
    SingularUpdate(f64),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("all sample points coincide")]
    DegenerateSamples,
    #[error("reference optimum is inconsistent: f(w) - f* = {0:e}")]
    BadReference(f64),
    #[error("subset enumeration over C({n}, {tau}) exceeds budget {budget}")]
    EnumerationBudget { n: usize, tau: usize, budget: u64 },
    #[error("reference solve failed (best gradient norm {grad_norm:e})")]
    ReferenceFailed { best: Vec<f64>, grad_norm: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
