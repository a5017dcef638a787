use thiserror::Error;

use crate::linalg::TruncatedSvd;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Hankel shape: {0}")]
    Shape(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dense P x Q materialization for a signal of length {len} exceeds the limit {limit}")]
    DenseLimit { len: usize, limit: usize },

    #[error("Lanczos bidiagonalization did not converge after {steps} steps (worst residual {worst_residual:e})")]
    LanczosNoConvergence {
        steps: usize,
        worst_residual: f64,
        /// Best triplets found so far, with their residual norms.
        best: Box<TruncatedSvd>,
        residuals: Vec<f64>,
    },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNoConvergence { iterations: usize, residual: f64 },

    #[error("conjugate gradient met nonpositive curvature {curvature:e}; map is not positive definite")]
    Indefinite { curvature: f64 },

    #[error("reference signal has zero norm")]
    ZeroReference,
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
