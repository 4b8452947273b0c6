use thiserror::Error;

use crate::samplers::RatioConfiguration;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Bracket expansion or bisection for the numeric inverse tail ran out of iterations.
    #[error("inverse tail failed to converge for y={y} after {iterations} iterations (last bracket [{lo}, {hi}])")]
    Inversion {
        y: f64,
        lo: f64,
        hi: f64,
        iterations: usize,
    },

    /// The point cap was reached before the ratio dropped below epsilon.
    #[error("ratio configuration truncated at {cap} points before crossing epsilon={epsilon}")]
    Truncated {
        cap: usize,
        epsilon: f64,
        partial: Box<RatioConfiguration>,
    },

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// Empirical evidence matched none of the three tail regimes.
    #[error("ambiguous tail classification: {0}")]
    Classification(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
