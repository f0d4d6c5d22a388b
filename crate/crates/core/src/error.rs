//! Error type shared by all solvers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Iterative solver ran out of iterations; carries the last residual
    /// (or iterate-change) observed.
    #[error("{method} did not converge within {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A structural hypothesis (monotone iterates, sub/supersolution
    /// ordering, complementarity of a stored solution) failed beyond the
    /// hard tolerance.
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    /// Cone extraction was handed a solution whose stored multipliers no
    /// longer satisfy complementarity.
    #[error("stale solution: {0}")]
    StaleSolution(String),

    /// A per-time-step failure inside a parabolic sweep.
    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<SolverError>,
    },
}

impl SolverError {
    pub fn at_step(self, step: usize) -> SolverError {
        SolverError::StepFailed {
            step,
            source: Box::new(self),
        }
    }
}
