use thiserror::Error;

/// Errors produced by tableau construction, problem evaluation and integration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HbvmError {
    #[error("invalid method parameters: {0}")]
    InvalidMethod(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Newton iteration for Lobatto node {index} of the {npoints}-point rule did not converge")]
    RootFinding { index: usize, npoints: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("state outside the domain of the Hamiltonian: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("stage solver did not converge after {iterations} iterations (last increment {increment:.3e})")]
    NoConvergence { iterations: usize, increment: f64 },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<HbvmError>,
    },

    #[error("horizon {t_end} is not an integer multiple of the step size {h}")]
    GridMismatch { t_end: f64, h: f64 },

    #[error("unknown problem '{0}' (expected one of fhp, fpu, biot, harmonic)")]
    UnknownProblem(String),

    #[error("malformed tableau record: {0}")]
    Parse(String),
}

impl HbvmError {
    /// True when the error originates from the nonlinear stage solver.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            HbvmError::NoConvergence { .. } | HbvmError::Domain(_) => true,
            HbvmError::StepFailed { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, HbvmError>;
