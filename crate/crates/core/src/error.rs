use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("line search failed: step length fell below {floor:e}")]
    LineSearch { floor: f64 },

    #[error("oracle did not reach tolerance within {cycles} cycles (violation {violation:.3e})")]
    Oracle { cycles: usize, violation: f64 },

    #[error("sinkhorn iteration became unstable at iteration {iteration}: {reason}")]
    SinkhornUnstable { iteration: usize, reason: String },

    #[error("solver did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a solver failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_) | Error::InvalidInput(_) | Error::Domain(_) | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
