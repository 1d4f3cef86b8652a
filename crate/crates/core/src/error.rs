use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("threshold search failed: {0}")]
    Threshold(String),

    #[error("fixed point did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("numerical breakdown at t = {time}: {reason}")]
    Breakdown { time: f64, reason: String },

    #[error("chunk {chunk}: {source}")]
    Chunk {
        chunk: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
