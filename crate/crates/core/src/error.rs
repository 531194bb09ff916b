use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{routine} failed to converge after {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("point {z} lies within {distance:e} of an eigenvalue")]
    NearEigenvalue { z: Complex64, distance: f64 },

    #[error("truncated variance {variance} is not positive")]
    DegenerateTruncation { variance: f64 },

    #[error("kernel pole: |(z conj(w))^m - 1| = {distance:e}")]
    KernelPole { distance: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("experiment aborted: {failures} of {trials} trials failed ({first})")]
    ExperimentAborted {
        failures: usize,
        trials: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
