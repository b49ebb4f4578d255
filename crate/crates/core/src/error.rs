use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("simulation diverged at step {step}")]
    SimulationDiverged { step: usize },

    #[error("online estimator diverged at step {step}")]
    EstimatorDiverged { step: usize },

    #[error("degenerate estimator: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})"
    )]
    NoConvergence {
        iterations: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },

    #[error("window [{start}, {end}] exceeds trajectory horizon {horizon}")]
    WindowOutOfRange { start: f64, end: f64, horizon: f64 },

    #[error("{excluded} of {total} trials excluded, above the 1% cap")]
    ExclusionCap {
        excluded: usize,
        total: usize,
        result: Box<crate::harness::ExperimentResult>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    /// True for failures that stem from bad input rather than the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidParameter(_)
                | Error::InvalidConfig(_)
                | Error::Domain(_)
                | Error::WindowOutOfRange { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
