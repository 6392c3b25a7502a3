use std::path::PathBuf;

use crate::propagate::FidelityTrace;

/// Errors produced anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("malformed input {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    /// The step budget ran out. The trace up to the last accepted step is kept.
    #[error("integration failed after {} accepted steps: {reason}", partial.steps_accepted)]
    IntegrationFailure {
        reason: String,
        partial: Box<FidelityTrace>,
    },

    #[error("step size {step:e} at t = {t:e} fell below the minimum; problem too stiff for the explicit integrator")]
    Stiffness { t: f64, step: f64 },

    #[error("fidelity stayed above {target} up to the horizon t = {horizon:e} (last value {last_fidelity})")]
    NoCrossing {
        target: f64,
        horizon: f64,
        last_fidelity: f64,
    },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("root finder failed: {0}")]
    Solver(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
