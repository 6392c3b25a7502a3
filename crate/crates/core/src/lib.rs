//! Lifetime analysis of quantum states stored in qubit registers and qudit
//! memories under amplitude damping and dephasing.

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod expm;
pub mod noise;
pub mod numeric;
pub mod propagate;
pub mod states;

pub use error::{Error, Result};
pub use noise::{CollapseChannel, DensityMatrix, Lindbladian, NoiseModel, OperatorSpec, Rates};
pub use propagate::{CrossingResult, FidelityTrace, IntegratorConfig, TraceSample};
pub use states::{Layout, StateVector};
