//! Simulation and drift-parameter estimation for McKean–Vlasov type
//! interacting particle systems.
//!
//! * [`models`]: drift families `B(θ, x, μ)` and their θ-gradients
//! * [`simulate`]: Euler–Maruyama particle simulation, coupled runs
//! * [`offline`]: log-likelihood, numeric and closed-form MLE, Fisher information
//! * [`online`]: continuous-time stochastic gradient ascent
//! * [`surface`]: asymptotic likelihood surfaces of the linear model
//! * [`harness`]: Monte-Carlo experiments, rate fits, result export
//! * [`io`]: trajectory and table file formats

pub mod error;
pub mod harness;
pub mod io;
pub mod models;
pub mod offline;
pub mod online;
pub mod rng;
pub mod simulate;
pub mod surface;

pub use error::{Error, Result};
pub use models::{EmpiricalMeasure, ModelKind, ModelSpec, Reduction, Theta};
pub use harness::{ExperimentConfig, ExperimentResult};
pub use online::{EstimatorState, LearningRate};
pub use simulate::{InitialCondition, SimConfig, TrajectoryBatch};
