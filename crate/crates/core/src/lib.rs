//! Incremental methods for finite-sum weakly convex problems
//! `min (1/m) Σ f_i(x)`: subgradient (IGD), proximal point (IPP) and
//! prox-linear (IPL) iterations with constant or geometrically decaying
//! stepsizes, synthetic robust-recovery instances, a Moreau-envelope
//! stationarity estimator and an experiment harness.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common instantiations.

pub mod config;
pub mod error;
pub mod harness;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod scalar;
pub mod solvers;
pub mod stationarity;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Instance64 = instances::Instance<f64>;
pub type Instance32 = instances::Instance<f32>;
pub type RmsInstance64 = instances::RmsInstance<f64>;
pub type RmsInstance32 = instances::RmsInstance<f32>;
pub type RprInstance64 = instances::RprInstance<f64>;
pub type RprInstance32 = instances::RprInstance<f32>;
pub type BdInstance64 = instances::BdInstance<f64>;
pub type BdInstance32 = instances::BdInstance<f32>;
pub type RpcaInstance64 = instances::RpcaInstance<f64>;
pub type RpcaInstance32 = instances::RpcaInstance<f32>;
pub type RunTrace64 = solvers::RunTrace<f64>;
pub type RunTrace32 = solvers::RunTrace<f32>;
pub type StepSchedule64 = solvers::StepSchedule<f64>;
pub type StepSchedule32 = solvers::StepSchedule<f32>;
pub type MoreauEstimate64 = stationarity::MoreauEstimate<f64>;
pub type MoreauEstimate32 = stationarity::MoreauEstimate<f32>;
