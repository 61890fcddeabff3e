//! Personalized principal component analysis.
//!
//! Decouples principal components shared by every client (global, `U`) from
//! components unique to each client (local, `V_(i)`), using a round-based
//! federated Stiefel gradient method with a correction step that keeps
//! `UᵀV_(i) = 0`. Also provides the one-shot baselines, a planted-subspace
//! data generator, and evaluation metrics.
//!
//! All numerical code is generic over [`Real`] (`f32`, `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod baselines;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod scenarios;
pub mod solver;
pub mod stiefel;
pub mod synth;
pub mod verify;

pub use error::{PerPcaError, Result};
pub use scalar::{Real, Tolerances};

pub type Frame = stiefel::OrthonormalFrame<f64>;
pub type Frame32 = stiefel::OrthonormalFrame<f32>;
pub type State = model::ComponentState<f64>;
pub type State32 = model::ComponentState<f32>;
pub type Covariance = model::CovarianceMatrix<f64>;
pub type Covariance32 = model::CovarianceMatrix<f32>;
pub type Dataset = model::ClientDataset<f64>;
pub type Dataset32 = model::ClientDataset<f32>;
pub type Config = solver::SolverConfig<f64>;
pub type Trace = solver::RoundTrace<f64>;
pub type Truth = model::GroundTruth<f64>;
