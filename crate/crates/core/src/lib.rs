//! Surrogate-accelerated Bayesian calibration of a toy land surface model.
//!
//! The pipeline runs the forward model over a Latin hypercube ensemble of
//! scaled parameters, fits a Matérn Gaussian-process surrogate of the
//! simulation-observation cost, samples the parameter posterior with
//! Metropolis-Hastings on the surrogate, and reports sensitivity and
//! equifinality diagnostics.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the pipeline uses.

pub mod cli;
pub mod diagnostics;
pub mod ecohydro;
pub mod ensemble;
pub mod error;
pub mod kvfile;
pub mod mcmc;
pub mod param_space;
pub mod rtm;
pub mod scalar;
pub mod surrogate;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Scaled = param_space::ScaledParams<f64>;
pub type Physical = param_space::PhysicalParams<f64>;
pub type Ranges = param_space::ParamRanges<f64>;
pub type State = ecohydro::ModelState<f64>;
pub type Model = ecohydro::ToyModel<f64>;
pub type Forcing = ecohydro::ForcingSeries<f64>;
pub type Observations = rtm::ObservationSeries<f64>;
pub type Dataset = ensemble::EnsembleDataset<f64>;
pub type Surrogate = surrogate::GpSurrogate<f64>;
pub type Chain = mcmc::Chain<f64>;
pub type Histogram = diagnostics::Histogram<f64>;
