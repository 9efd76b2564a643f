//! Maximum score estimation for binary choice models, with classical,
//! m-out-of-n and smoothed bootstrap inference and a simulator for the
//! cube-root limit law.
//!
//! The estimation core is generic over the scalar type (`f32` or `f64`);
//! the limit-law simulator and the experiment harness work in `f64`.

pub mod bootstrap;
pub mod error;
pub mod harness;
pub mod io;
pub mod limit;
pub mod model;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod smoothing;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Dataset64 = model::Dataset<f64>;
pub type Dataset32 = model::Dataset<f32>;
pub type SphereVector64 = model::SphereVector<f64>;
pub type SphereVector32 = model::SphereVector<f32>;
pub type DgpSpec64 = model::DgpSpec<f64>;
pub type DgpSpec32 = model::DgpSpec<f32>;
pub type DensityModel64 = smoothing::DensityModel<f64>;
pub type RegressionModel64 = smoothing::RegressionModel<f64>;
pub type BootstrapDistribution64 = bootstrap::BootstrapDistribution<f64>;
pub type ConfidenceInterval64 = bootstrap::ConfidenceInterval<f64>;
