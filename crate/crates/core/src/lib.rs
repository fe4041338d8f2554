//! Optimal-transport criterion for unsupervised denoising at desk scale.
//!
//! The crate pairs exact discrete optimal-transport solvers with brute-force
//! checks of the relaxed/constrained equivalence, a noise synthesis toolkit,
//! a toy encoder-decoder denoiser trained on the relaxed transport objective,
//! baselines and metrics, and an experiment harness.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the `f64` instantiation used by the harness.

pub mod baselines;
pub mod datasets;
pub mod denoiser;
pub mod error;
pub mod harness;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod ot;
pub mod rng;
pub mod scalar;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Measure = ot::EmpiricalMeasure<f64>;
pub type Cost = ot::CostSpec<f64>;
pub type Plan = ot::Coupling<f64>;
pub type Patch = image::ImagePatch<f64>;
pub type Params = denoiser::DenoiserParams<f64>;
