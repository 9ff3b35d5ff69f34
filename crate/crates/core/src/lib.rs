//! Numerical laboratory for class-conditional linear diffusion models on
//! Gaussian mixtures whose condition embeddings are corrupted by noise.
//!
//! - [`spectral`]: Jacobi eigendecomposition and spectral functions of SPD matrices,
//!   generic over the scalar type.
//! - [`model`]: the mixture, datasets, empirical class statistics, the OU schedule.
//! - [`score`]: closed-form optimal linear denoisers, a normal-equation oracle and
//!   SGD training with embedding perturbation.
//! - [`dynamics`]: Euler integration of the reverse ODE and closed-form generation moments.
//! - [`metrics`]: entropy and 2-Wasserstein comparisons of clean vs corrupted generation.

// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod csvfmt;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod score;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision symmetric matrix used throughout the model code.
pub type SymMatrix = spectral::SymMatrix<f64>;
pub type Matrix = spectral::Matrix<f64>;
pub type Spectrum = spectral::Spectrum<f64>;

pub type SymMatrix32 = spectral::SymMatrix<f32>;
pub type Spectrum32 = spectral::Spectrum<f32>;
