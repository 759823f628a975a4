//! Kernel-smoothed empirical copulas and the smooth bootstrap.
//!
//! This crate estimates copulas from small samples by smoothing the empirical
//! distribution with a multivariate kernel, and resamples from the smoothed
//! estimate to approximate the sampling distribution of copula functionals
//! (rank correlations, level-set boundaries, diagonal sections).
//!
//! The main pieces:
//!
//! - [`elliptical`]: elliptical distributions described by a characteristic
//!   generator, generator algebra (products, closure defects), and exact
//!   samplers for the Gauss, Student-t, Cauchy, and Laplace families.
//! - [`copulas`]: parametric copula models (Clayton, Gumbel, Joe, Gaussian,
//!   Student-t), their rank-correlation values, and the empirical copula.
//! - [`smoothing`]: multivariate kernel CDF/density estimates with a full
//!   bandwidth matrix, mixture margins, and the smoothed copula.
//! - [`bandwidth`]: Silverman reference bandwidths and cross-validated
//!   bandwidth selection with a Gauss-Hermite weighted objective.
//! - [`bootstrap`]: the smooth bootstrap for copula data, and the plain
//!   bootstrap for comparison.
//! - [`functionals`]: sample Kendall tau and Spearman rho, empirical level-set
//!   boundaries via marching squares, Hausdorff distances, diagonals.
//! - [`distortion`]: how much kernel smoothing distorts an elliptical model,
//!   in characteristic-function terms and in rank correlation.
//! - [`harness`]: config-driven simulation experiments with CSV output.

pub mod bandwidth;
pub mod bootstrap;
pub mod copulas;
pub mod distortion;
pub mod elliptical;
mod error;
pub mod functionals;
pub mod harness;
pub mod linalg;
pub mod quad;
pub mod radial;
pub mod rng;
pub mod sample;
pub mod smoothing;
pub mod special;

pub use error::{Error, Result};
pub use sample::SampleMatrix;

// Matrix types appear throughout the public API; re-export the crate so
// callers build them without pinning their own copy.
pub use nalgebra;
