//! Simulation, regularization and estimation for pseudo-diffusions driven by
//! fractional Brownian motion.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs: paths are synthesized from explicit seeds, smoothing
//! convolves the linear interpolant of the path grid exactly, and every
//! asymptotic constant is computed by quadrature at call time.
//!
//! Module map:
//!
//! - [`fbm`]: fBm covariance, exact circulant-embedding synthesis, extended processes.
//! - [`kernel`]: smoothing kernels and the convolution derivatives `X_ε`, `Ẋ_ε`, `Ẍ_ε`.
//! - [`models`]: closed-form and ODE-based pseudo-diffusion trajectories.
//! - [`constants`]: spectral variances, lag correlations, Hermite series and CLT variances.
//! - [`estimators`]: regression estimators of `(H, σ)`, known-`H` estimators, functionals.
//! - [`hypothesis`]: statistics and decisions for tests on `σ` under contiguous alternatives.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod constants;
pub mod error;
pub mod estimators;
pub mod fbm;
pub mod fft;
pub mod hypothesis;
pub mod kernel;
pub mod models;
pub mod quad;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use fbm::{FbmPath, HurstParam, Process};
pub use kernel::{Kernel, SmoothedProcess};
