//! Robust Gaussian process regression by iterative trimming.
//!
//! The crate is organised bottom-up:
//!
//! - [`stats`]: χ² distribution functions, the trimming consistency factor,
//!   residual selection and error metrics.
//! - [`kernels`]: squared-exponential and Matérn-3/2 kernels (each with a
//!   white-noise term), covariance assembly and analytic gradients.
//! - [`optimize`]: projected BFGS with backtracking and seeded restarts.
//! - [`gp`]: exact GP regression (marginal likelihood, fitting, prediction).
//! - [`itgp`]: the iterative trimming procedure built on top of [`gp`].
//! - [`datasets`]: seeded synthetic benchmark generators and CSV I/O.
//! - [`benchmark`]: the replicate harness comparing GP, ITGP and the ideal fit.

pub mod benchmark;
pub mod datasets;
mod error;
pub mod gp;
pub mod itgp;
pub mod kernels;
pub mod optimize;
pub mod stats;

pub use datasets::Dataset;
pub use error::{Error, Result};
pub use gp::{Prediction, TrainedGp};
pub use itgp::{ItgpConfig, ItgpResult};
pub use kernels::{KernelParams, KernelSpec};
pub use optimize::OptimizerConfig;
