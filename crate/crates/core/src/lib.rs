//! Stable CARMA processes: simulation, sampled spectra and parameter
//! estimation from equidistant observations.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arma;
pub mod carma_model;
pub mod error;
pub mod garcia_estimator;
pub mod io;
pub mod kalman_transfer;
pub mod limit_diagnostics;
pub mod linalg;
pub mod mc_harness;
pub mod optimize;
pub mod pathsim;
pub mod quadrature;
pub mod spectral;
pub mod stable_levy;
pub mod whittle_estimator;

pub use error::{Error, Result};
