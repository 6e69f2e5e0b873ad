//! Rank-based linear wavelet estimation of copula densities.

pub mod checks;
pub mod config;
pub mod copula;
pub mod error;
pub mod estimator;
pub mod gof;
pub mod harness;
pub mod kernel;
pub mod quad;
pub mod rng;
pub mod wavelet;

pub use error::{Error, Result};
