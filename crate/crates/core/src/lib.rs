//! Truncated realized variance estimators for jump diffusions with
//! (tempered) stable jumps, their leading-order jump bias corrections, and a
//! reproducible Monte Carlo harness.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod levy_sim;
pub mod quadrature;
pub mod rng;
pub mod stable_analytics;

pub use error::{Error, Result};
