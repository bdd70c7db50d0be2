//! Monte Carlo methods for noisy and costly target densities.
//!
//! The crate is organized around a [`NoisyOracle`](density::NoisyOracle):
//! something that, given a parameter vector, returns a random realization
//! whose expectation is the mean function the samplers end up targeting.
//! Samplers spend a fixed budget of oracle calls and may lean on a
//! k-nearest-neighbor surrogate built from everything evaluated so far.
//!
//! Modules:
//! - [`density`]: bounded targets, noise models and their mean functions.
//! - [`surrogate`]: design sets and the kNN regression surrogate.
//! - [`samplers`]: noisy MH, noisy IS, MH-S, DA-PM-MH and N-DIS.
//! - [`abc`]: the ABC noisy evaluator and its oracle adapter.
//! - [`cartpole`]: the double cart-pole environment and return oracle.
//! - [`diagnostics`]: moment estimators, tensor quadrature and error metrics.

pub mod abc;
pub mod cartpole;
pub mod density;
pub mod diagnostics;
mod error;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod surrogate;

pub use error::{Error, Result};

/// A parameter vector θ.
pub type Point = Vec<f64>;
