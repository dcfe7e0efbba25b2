//! Probabilistic controlled invariant sets for Markov controlled processes.

pub mod discretize;
pub mod error;
pub mod examples;
pub mod finite_horizon;
pub mod infinite_horizon;
pub mod model;
pub mod output;
pub mod sim;
pub mod solver;

pub use error::{PcisError, Result};
