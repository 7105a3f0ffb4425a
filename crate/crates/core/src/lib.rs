//! Discrete bouncy particle sampler: a Metropolis kernel that moves with a
//! persistent velocity and, on rejection, attempts a delayed-rejection
//! bounce off the level sets of the target.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod sampler;
pub mod targets;

pub use error::{Error, Result};
