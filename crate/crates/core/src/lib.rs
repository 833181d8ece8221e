//! Robust Gittins indices for Bernoulli bandits under a data-driven coherent
//! nonlinear expectation.
//!
//! * [`nle`] holds the Beta credible-interval expectation and its composition.
//! * [`index`] tabulates the index surface on a grid.
//! * [`policy`] turns arm posteriors into indices and picks an arm.
//! * [`sim`] benchmarks policies on random scenarios.

pub mod error;
pub mod index;
pub mod nle;
pub mod oracle;
pub mod policy;
pub mod sampling;
pub mod sim;

pub use error::{Error, Result};
