//! Mixed linear fractional stable motions: simulation, spectral moments,
//! estimating-equation inference and a Monte Carlo lab for the asymptotic
//! theory of the estimators.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod lab;
pub mod lfsm;
pub mod quad;
pub mod spectral;
pub mod stable;
pub mod stats;

pub use error::{Error, Result};
