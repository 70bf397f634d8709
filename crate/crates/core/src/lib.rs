//! Optimal bounds on prior and posterior values of quantities of interest
//! over classes of priors, computed through finite reductions to weighted
//! Dirac masses.

pub mod error;
pub mod measures;
pub mod numeric;
pub mod posterior;
pub mod reduction;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
