//! Conditioning, optimal posterior bounds, bound sandwiches and
//! brittleness checks.

mod bounds;
mod brittle;
mod conditioning;

pub use bounds::{
    info_bound_sandwich, posterior_lower_bound, posterior_upper_bound, BoundSandwich, BALL_MASS_FLOOR, ORDER_TOL,
};
pub use brittle::{brittleness_verdict, essential_sup_bound, BrittlenessVerdict, EssentialSup, VerdictOptions, DATA_FLOOR};
pub use conditioning::{conditional_expectation, conditional_expectation_in, conditional_expectation_of_values, DiscretePrior, Model};
