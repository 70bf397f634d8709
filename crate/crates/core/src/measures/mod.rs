//! Core value types: measures, moment maps, quantities of interest and
//! observations.

mod density;
mod discrete;
mod functions;
mod moment;
mod observation;
mod qoi;
mod support;

pub use density::Density;
pub use discrete::{measure_mass, DiscreteMeasure, POINT_TOL, RENORMALIZE_DRIFT};
pub use functions::{AtomFn, MeasureFn};
pub use moment::{ConstraintSpec, Interval, MomentFn, MomentMap};
pub use observation::{data_probability, data_probability_limit, BallMass, Observation};
pub use qoi::{evaluate_qoi, QuantityOfInterest};
pub use support::{IntervalSet, Support};
