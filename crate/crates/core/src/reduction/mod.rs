//! Reduction of optimization problems over priors to finite-dimensional
//! programs over weighted Dirac masses.

mod class;
mod nested;
mod program;

pub use class::{BandKind, DataBand, PriorClassSpec};
pub use nested::{
    markov_inner_sup, nested_prior_value, reduce_nested, DiscreteSampler, FnSampler, MomentSampler, NestedEstimate,
    PiecewiseUniform, PointMass, UniformBox,
};
pub use program::{
    reduce_positive, reduce_posterior, reduce_prior, Candidate, ColumnValues, ConstraintDescriptor, DataMode,
    Direction, ObjectiveDescriptor, PositiveSpec, PosteriorOptions, ProgramKind, ReducedProgram, VariableDescriptor,
    Witness, WitnessEvaluation,
};
