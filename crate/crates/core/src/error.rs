use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("requires nested path: {0}")]
    RequiresNestedPath(String),
    #[error("void constraint set: {0}")]
    VoidConstraintSet(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("conditioning on null event")]
    NullEvent,
    #[error("sampler leaves moment body: {rejected} of {total} samples rejected")]
    SamplerLeavesBody { rejected: usize, total: usize },
    #[error("grid too coarse: {rejected} of {total} samples rejected")]
    GridTooCoarse { rejected: usize, total: usize },
    #[error("bracket too small: value at upper end is {value:e} > 0")]
    BracketTooSmall { value: f64 },
    #[error("program is unbounded")]
    Unbounded,
    #[error("unknown scenario: {0}")]
    UnknownScenario(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
