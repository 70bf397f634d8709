use std::fmt;
use std::sync::Arc;

use super::discrete::DiscreteMeasure;

/// Named real function of one variable, with optional breakpoints where it
/// may be discontinuous. Breakpoints seed the solver grids.
#[derive(Clone)]
pub struct AtomFn {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breakpoints: Vec<f64>,
}

impl AtomFn {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f), breakpoints: Vec::new() }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for AtomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AtomFn({})", self.name)
    }
}

/// Named functional of a discrete measure.
#[derive(Clone)]
pub struct MeasureFn {
    name: String,
    f: Arc<dyn Fn(&DiscreteMeasure) -> f64 + Send + Sync>,
}

impl MeasureFn {
    pub fn new(name: impl Into<String>, f: impl Fn(&DiscreteMeasure) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, mu: &DiscreteMeasure) -> f64 {
        (self.f)(mu)
    }
}

impl fmt::Debug for MeasureFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MeasureFn({})", self.name)
    }
}
