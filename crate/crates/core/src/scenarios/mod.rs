//! Named reproductions of the worked examples, each reporting computed
//! against expected values.

mod bounds;
mod model_ab;
mod moment_class;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ext_f64;
use crate::solver::SolverConfig;

pub use bounds::{
    band_bound, data_centers, gamma_curve, learning_curve, scenario_coin, scenario_gamma_band, scenario_learning_band, scenario_playdoh,
    scenario_posterior_brittle, scenario_posterior_sweep, scenario_prior_bound, BrittleMode,
};
pub use model_ab::{model_ab_posteriors, scenario_model_ab, ModelAbOptions, ModelAbResult};
pub use moment_class::{scenario_moment_class, IterativeUniform, MomentClassOptions};

/// Tolerance of scenarios that only do arithmetic.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Tolerance of scenarios backed by the solver.
pub const SOLVER_TOL: f64 = 1e-3;
/// Tolerance of scenarios backed by quadrature.
pub const QUADRATURE_TOL: f64 = 5e-3;

/// Largest decrease tolerated in a sequence reported as nondecreasing.
pub const MONOTONE_SLACK: f64 = 1e-6;

/// How a check compares its computed value with the expected one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|computed - expected| ≤ tolerance`
    Near,
    /// `computed ≥ expected - tolerance`
    AtLeast,
}

/// One computed-vs-expected comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    #[serde(with = "ext_f64")]
    pub computed: f64,
    #[serde(with = "ext_f64")]
    pub expected: f64,
    pub kind: CheckKind,
    #[serde(with = "ext_f64")]
    pub abs_error: f64,
    pub tolerance: f64,
    /// Where the expected value comes from: `closed_form`, `oracle`,
    /// `limit` or `property`.
    pub source: String,
    pub pass: bool,
}

impl Check {
    pub fn near(label: impl Into<String>, computed: f64, expected: f64, tolerance: f64, source: &str) -> Self {
        Self::build(label.into(), computed, expected, CheckKind::Near, tolerance, source)
    }

    pub fn at_least(label: impl Into<String>, computed: f64, bound: f64, tolerance: f64, source: &str) -> Self {
        Self::build(label.into(), computed, bound, CheckKind::AtLeast, tolerance, source)
    }

    fn build(label: String, computed: f64, expected: f64, kind: CheckKind, tolerance: f64, source: &str) -> Self {
        let err = match kind {
            CheckKind::Near => (computed - expected).abs(),
            CheckKind::AtLeast => (expected - computed).max(0.0),
        };
        let abs_error = if err.is_nan() { f64::INFINITY } else { err };
        Self { label, computed, expected, kind, abs_error, tolerance, source: source.into(), pass: abs_error <= tolerance }
    }
}

/// Result of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Largest error over the checks.
    #[serde(with = "ext_f64")]
    pub abs_error: f64,
    pub pass: bool,
    /// Milliseconds; excluded from comparisons of repeated runs.
    pub wall_time_ms: f64,
    /// Witnesses and diagnostics.
    pub details: serde_json::Value,
}

impl ScenarioReport {
    pub fn new(name: &str, parameters: &[(&str, f64)], checks: Vec<Check>, details: serde_json::Value) -> Self {
        let abs_error = checks.iter().map(|c| c.abs_error).fold(0.0, f64::max);
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self {
            name: name.into(),
            parameters: parameters.iter().map(|(k, v)| ((*k).to_string(), *v)).collect(),
            checks,
            abs_error,
            pass,
            wall_time_ms: 0.0,
            details,
        }
    }

    pub fn check(&self, label: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.label == label)
    }

    pub(crate) fn timed(mut self, start: Instant) -> Self {
        self.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        self
    }
}

/// Shared knobs of scenario runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOptions {
    pub seed: u64,
    pub restarts: usize,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self { seed: 0, restarts: 8 }
    }
}

impl ScenarioOptions {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig::default().with_seed(self.seed).with_restarts(self.restarts)
    }
}

/// Names accepted by [`run_scenario`], in suite order.
pub const SCENARIOS: &[&str] = &[
    "coin",
    "playdoh",
    "prior_bound",
    "posterior_brittle",
    "posterior_sweep",
    "learning_curve",
    "gamma_curve",
    "model_ab",
    "moment_class",
];

/// Runs a scenario with its default parameters.
pub fn run_scenario(name: &str, opts: &ScenarioOptions) -> Result<ScenarioReport> {
    let cfg = opts.solver();
    match name {
        "coin" => scenario_coin(),
        "playdoh" => scenario_playdoh(0.3, 0.6, &cfg),
        "prior_bound" => scenario_prior_bound(0.25, 0.5, &cfg),
        "posterior_brittle" => scenario_posterior_brittle(0.375, 0.75, 3, BrittleMode::Limit, &cfg),
        "posterior_sweep" => scenario_posterior_sweep(0.375, 0.75, 3, &[0.1, 0.01, 0.001], &cfg),
        "learning_curve" => scenario_learning_band(&[1.0, 2.0, 10.0], 0.75, 0.375, 2, &cfg),
        "gamma_curve" => scenario_gamma_band(&[1.0, 1.5, 2.0], 2, &cfg),
        "model_ab" => scenario_model_ab(&ModelAbOptions::default()),
        "moment_class" => {
            scenario_moment_class(&MomentClassOptions { k: 2, n: 5, seed: opts.seed, ..MomentClassOptions::default() })
        }
        other => Err(Error::UnknownScenario(other.into())),
    }
}

/// Runs the scenarios whose names contain `filter` (all when `None`), in
/// suite order.
pub fn run_all(filter: Option<&str>, opts: &ScenarioOptions) -> Result<Vec<ScenarioReport>> {
    let names: Vec<&str> = SCENARIOS.iter().copied().filter(|n| filter.is_none_or(|f| n.contains(f))).collect();
    if names.is_empty() {
        return Err(Error::UnknownScenario(filter.unwrap_or_default().into()));
    }
    names.into_iter().map(|n| run_scenario(n, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_scenario() {
        assert!(matches!(run_scenario("nope", &ScenarioOptions::default()), Err(Error::UnknownScenario(_))));
        assert!(matches!(run_all(Some("zzz"), &ScenarioOptions::default()), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn check_semantics() {
        assert!(Check::near("x", 0.5, 0.5004, 1e-3, "oracle").pass);
        assert!(!Check::near("x", 0.5, 0.502, 1e-3, "oracle").pass);
        assert!(Check::at_least("x", 0.97, 0.95, 0.0, "property").pass);
        let nan = Check::near("x", f64::NAN, 0.5, 1e-3, "oracle");
        assert!(!nan.pass && nan.abs_error.is_infinite());
        let r = ScenarioReport::new("t", &[], vec![Check::near("a", 1.0, 1.0, 0.0, "closed_form")], serde_json::Value::Null);
        assert!(r.pass);
        assert!(!ScenarioReport::new("t", &[], vec![], serde_json::Value::Null).pass);
    }
}
