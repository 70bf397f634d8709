//! Problem configuration files and sweep descriptors.

use std::path::Path;

use brittle_bayes::measures::{Observation, QuantityOfInterest};
use brittle_bayes::posterior::{DiscretePrior, VerdictOptions};
use brittle_bayes::reduction::{PosteriorOptions, PriorClassSpec};
use brittle_bayes::scenarios::ModelAbOptions;
use brittle_bayes::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Contents of a `--spec` file. Which fields are required depends on the
/// command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub spec: Option<PriorClassSpec>,
    #[serde(default)]
    pub qoi: Option<QuantityOfInterest>,
    #[serde(default)]
    pub observation: Option<Observation>,
    /// Finite prior over models, for exact conditioning.
    #[serde(default)]
    pub prior: Option<DiscretePrior>,
    /// Value of the quantity of interest on each model of `prior`.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub posterior: PosteriorOptions,
    #[serde(default)]
    pub sandwich: SandwichConfig,
    #[serde(default)]
    pub verdict: VerdictOptions,
    #[serde(default)]
    pub sampler: Option<SamplerConfig>,
    #[serde(default)]
    pub curve: CurveConfig,
    #[serde(default)]
    pub perturb: ModelAbOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            spec: None,
            qoi: None,
            observation: None,
            prior: None,
            values: None,
            solver: SolverConfig::default(),
            posterior: PosteriorOptions::default(),
            sandwich: SandwichConfig::default(),
            verdict: VerdictOptions::default(),
            sampler: None,
            curve: CurveConfig::default(),
            perturb: ModelAbOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandwichConfig {
    pub grid_points: usize,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        Self { grid_points: 101 }
    }
}

/// Distribution of moment vectors for the brittleness verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    /// Conditionally uniform moments of a power moment map.
    IterativeUniform { grid_points: Option<usize> },
    Discrete { points: Vec<Vec<f64>>, probs: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Learning,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    pub kind: CurveKind,
    pub a: f64,
    pub m: f64,
    pub n: usize,
    /// `α` or `γ` values.
    pub values: Vec<f64>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { kind: CurveKind::Learning, a: 0.75, m: 0.375, n: 2, values: vec![1.0, 2.0, 10.0] }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Config(inner.to_string())
            } else {
                CliError::Config(format!("field `{path}`: {inner}"))
            }
        })?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "field `version`: unsupported config version {}, expected {CONFIG_VERSION}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn require_spec(&self) -> Result<&PriorClassSpec, CliError> {
        self.spec.as_ref().ok_or_else(|| missing("spec"))
    }

    pub fn require_qoi(&self) -> Result<&QuantityOfInterest, CliError> {
        self.qoi.as_ref().ok_or_else(|| missing("qoi"))
    }
}

fn missing(field: &str) -> CliError {
    CliError::Config(format!("field `{field}` is required by this command"))
}

/// `NAME=V1,V2,…`
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (name, rest) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("sweep {s:?} is not of the form NAME=V1,V2,...")))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(CliError::Config(format!("sweep {s:?} has no parameter name")));
        }
        let mut values = Vec::new();
        for v in rest.split(',') {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("sweep {name}: {v:?} is not a number")))?;
            if !x.is_finite() {
                return Err(CliError::Config(format!("sweep {name}: value {v} is not finite")));
            }
            values.push(x);
        }
        Ok(Self { name: name.to_string(), values })
    }
}

/// Cartesian product of the sweeps, first sweep slowest.
pub fn sweep_points(sweeps: &[Sweep]) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![Vec::new()];
    for s in sweeps {
        let mut next = Vec::with_capacity(points.len() * s.values.len());
        for p in &points {
            for &v in &s.values {
                let mut q: Vec<(String, f64)> = p.clone();
                q.push((s.name.clone(), v));
                next.push(q);
            }
        }
        points = next;
    }
    points
}

pub fn point_label(point: &[(String, f64)]) -> String {
    point.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(";")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s = Sweep::parse("alpha=1,2, 10").unwrap();
        assert_eq!(s.name, "alpha");
        assert_eq!(s.values, vec![1.0, 2.0, 10.0]);
        assert!(Sweep::parse("alpha").is_err());
        assert!(Sweep::parse("alpha=").is_err());
        assert!(Sweep::parse("alpha=1,inf").is_err());
        assert!(Sweep::parse("=1").is_err());
    }

    #[test]
    fn cartesian_points_keep_input_order() {
        let pts = sweep_points(&[Sweep::parse("a=1,2").unwrap(), Sweep::parse("b=3,4").unwrap()]);
        let labels: Vec<String> = pts.iter().map(|p| point_label(p)).collect();
        assert_eq!(labels, vec!["a=1;b=3", "a=1;b=4", "a=2;b=3", "a=2;b=4"]);
        assert_eq!(sweep_points(&[]), vec![Vec::<(String, f64)>::new()]);
    }

    #[test]
    fn config_rejects_unknown_fields_and_versions() {
        let e = RunConfig::parse(r#"{"version": 1, "solver": {"restart": 3}}"#).unwrap_err();
        assert!(e.to_string().contains("solver"), "{e}");
        let e = RunConfig::parse(r#"{"version": 2}"#).unwrap_err();
        assert!(e.to_string().contains("version"), "{e}");
        let e = RunConfig::parse(r#"{"qoi": {"kind": "mean"}}"#).unwrap_err();
        assert!(e.to_string().contains("version"), "{e}");
        let e = RunConfig::parse("{\"version\": 1,\n \"qoi\": {\"kind\": \"tial\"}}").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(RunConfig::parse(r#"{"version": 1}"#).is_ok());
    }
}
