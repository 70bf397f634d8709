use std::time::Instant;

use serde_json::json;

use super::{Check, ScenarioReport, CLOSED_FORM_TOL, MONOTONE_SLACK, SOLVER_TOL};
use crate::error::{Error, Result};
use crate::measures::{
    AtomFn, ConstraintSpec, DiscreteMeasure, MeasureFn, MomentMap, Observation, QuantityOfInterest, Support,
};
use crate::posterior::{conditional_expectation, posterior_upper_bound, DiscretePrior, Model};
use crate::reduction::{
    markov_inner_sup, nested_prior_value, reduce_nested, reduce_prior, DataBand, DataMode, Direction, PointMass,
    PosteriorOptions, PriorClassSpec,
};
use crate::solver::{grid, solve, SolveResult, SolverConfig};

/// Tolerance of the coin arithmetic.
const COIN_TOL: f64 = 1e-12;

fn mean_class(q: f64) -> Result<PriorClassSpec> {
    PriorClassSpec::new(MomentMap::powers(Support::unit(), 1), ConstraintSpec::equalities(&[q])?, None)
}

/// `n` distinct data points below `0.65`.
pub fn data_centers(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.05 + 0.6 * (i as f64 + 0.5) / n as f64).collect()
}

fn witness_json(r: &SolveResult) -> serde_json::Value {
    serde_json::to_value(r).unwrap_or(serde_json::Value::Null)
}

fn coin_posterior(n_coins: usize, heads: usize) -> Result<f64> {
    let s = Support::unit();
    let unfair: Model = DiscreteMeasure::dirac(s, 1.0)?.into();
    let fair: Model = DiscreteMeasure::new(s, vec![0.0, 1.0], vec![0.5, 0.5])?.into();
    let is_unfair = QuantityOfInterest::custom(
        MeasureFn::new("unfair", |m| f64::from(m.point_mass(1.0) == 1.0)),
        Some(0.0),
        Some(1.0),
    )?;
    let k = n_coins as f64;
    let prior = if n_coins == 1 {
        DiscretePrior::dirac(unfair)
    } else {
        DiscretePrior::new(vec![unfair, fair], vec![1.0 / k, (k - 1.0) / k])?
    };
    let obs = Observation::new(s, vec![1.0; heads], 0.5)?;
    conditional_expectation(&prior, &is_unfair, &obs)
}

/// One unfair coin among 102, ten heads observed.
pub fn scenario_coin() -> Result<ScenarioReport> {
    let t = Instant::now();
    let exact = coin_posterior(102, 10)?;
    let perturbed = coin_posterior(100, 10)?;
    let single = coin_posterior(1, 10)?;
    let checks = vec![
        Check::near("posterior_unfair", exact, 1.0 / (1.0 + 101.0 * 2f64.powi(-10)), COIN_TOL, "closed_form"),
        Check::near("perturbed_estimate", perturbed, 1.0 / (1.0 + 99.0 * 2f64.powi(-10)), COIN_TOL, "closed_form"),
        Check::near("single_coin", single, 1.0, COIN_TOL, "closed_form"),
    ];
    // the estimate when fair coins land tails with probability 0.51
    let biased = 1.0 / (1.0 + 101.0 * 0.49f64.powi(10));
    let details = json!({ "biased_coins_posterior": biased, "estimate_gap": (perturbed - biased).abs() });
    Ok(ScenarioReport::new("coin", &[("coins", 102.0), ("heads", 10.0)], checks, details).timed(t))
}

fn check_playdoh_args(m: f64, a: f64) -> Result<()> {
    if !(0.0 <= m && m < 1.0 && 0.0 < a && a <= 1.0) {
        return Err(Error::InvalidInput(format!("need 0 <= m < 1 and 0 < a <= 1, got m = {m}, a = {a}")));
    }
    Ok(())
}

/// Primary reduction, nested reduction and the point-mass nested value of
/// `sup π[X ≥ a]` over priors with mean `m`.
fn markov_paths(m: f64, a: f64, cfg: &SolverConfig) -> Result<(SolveResult, SolveResult, f64)> {
    let spec = mean_class(m)?;
    let primary = solve(&reduce_prior(&QuantityOfInterest::tail(a), &spec, Direction::Sup)?, cfg)?;
    let inner = AtomFn::new("markov_inner_sup", move |q| markov_inner_sup(q, a)).with_breakpoints(vec![a]);
    let nested = solve(&reduce_nested(inner, Some(0.0), Some(1.0), &spec, Direction::Sup)?, cfg)?;
    let point = nested_prior_value(&PointMass(vec![m]), |q| Some(markov_inner_sup(q[0], a)), 1, cfg.seed)?;
    Ok((primary, nested, point.value))
}

/// Markov's bound `m/a` through both reduction paths.
pub fn scenario_playdoh(m: f64, a: f64, cfg: &SolverConfig) -> Result<ScenarioReport> {
    if !(0.0 < m && m < a && a < 1.0) {
        return Err(Error::InvalidInput(format!("need 0 < m < a < 1, got m = {m}, a = {a}")));
    }
    let t = Instant::now();
    let (primary, nested, point) = markov_paths(m, a, cfg)?;
    let checks = vec![
        Check::near("primary", primary.value, m / a, SOLVER_TOL, "closed_form"),
        Check::near("nested", nested.value, m / a, SOLVER_TOL, "closed_form"),
        Check::near("nested_point_mass", point, m / a, SOLVER_TOL, "closed_form"),
        Check::near("paths_agree", primary.value, nested.value, 1e-6, "property"),
    ];
    let details = json!({ "primary": witness_json(&primary), "nested": witness_json(&nested) });
    Ok(ScenarioReport::new("playdoh", &[("m", m), ("a", a)], checks, details).timed(t))
}

/// `sup π[μ[X ≥ a]]` over priors with `E_π[E_μ[X]] = q`, against `q/a`
/// and a grid oracle.
pub fn scenario_prior_bound(q: f64, a: f64, cfg: &SolverConfig) -> Result<ScenarioReport> {
    check_playdoh_args(q, a)?;
    let t = Instant::now();
    let expected = (q / a).min(1.0);
    let (primary, nested, _) = markov_paths(q, a, cfg)?;
    let xs = Support::unit().grid(2001);
    let obj: Vec<f64> = xs.iter().map(|&x| f64::from(x >= a)).collect();
    let feats: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let oracle = grid::optimize(&obj, &feats, &[crate::measures::Interval::point(q)], true)?
        .map_or(f64::NAN, |s| s.value);
    let checks = vec![
        Check::near("primary", primary.value, expected, SOLVER_TOL, "closed_form"),
        Check::near("nested", nested.value, expected, SOLVER_TOL, "closed_form"),
        Check::near("grid_oracle", primary.value, oracle, SOLVER_TOL, "oracle"),
        Check::near("paths_agree", primary.value, nested.value, 1e-6, "property"),
    ];
    let details = json!({ "primary": witness_json(&primary), "nested": witness_json(&nested), "grid_oracle": oracle });
    Ok(ScenarioReport::new("prior_bound", &[("q", q), ("a", a)], checks, details).timed(t))
}

/// Data model of [`scenario_posterior_brittle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BrittleMode {
    /// Vanishing ball radius.
    Limit,
    /// Balls of the given radius.
    Finite(f64),
}

fn brittle_bound(q: f64, a: f64, n: usize, mode: BrittleMode, cfg: &SolverConfig) -> Result<SolveResult> {
    let s = Support::unit();
    let (radius, opts) = match mode {
        BrittleMode::Limit => (0.01, PosteriorOptions::limit()),
        BrittleMode::Finite(d) => (d, PosteriorOptions::default()),
    };
    let obs = if n == 0 { Observation::none(s) } else { Observation::new(s, data_centers(n), radius)? };
    posterior_upper_bound(&QuantityOfInterest::tail(a), &mean_class(q)?, &obs, cfg, opts)
}

/// Optimal posterior bound of `μ[X ≥ a]` over priors with mean `q` given
/// `n` data points. Without data it is the prior bound `q/a`.
pub fn scenario_posterior_brittle(
    q: f64,
    a: f64,
    n: usize,
    mode: BrittleMode,
    cfg: &SolverConfig,
) -> Result<ScenarioReport> {
    if !(0.0 < q && q < a && a < 1.0) {
        return Err(Error::InvalidInput(format!("need 0 < q < a < 1, got q = {q}, a = {a}")));
    }
    let t = Instant::now();
    let r = brittle_bound(q, a, n, mode, cfg)?;
    let (expected, source) = if n == 0 { (q / a, "closed_form") } else { (1.0, "limit") };
    let delta = match mode {
        BrittleMode::Limit => 0.0,
        BrittleMode::Finite(d) => d,
    };
    let checks = vec![Check::near("posterior_upper", r.value, expected, SOLVER_TOL, source)];
    let params = [("q", q), ("a", a), ("n", n as f64), ("delta", delta)];
    Ok(ScenarioReport::new("posterior_brittle", &params, checks, json!({ "solve": witness_json(&r) })).timed(t))
}

/// Finite-radius posterior bounds over a sweep of radii, sorted from the
/// largest radius down.
pub fn scenario_posterior_sweep(q: f64, a: f64, n: usize, deltas: &[f64], cfg: &SolverConfig) -> Result<ScenarioReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidInput("radius sweep needs positive finite values".into()));
    }
    if !(0.0 < q && q < a && a < 1.0) || n == 0 {
        return Err(Error::InvalidInput(format!("need 0 < q < a < 1 and data, got q = {q}, a = {a}, n = {n}")));
    }
    let t = Instant::now();
    let mut ds = deltas.to_vec();
    ds.sort_by(|x, y| y.total_cmp(x));
    let mut values = Vec::with_capacity(ds.len());
    let mut checks = Vec::new();
    for &d in &ds {
        let v = brittle_bound(q, a, n, BrittleMode::Finite(d), cfg)?.value;
        checks.push(Check::near(format!("delta={d}"), v, 1.0, SOLVER_TOL, "limit"));
        values.push(v);
    }
    let drop = values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    checks.push(Check::near("monotone_drop", drop, 0.0, MONOTONE_SLACK, "property"));
    let details = json!({ "deltas": ds, "values": values, "gap_to_one": values.iter().map(|v| 1.0 - v).collect::<Vec<_>>() });
    Ok(ScenarioReport::new("posterior_sweep", &[("q", q), ("a", a), ("n", n as f64)], checks, details).timed(t))
}

/// Limit of the optimal posterior bound when the data probability is known
/// up to a factor `α` on the class: `1 / (1 + α⁻² (a - m) / m)`.
pub fn learning_curve(alpha: f64, a: f64, m: f64) -> Result<f64> {
    if !(alpha >= 1.0 && alpha.is_finite() && 0.0 < m && m < a && a < 1.0) {
        return Err(Error::InvalidInput(format!("need alpha >= 1 and 0 < m < a < 1, got {alpha}, {a}, {m}")));
    }
    Ok(1.0 / (1.0 + (a - m) / (m * alpha * alpha)))
}

/// Limit of the optimal posterior bound when each ball probability is
/// known up to a factor `γ`, for `m = a/2`: `1 / (1 + γ^(-2n))`.
pub fn gamma_curve(gamma: f64, n: usize) -> Result<f64> {
    if !(gamma >= 1.0 && gamma.is_finite()) || n == 0 {
        return Err(Error::InvalidInput(format!("need gamma >= 1 and n >= 1, got {gamma}, {n}")));
    }
    Ok(1.0 / (1.0 + gamma.powf(-2.0 * n as f64)))
}

/// Limit-mode upper bound of `μ[X ≥ a]` over priors with mean `m` whose
/// data probability lies in `band`, given [`data_centers`]`(n)`.
pub fn band_bound(band: DataBand, a: f64, m: f64, n: usize, cfg: &SolverConfig) -> Result<SolveResult> {
    let obs = Observation::new(Support::unit(), data_centers(n), 0.01)?;
    let spec = mean_class(m)?.with_band(band);
    posterior_upper_bound(&QuantityOfInterest::tail(a), &spec, &obs, cfg, PosteriorOptions { mode: DataMode::Limit, ..PosteriorOptions::default() })
}

/// Band-constrained solver bounds against [`learning_curve`].
pub fn scenario_learning_band(alphas: &[f64], a: f64, m: f64, n: usize, cfg: &SolverConfig) -> Result<ScenarioReport> {
    let t = Instant::now();
    let mut checks = Vec::new();
    let mut witnesses = Vec::new();
    for &alpha in alphas {
        let exact = learning_curve(alpha, a, m)?;
        let r = band_bound(DataBand::joint(alpha)?, a, m, n, cfg)?;
        checks.push(Check::near(format!("alpha={alpha}"), r.value, exact, SOLVER_TOL, "closed_form"));
        witnesses.push(witness_json(&r));
    }
    let curve: Vec<f64> = (0..=190).map(|i| learning_curve(1.0 + 0.1 * i as f64, a, m)).collect::<Result<_>>()?;
    let min_step = curve.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    checks.push(Check::at_least("curve_min_increment", min_step, 0.0, 0.0, "property"));
    if min_step <= 0.0 {
        checks.last_mut().expect("just pushed").pass = false;
    }
    let params = [("a", a), ("m", m), ("n", n as f64)];
    Ok(ScenarioReport::new("learning_curve", &params, checks, json!({ "solves": witnesses })).timed(t))
}

/// Per-ball band solver bounds against [`gamma_curve`] at `a = 3/4`,
/// `m = 3/8`.
pub fn scenario_gamma_band(gammas: &[f64], n: usize, cfg: &SolverConfig) -> Result<ScenarioReport> {
    let t = Instant::now();
    let mut checks = Vec::new();
    let mut witnesses = Vec::new();
    for &gamma in gammas {
        let exact = gamma_curve(gamma, n)?;
        let r = band_bound(DataBand::per_ball(gamma)?, 0.75, 0.375, n, cfg)?;
        checks.push(Check::near(format!("gamma={gamma}"), r.value, exact, SOLVER_TOL, "closed_form"));
        witnesses.push(witness_json(&r));
    }
    checks.push(Check::near("gamma=2,n=5", gamma_curve(2.0, 5)?, 1.0 / (1.0 + 2f64.powi(-10)), CLOSED_FORM_TOL, "closed_form"));
    let seq: Vec<f64> = (1..=40).map(|k| gamma_curve(1.2, k)).collect::<Result<_>>()?;
    let drop = seq.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    checks.push(Check::near("monotone_drop_in_n", drop, 0.0, 0.0, "property"));
    checks.push(Check::near("large_n", seq[39], 1.0, 1e-6, "limit"));
    Ok(ScenarioReport::new("gamma_curve", &[("n", n as f64)], checks, json!({ "solves": witnesses })).timed(t))
}
