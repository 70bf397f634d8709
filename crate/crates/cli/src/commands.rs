//! Subcommand implementations. Each sweep point is solved independently;
//! points run in parallel and are reported in input order.

use std::time::Instant;

use brittle_bayes::measures::{MomentFn, MomentMap, Observation, QuantityOfInterest};
use brittle_bayes::posterior::{
    brittleness_verdict, conditional_expectation_in, conditional_expectation_of_values, info_bound_sandwich,
    posterior_lower_bound, posterior_upper_bound, BrittlenessVerdict,
};
use brittle_bayes::reduction::{reduce_prior, BandKind, DataBand, Direction, DiscreteSampler, MomentSampler};
use brittle_bayes::scenarios::{
    band_bound, gamma_curve, learning_curve, model_ab_posteriors, run_scenario, IterativeUniform, ScenarioOptions, SCENARIOS,
};
use brittle_bayes::solver::{solve, SolveResult, SolveStatus};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{point_label, sweep_points, CurveKind, RunConfig, SamplerConfig, Sweep};
use crate::error::{CliError, EXIT_NUMERICAL, EXIT_OK, EXIT_SCENARIO};
use crate::output::{scrub_timing, Report, Row};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Prior,
    Posterior,
    Sandwich,
    Brittleness,
    Curve,
    Perturb,
    Scenarios,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Prior => "prior",
            Command::Posterior => "posterior",
            Command::Sandwich => "sandwich",
            Command::Brittleness => "brittleness",
            Command::Curve => "curve",
            Command::Perturb => "perturb",
            Command::Scenarios => "scenarios",
        }
    }

    fn sweepable(self) -> &'static [&'static str] {
        match self {
            Command::Prior => &["a", "seed", "restarts"],
            Command::Posterior => &["alpha", "gamma", "delta", "a", "seed", "restarts"],
            Command::Sandwich => &["delta", "a", "grid_points", "seed", "restarts"],
            Command::Brittleness => &["delta", "a", "grid_points", "seed"],
            Command::Curve => &["alpha", "gamma"],
            Command::Perturb => &["delta", "delta_c", "gap", "theta_grid", "x_grid"],
            Command::Scenarios => &[],
        }
    }
}

pub struct Context {
    pub command: Command,
    pub config: RunConfig,
    pub sweeps: Vec<Sweep>,
    pub timing: bool,
    /// Positional scenario names; empty means all.
    pub scenarios: Vec<String>,
    pub scenario_options: ScenarioOptions,
}

/// A finished command: what to print and how to exit.
pub struct Outcome {
    pub report: Report,
    pub exit: i32,
}

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let allowed = ctx.command.sweepable();
    for s in &ctx.sweeps {
        if !allowed.contains(&s.name.as_str()) {
            let names = if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") };
            return Err(CliError::Config(format!(
                "{} cannot sweep {:?}; sweepable parameters: {names}",
                ctx.command.name(),
                s.name
            )));
        }
    }
    match ctx.command {
        Command::Prior => over_points(ctx, prior_point),
        Command::Posterior => over_points(ctx, posterior_point),
        Command::Sandwich => over_points(ctx, sandwich_point),
        Command::Brittleness => over_points(ctx, brittleness_point),
        Command::Curve => curve(ctx),
        Command::Perturb => over_points(ctx, perturb_point),
        Command::Scenarios => scenarios(ctx),
    }
}

fn as_count(name: &str, v: f64) -> Result<usize, CliError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::Config(format!("sweep {name}: {v} is not a nonnegative integer")))
    }
}

fn with_band(c: &mut RunConfig, kind: BandKind) -> Result<(), CliError> {
    let spec = c.require_spec()?;
    let reference = spec.band().map(|b| b.reference().clone());
    let band = match reference {
        Some(r) => DataBand::new(kind, r)?,
        None => match kind {
            BandKind::Joint { alpha } => DataBand::joint(alpha)?,
            BandKind::PerBall { gamma } => DataBand::per_ball(gamma)?,
        },
    };
    c.spec = Some(spec.clone().with_band(band));
    Ok(())
}

fn apply(command: Command, c: &mut RunConfig, name: &str, v: f64) -> Result<(), CliError> {
    match (command, name) {
        (_, "seed") => {
            let s = as_count(name, v)? as u64;
            c.solver.seed = s;
            c.verdict.seed = s;
        }
        (_, "restarts") => c.solver.restarts = as_count(name, v)?,
        (_, "grid_points") => {
            c.sandwich.grid_points = as_count(name, v)?;
            c.verdict.grid_points = c.sandwich.grid_points;
        }
        (_, "alpha") => with_band(c, BandKind::Joint { alpha: v })?,
        (_, "gamma") => with_band(c, BandKind::PerBall { gamma: v })?,
        (_, "a") => match c.qoi {
            None | Some(QuantityOfInterest::Tail(_)) => c.qoi = Some(QuantityOfInterest::tail(v)),
            Some(_) => return Err(CliError::Config("sweep a needs a tail quantity of interest".into())),
        },
        (Command::Perturb, "delta") => c.perturb.delta = v,
        (Command::Perturb, "delta_c") => c.perturb.delta_c = v,
        (Command::Perturb, "gap") => c.perturb.gap = v,
        (Command::Perturb, "theta_grid") => c.perturb.theta_grid = as_count(name, v)?,
        (Command::Perturb, "x_grid") => c.perturb.x_grid = as_count(name, v)?,
        (_, "delta") => {
            let obs = c
                .observation
                .as_ref()
                .ok_or_else(|| CliError::Config("sweep delta needs field `observation`".into()))?;
            c.observation = Some(obs.with_radius(v)?);
        }
        _ => return Err(CliError::Config(format!("cannot sweep {name:?}"))),
    }
    Ok(())
}

fn over_points<F>(ctx: &Context, f: F) -> Result<Outcome, CliError>
where
    F: Fn(&RunConfig, &str) -> Result<(Vec<Row>, Value), CliError> + Sync,
{
    let points = sweep_points(&ctx.sweeps);
    let results: Vec<Result<(Vec<Row>, Value), CliError>> = points
        .par_iter()
        .map(|p| {
            let mut c = ctx.config.clone();
            for (n, v) in p {
                apply(ctx.command, &mut c, n, *v)?;
            }
            let label = point_label(p);
            let t = Instant::now();
            let (mut rows, detail) = f(&c, &label)?;
            if ctx.timing {
                let ms = t.elapsed().as_secs_f64() * 1e3;
                rows.iter_mut().for_each(|r| r.wall_time_ms = Some(ms));
            }
            Ok((rows, json!({ "sweep": label, "result": detail })))
        })
        .collect();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for r in results {
        let (rs, d) = r?;
        rows.extend(rs);
        details.push(d);
    }
    let exit = if rows.iter().any(|r| r.status == "infeasible") { EXIT_NUMERICAL } else { EXIT_OK };
    Ok(Outcome { report: Report { command: ctx.command.name(), rows, details }, exit })
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::Infeasible => "infeasible",
    }
}

fn solve_row(label: &str, sweep: &str, r: &SolveResult) -> Row {
    let mut row = Row::new(label, sweep, r.value, status_name(r.status));
    row.residual = Some(r.constraint_residual);
    row.restarts_used = Some(r.restarts_used);
    row
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Config(e.to_string()))
}

fn prior_point(c: &RunConfig, sweep: &str) -> Result<(Vec<Row>, Value), CliError> {
    let spec = c.require_spec()?;
    let phi = c.require_qoi()?;
    let up = solve(&reduce_prior(phi, spec, Direction::Sup)?, &c.solver)?;
    let lo = solve(&reduce_prior(phi, spec, Direction::Inf)?, &c.solver)?;
    let rows = vec![solve_row("upper", sweep, &up), solve_row("lower", sweep, &lo)];
    Ok((rows, json!({ "upper": to_json(&up)?, "lower": to_json(&lo)? })))
}

fn posterior_point(c: &RunConfig, sweep: &str) -> Result<(Vec<Row>, Value), CliError> {
    if let Some(prior) = &c.prior {
        if c.spec.is_some() {
            return Err(CliError::Config("give either field `prior` (exact) or field `spec` (bounds), not both".into()));
        }
        let support = *prior
            .models()
            .iter()
            .find_map(|m| match m {
                brittle_bayes::posterior::Model::Discrete { measure } => Some(measure.support()),
                brittle_bayes::posterior::Model::Density { density } => Some(density.support()),
            })
            .expect("prior has a model");
        let obs = c.observation.clone().unwrap_or_else(|| Observation::none(support));
        let v = match (&c.values, &c.qoi) {
            (Some(values), None) => conditional_expectation_of_values(prior, values, &obs, c.posterior.mode)?,
            (None, Some(phi)) => conditional_expectation_in(prior, phi, &obs, c.posterior.mode)?,
            _ => return Err(CliError::Config("exact posterior needs exactly one of fields `values` and `qoi`".into())),
        };
        return Ok((vec![Row::new("posterior", sweep, v, "exact")], json!({ "posterior": v })));
    }
    let spec = c.require_spec()?;
    let phi = c.require_qoi()?;
    let obs = c.observation.clone().unwrap_or_else(|| Observation::none(*spec.support()));
    let up = posterior_upper_bound(phi, spec, &obs, &c.solver, c.posterior)?;
    let lo = posterior_lower_bound(phi, spec, &obs, &c.solver, c.posterior)?;
    let rows = vec![solve_row("upper", sweep, &up), solve_row("lower", sweep, &lo)];
    Ok((rows, json!({ "upper": to_json(&up)?, "lower": to_json(&lo)? })))
}

fn sandwich_point(c: &RunConfig, sweep: &str) -> Result<(Vec<Row>, Value), CliError> {
    let spec = c.require_spec()?;
    let phi = c.require_qoi()?;
    if c.sandwich.grid_points < 2 {
        return Err(CliError::Config("field `sandwich.grid_points` must be at least 2".into()));
    }
    let grid = spec.support().grid(c.sandwich.grid_points);
    let s = info_bound_sandwich(phi, spec, c.observation.as_ref(), &grid, &c.solver, c.posterior)?;
    let labels = ["L_A", "L_Pi", "L_API", "U_API", "U_Pi", "U_A"];
    let rows = labels
        .iter()
        .zip(s.as_array())
        .map(|(l, v)| {
            let middle = l.ends_with("API");
            let status = if middle && !s.has_middle() { "empty" } else { "ok" };
            Row::new(*l, sweep, v, status)
        })
        .collect();
    Ok((rows, to_json(&s)?))
}

fn power_degree(psi: &MomentMap) -> Option<usize> {
    let k = psi.dim();
    let powers = psi.components().iter().enumerate().all(|(j, g)| matches!(g, MomentFn::Power(p) if *p as usize == j + 1));
    (k > 0 && powers).then_some(k)
}

fn verdict_with<S: MomentSampler + Sync>(c: &RunConfig, sampler: &S) -> Result<BrittlenessVerdict, CliError> {
    let spec = c.require_spec()?;
    let phi = c.require_qoi()?;
    let obs = c
        .observation
        .as_ref()
        .ok_or_else(|| CliError::Config("field `observation` is required by this command".into()))?;
    Ok(brittleness_verdict(phi, spec.moment_map(), sampler, obs, &c.verdict)?)
}

fn brittleness_point(c: &RunConfig, sweep: &str) -> Result<(Vec<Row>, Value), CliError> {
    let spec = c.require_spec()?;
    let sampler = c.sampler.clone().unwrap_or(SamplerConfig::IterativeUniform { grid_points: None });
    let v = match sampler {
        SamplerConfig::IterativeUniform { grid_points } => {
            let k = power_degree(spec.moment_map()).ok_or_else(|| {
                CliError::Config("the iterative-uniform sampler needs moment components x^1, ..., x^k".into())
            })?;
            let s = IterativeUniform::new(*spec.support(), k, grid_points.unwrap_or(c.verdict.grid_points))?;
            verdict_with(c, &s)?
        }
        SamplerConfig::Discrete { points, probs } => verdict_with(c, &DiscreteSampler::new(points, probs)?)?,
    };
    let flag = |l: &str, b: bool| Row::new(l, sweep, f64::from(u8::from(b)), if b { "holds" } else { "fails" });
    let bound = |l: &str, x: Option<f64>| match x {
        Some(x) => Row::new(l, sweep, x, "ok"),
        None => Row::new(l, sweep, f64::NAN, "NA"),
    };
    let rows = vec![
        flag("vanishing_data", v.vanishing_data),
        flag("near_sup", v.near_sup),
        flag("near_inf", v.near_inf),
        flag("separation_argument", v.separation_argument_applies),
        bound("implied_upper", v.implied_upper),
        bound("implied_lower", v.implied_lower),
        Row::new("accepted", sweep, v.accepted as f64, "count"),
        Row::new("rejected", sweep, v.rejected as f64, "count"),
    ];
    Ok((rows, to_json(&v)?))
}

fn perturb_point(c: &RunConfig, sweep: &str) -> Result<(Vec<Row>, Value), CliError> {
    let r = model_ab_posteriors(&c.perturb)?;
    let rows = [("post_a", r.post_a), ("post_b", r.post_b), ("prior_a", r.prior_a), ("prior_b", r.prior_b), ("tv_max", r.tv_max)]
        .into_iter()
        .map(|(l, v)| Row::new(l, sweep, v, "quadrature"))
        .collect();
    Ok((rows, json!({ "options": to_json(&c.perturb)?, "posteriors": to_json(&r)? })))
}

fn curve(ctx: &Context) -> Result<Outcome, CliError> {
    let mut cc = ctx.config.curve.clone();
    match ctx.sweeps.as_slice() {
        [] => {}
        [s] => {
            cc.kind = if s.name == "alpha" { CurveKind::Learning } else { CurveKind::Gamma };
            cc.values = s.values.clone();
        }
        _ => return Err(CliError::Config("curve takes a single sweep, alpha or gamma".into())),
    }
    if cc.values.is_empty() || cc.values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config("field `curve.values` must be nonempty and finite".into()));
    }
    if cc.kind == CurveKind::Gamma && (cc.m - cc.a / 2.0).abs() > 1e-12 {
        return Err(CliError::Config("the gamma curve is closed-form only for m = a/2".into()));
    }
    let name = match cc.kind {
        CurveKind::Learning => "alpha",
        CurveKind::Gamma => "gamma",
    };
    let solver = &ctx.config.solver;
    let results: Vec<Result<(Vec<Row>, Value), CliError>> = cc
        .values
        .par_iter()
        .map(|&v| {
            let sweep = format!("{name}={v}");
            let t = Instant::now();
            let (closed, band) = match cc.kind {
                CurveKind::Learning => (learning_curve(v, cc.a, cc.m)?, DataBand::joint(v)?),
                CurveKind::Gamma => (gamma_curve(v, cc.n)?, DataBand::per_ball(v)?),
            };
            let r = band_bound(band, cc.a, cc.m, cc.n, solver)?;
            let mut rows = vec![Row::new("closed_form", &sweep, closed, "exact"), solve_row("solver", &sweep, &r)];
            if ctx.timing {
                let ms = t.elapsed().as_secs_f64() * 1e3;
                rows.iter_mut().for_each(|r| r.wall_time_ms = Some(ms));
            }
            Ok((rows, json!({ "sweep": sweep, "closed_form": closed, "solver": to_json(&r)? })))
        })
        .collect();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for r in results {
        let (rs, d) = r?;
        rows.extend(rs);
        details.push(d);
    }
    let exit = if rows.iter().any(|r| r.status == "infeasible") { EXIT_NUMERICAL } else { EXIT_OK };
    Ok(Outcome { report: Report { command: "curve", rows, details }, exit })
}

fn scenarios(ctx: &Context) -> Result<Outcome, CliError> {
    let names: Vec<String> =
        if ctx.scenarios.is_empty() { SCENARIOS.iter().map(|s| s.to_string()).collect() } else { ctx.scenarios.clone() };
    if let Some(bad) = names.iter().find(|n| !SCENARIOS.contains(&n.as_str())) {
        return Err(CliError::Config(format!("unknown scenario: {bad}; known: {}", SCENARIOS.join(", "))));
    }
    let reports: Vec<_> = names.par_iter().map(|n| run_scenario(n, &ctx.scenario_options)).collect();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for r in reports {
        let r = r?;
        let mut row = Row::new(r.name.clone(), "", r.abs_error, if r.pass { "pass" } else { "fail" });
        if ctx.timing {
            row.wall_time_ms = Some(r.wall_time_ms);
        }
        rows.push(row);
        let mut d = to_json(&r)?;
        if !ctx.timing {
            scrub_timing(&mut d);
        }
        details.push(d);
    }
    let exit = if rows.iter().all(|r| r.status == "pass") { EXIT_OK } else { EXIT_SCENARIO };
    Ok(Outcome { report: Report { command: "scenarios", rows, details }, exit })
}
