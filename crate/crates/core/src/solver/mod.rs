//! Numerical solution of reduced programs.
//!
//! Each restart runs a global phase over a pool of candidate measures on a
//! shifted grid, then polishes the best vertices locally. The global phase
//! enumerates small-support vertices exactly and runs Dinkelbach iterations
//! of a linear program, grouped by data-probability magnitude so that
//! columns of very different scale never share one simplex tableau.
//! Every reported value is attained by a feasible witness, so sup values
//! are lower bounds on the true optimum (upper bounds for inf).

pub(crate) mod lp;
pub(crate) mod grid;
mod mixing;
mod polish;
mod pool;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::numeric::{ext_f64, halton, sample_rng};
use crate::reduction::{Candidate, Direction, ProgramKind, ReducedProgram, Witness};
use lp::{LpOutcome, LpRow};
use mixing::{better, enumerate, offer, vertex_count, Column, MixOutcome, Vertex};
use polish::Polisher;

pub use mixing::DEN_FLOOR;

/// Denominators below this flag the result as near-singular.
pub const NEAR_SINGULAR: f64 = 1e-12;

/// Atom weights at or below this are pruned from witnesses when the value
/// does not change.
pub const PRUNE_WEIGHT: f64 = 1e-10;

const KEEP_VERTICES: usize = 3;
const POLISH_STARTS: usize = 2;
const DINKELBACH_ITERS: usize = 30;
const BAND_DECADES: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub constraint_tol: f64,
    pub seed: u64,
    /// Points of the global-phase grid.
    pub grid_points: usize,
    /// Largest number of linear systems solved by vertex enumeration in
    /// one restart.
    pub enumeration_budget: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 2000,
            step_tol: 1e-10,
            constraint_tol: 1e-8,
            seed: 0,
            grid_points: 101,
            enumeration_budget: 2e6,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidInput("restarts must be at least 1".into()));
        }
        if !(self.step_tol > 0.0 && self.constraint_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidInput("grid needs at least 2 points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Bound estimate; `-inf` (sup) or `+inf` (inf) when infeasible.
    #[serde(with = "ext_f64")]
    pub value: f64,
    pub witness: Option<Witness>,
    pub status: SolveStatus,
    pub restarts_used: usize,
    #[serde(with = "ext_f64")]
    pub constraint_residual: f64,
    /// Denominator of the fractional objective at the witness (`1` for
    /// linear programs).
    #[serde(with = "ext_f64")]
    pub denominator: f64,
    pub near_singular: bool,
}

impl SolveResult {
    fn infeasible(program: &ReducedProgram, restarts: usize) -> Self {
        Self {
            value: -program.direction().sign() * f64::INFINITY,
            witness: None,
            status: SolveStatus::Infeasible,
            restarts_used: restarts,
            constraint_residual: f64::INFINITY,
            denominator: 0.0,
            near_singular: false,
        }
    }
}

/// What one restart found: candidates of the best vertex and its mixing.
#[derive(Clone)]
struct Found {
    candidates: Vec<Candidate>,
    vertex: Vertex,
    converged: bool,
}

struct RestartOutcome {
    best: Option<Found>,
    feasible: bool,
    unbounded: bool,
}

fn columns(program: &ReducedProgram, cands: &[Candidate]) -> Result<(Vec<Column>, Vec<f64>, Vec<usize>)> {
    let mut cols = Vec::with_capacity(cands.len());
    let mut scales = Vec::with_capacity(cands.len());
    let mut keep = Vec::with_capacity(cands.len());
    for (i, c) in cands.iter().enumerate() {
        let Some(v) = program.column(c)? else { continue };
        let (num, den) = program.objective_terms(v.phi, v.data);
        if !(num.is_finite() && den.is_finite()) {
            continue;
        }
        let scale = match program.kind() {
            ProgramKind::PosteriorFractional | ProgramKind::LambdaThreshold => v.data,
            _ => 1.0,
        };
        cols.push(Column { num, den, psi: v.psi });
        scales.push(scale);
        keep.push(i);
    }
    Ok((cols, scales, keep))
}

/// Bound on the maximized ratio implied by the quantity of interest.
fn ratio_cap(program: &ReducedProgram) -> Option<f64> {
    if program.kind() == ProgramKind::LambdaThreshold {
        return None;
    }
    let (lo, hi) = program.qoi().bounds(program.support());
    match program.direction() {
        Direction::Sup => hi,
        Direction::Inf => lo.map(|v| -v),
    }
}

fn simplex_rows(cols: &[Column], program: &ReducedProgram, subset: &[usize]) -> Vec<LpRow> {
    let mut rows = vec![LpRow { coeffs: vec![1.0; subset.len()], lo: 1.0, hi: 1.0 }];
    for (i, iv) in program.constraints().intervals().iter().enumerate() {
        rows.push(LpRow { coeffs: subset.iter().map(|&j| cols[j].psi[i]).collect(), lo: iv.lo, hi: iv.hi });
    }
    rows
}

/// Exact vertex on the support of an approximate LP solution.
fn refine(cols: &[Column], program: &ReducedProgram, support: &[usize]) -> MixOutcome {
    let sub: Vec<Column> = support.iter().map(|&j| cols[j].clone()).collect();
    let mut out = enumerate(&sub, program.constraints().intervals(), sub.len(), 1);
    for v in &mut out.best {
        v.idx = v.idx.iter().map(|&k| support[k]).collect();
    }
    out
}

/// Dinkelbach iterations restricted to columns whose scale is at most
/// `top`, with objective coefficients divided by `top`.
fn dinkelbach(
    cols: &[Column],
    scales: &[f64],
    program: &ReducedProgram,
    top: f64,
    start: f64,
    found: &mut MixOutcome,
) -> Result<()> {
    let subset: Vec<usize> = (0..cols.len()).filter(|&j| scales[j] <= top).collect();
    if subset.is_empty() {
        return Ok(());
    }
    let rows = simplex_rows(cols, program, &subset);
    let mut lambda = start;
    for _ in 0..DINKELBACH_ITERS {
        let obj: Vec<f64> = subset
            .iter()
            .map(|&j| {
                let c = &cols[j];
                let l = if lambda.is_finite() { lambda } else { 0.0 };
                (c.num - l * c.den) / top
            })
            .collect();
        let x = match lp::maximize(&obj, &rows)? {
            LpOutcome::Optimal { x, .. } => x,
            LpOutcome::Infeasible => return Ok(()),
            LpOutcome::Unbounded => {
                found.unbounded = true;
                return Ok(());
            }
        };
        let support: Vec<usize> = subset.iter().zip(&x).filter(|(_, &w)| w > 1e-13).map(|(&j, _)| j).collect();
        let exact = refine(cols, program, &support);
        found.feasible |= exact.feasible;
        let Some(v) = exact.best.into_iter().next() else { return Ok(()) };
        let r = v.ratio();
        offer(&mut found.best, v, KEEP_VERTICES);
        if !(lambda.is_finite() && !better(r, lambda)) {
            lambda = r;
        } else {
            return Ok(());
        }
    }
    Ok(())
}

/// Vertices of the mixing problem over a candidate pool.
fn global_phase(program: &ReducedProgram, cfg: &SolverConfig, cols: &[Column], scales: &[f64]) -> Result<MixOutcome> {
    let intervals = program.constraints().intervals();
    let max_support = match program.kind() {
        ProgramKind::PriorPrimary | ProgramKind::PositiveMeasure => program.n_atoms(),
        _ => program.n_measures(),
    };
    let mut s = 0;
    while s < max_support && vertex_count(cols.len(), intervals, s + 1) <= cfg.enumeration_budget {
        s += 1;
    }
    let mut found = enumerate(cols, intervals, s, KEEP_VERTICES);
    if s >= max_support.min(cols.len()) || program.is_pinned() {
        return Ok(found);
    }
    let cap = ratio_cap(program);
    let mut tops: Vec<f64> = Vec::new();
    let mut order: Vec<f64> = scales.iter().copied().filter(|&x| x > 0.0).collect();
    order.sort_by(|a, b| b.total_cmp(a));
    for x in order {
        if tops.last().is_none_or(|&t| x < t * 10f64.powf(-BAND_DECADES)) {
            tops.push(x);
        }
    }
    for top in tops {
        let best = found.top().map_or(f64::NEG_INFINITY, Vertex::ratio);
        if cap.is_some_and(|c| best >= c - 1e-15 * c.abs().max(1.0)) {
            break;
        }
        // the band cannot beat the incumbent if none of its columns does
        let reach = (0..cols.len())
            .filter(|&j| scales[j] <= top && cols[j].den > DEN_FLOOR)
            .map(|j| cols[j].num / cols[j].den)
            .fold(f64::NEG_INFINITY, f64::max);
        if program.kind() != ProgramKind::LambdaThreshold && !better(reach, best) && found.top().is_some() {
            continue;
        }
        dinkelbach(cols, scales, program, top, best, &mut found)?;
    }
    Ok(found)
}

fn restart_shift(cfg: &SolverConfig, r: usize) -> f64 {
    if r == 0 {
        return 0.0;
    }
    let u: f64 = sample_rng(cfg.seed, u64::MAX).random();
    (halton(r as u64, 2) + u).fract()
}

fn run_restart(program: &ReducedProgram, cfg: &SolverConfig, r: usize) -> Result<RestartOutcome> {
    let mut cands = if program.is_pinned() {
        Vec::new()
    } else {
        pool::build(program, cfg.grid_points, restart_shift(cfg, r))
    };
    match program.kind() {
        // columns of these programs are single atoms
        ProgramKind::PriorPrimary | ProgramKind::PositiveMeasure if !program.is_pinned() => {
            for c in program.candidates() {
                for &x in c.measure.atoms() {
                    cands.push(Candidate { measure: DiscreteMeasure::dirac(*program.support(), x)?, data_factor: c.data_factor });
                }
            }
        }
        _ => cands.extend(program.candidates().iter().filter(|c| c.measure.len() <= program.n_atoms()).cloned()),
    }
    let (cols, scales, keep) = columns(program, &cands)?;
    let found = global_phase(program, cfg, &cols, &scales)?;
    let polisher = Polisher {
        program,
        cfg,
        max_support: match program.kind() {
            ProgramKind::PriorPrimary | ProgramKind::PositiveMeasure => program.n_atoms(),
            _ => program.n_measures(),
        },
        cap: ratio_cap(program),
    };
    let mut best: Option<Found> = None;
    for v in found.best.iter().take(POLISH_STARTS) {
        let start: Vec<Candidate> = v.idx.iter().map(|&j| cands[keep[j]].clone()).collect();
        let candidate = if program.is_pinned() || cfg.max_iters == 0 {
            let vertex = polisher.evaluate(&start);
            vertex.map(|vertex| Found { candidates: start, vertex, converged: true })
        } else {
            polisher
                .run(start)
                .map(|o| Found { candidates: o.candidates, vertex: o.vertex, converged: o.converged })
        };
        if let Some(c) = candidate {
            if best.as_ref().is_none_or(|b| better(c.vertex.ratio(), b.vertex.ratio())) {
                best = Some(c);
            }
        }
    }
    Ok(RestartOutcome { best, feasible: found.feasible, unbounded: found.unbounded })
}

fn build_witness(program: &ReducedProgram, f: &Found) -> Result<Witness> {
    let s = *program.support();
    let picked: Vec<&Candidate> = f.vertex.idx.iter().map(|&j| &f.candidates[j]).collect();
    let p = &f.vertex.p;
    match program.kind() {
        ProgramKind::PriorPrimary | ProgramKind::PositiveMeasure => {
            let atoms: Vec<f64> = picked.iter().map(|c| c.measure.atoms()[0]).collect();
            let measure = if program.kind() == ProgramKind::PriorPrimary {
                DiscreteMeasure::new(s, atoms, p.clone())?
            } else {
                let den = f.vertex.den;
                DiscreteMeasure::positive(s, atoms, p.iter().map(|w| w / den).collect())?
            };
            Ok(Witness { measures: vec![measure.pruned(0.0)], mixing: vec![1.0], data_factors: None })
        }
        _ => Ok(Witness {
            measures: picked.iter().map(|c| c.measure.clone()).collect(),
            mixing: p.clone(),
            data_factors: program.uses_data_factors().then(|| picked.iter().map(|c| c.data_factor.unwrap_or(1.0)).collect()),
        }),
    }
}

/// Drops negligible atoms when doing so leaves the value unchanged.
fn prune(program: &ReducedProgram, mut w: Witness) -> Result<Witness> {
    let base = program.evaluate(&w)?;
    for j in 0..w.measures.len() {
        let pruned = w.measures[j].pruned(PRUNE_WEIGHT);
        if pruned.len() == w.measures[j].len() {
            continue;
        }
        let mut trial = w.clone();
        trial.measures[j] = pruned;
        let e = program.evaluate(&trial)?;
        if (e.value - base.value).abs() <= 1e-12 && e.residual <= base.residual.max(1e-12) {
            w = trial;
        }
    }
    Ok(w)
}

/// Solves a reduced program: best over `cfg.restarts` deterministic
/// restarts, ties resolved in restart order.
pub fn solve(program: &ReducedProgram, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(program, cfg, r))
        .collect::<Result<_>>()?;
    let mut best: Option<Found> = None;
    let (mut feasible, mut unbounded) = (false, false);
    for o in outcomes {
        feasible |= o.feasible;
        unbounded |= o.unbounded;
        if let Some(f) = o.best {
            if best.as_ref().is_none_or(|b| better(f.vertex.ratio(), b.vertex.ratio())) {
                best = Some(f);
            }
        }
    }
    let Some(best) = best else {
        if unbounded {
            return Err(Error::Unbounded);
        }
        if feasible {
            return Err(Error::NullEvent);
        }
        return Ok(SolveResult::infeasible(program, cfg.restarts));
    };
    let witness = prune(program, build_witness(program, &best)?)?;
    let eval = program.evaluate(&witness)?;
    Ok(SolveResult {
        value: eval.value,
        witness: Some(witness),
        status: if best.converged { SolveStatus::Converged } else { SolveStatus::MaxIter },
        restarts_used: cfg.restarts,
        constraint_residual: eval.residual,
        denominator: eval.denominator,
        near_singular: eval.denominator < NEAR_SINGULAR,
    })
}

/// [`solve`] for linear-fractional posterior programs.
pub fn solve_fractional(program: &ReducedProgram, cfg: &SolverConfig) -> Result<SolveResult> {
    if program.kind() != ProgramKind::PosteriorFractional {
        return Err(Error::InvalidInput(format!("expected a posterior program, got {:?}", program.kind())));
    }
    solve(program, cfg)
}

/// Bisection estimate of `sup{λ : value(λ) > 0}` for a non-increasing
/// family `value`.
pub fn lambda_threshold<F>(mut value: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi && tol > 0.0) {
        return Err(Error::InvalidInput("threshold bracket needs lo < hi and tol > 0".into()));
    }
    let vhi = value(hi)?;
    if vhi > 0.0 {
        return Err(Error::BracketTooSmall { value: vhi });
    }
    if value(lo)? <= 0.0 {
        return Ok(lo);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if value(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `V(λ) = sup_π E_π[(Φ - λ) D]` over the posterior program's class
/// (sign-adjusted for inf programs).
pub fn threshold_value(program: &ReducedProgram, cfg: &SolverConfig, lambda: f64) -> Result<f64> {
    let r = solve(&program.threshold_program(lambda)?, cfg)?;
    Ok(if r.status == SolveStatus::Infeasible { f64::NEG_INFINITY } else { r.value })
}

/// Posterior bound of `program` through the threshold characterization,
/// bracketed by the bounds of its quantity of interest.
pub fn posterior_by_threshold(program: &ReducedProgram, cfg: &SolverConfig, tol: f64) -> Result<f64> {
    let (lo, hi) = program.qoi().bounds(program.support());
    let (lo, hi) = match (lo, hi) {
        (Some(l), Some(h)) => (l, h),
        _ => return Err(Error::InvalidInput("threshold bracket needs a bounded quantity of interest".into())),
    };
    let (a, b) = match program.direction() {
        Direction::Sup => (lo, hi),
        Direction::Inf => (-hi, -lo),
    };
    let t = lambda_threshold(|l| threshold_value(program, cfg, l), a - tol, b + tol, tol)?;
    Ok(program.direction().sign() * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{
        AtomFn, ConstraintSpec, MeasureFn, MomentFn, MomentMap, Observation, QuantityOfInterest, Support,
    };
    use crate::reduction::{
        reduce_positive, reduce_posterior, reduce_prior, DataBand, PosteriorOptions, PriorClassSpec,
    };

    fn cfg() -> SolverConfig {
        SolverConfig::default().with_restarts(4)
    }

    fn mean_spec(q: f64) -> PriorClassSpec {
        PriorClassSpec::new(MomentMap::powers(Support::unit(), 1), ConstraintSpec::equalities(&[q]).unwrap(), None).unwrap()
    }

    #[test]
    fn markov_program_value_and_witness() {
        let p = reduce_prior(&QuantityOfInterest::tail(0.5), &mean_spec(0.25), Direction::Sup).unwrap();
        let r = solve(&p, &cfg()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12, "{r:?}");
        assert_eq!(r.status, SolveStatus::Converged);
        let w = r.witness.unwrap();
        let mu = &w.measures[0];
        assert_eq!(mu.len(), 2);
        assert!((mu.mass_in(&crate::measures::IntervalSet::interval(0.5, 0.5).unwrap()) - 0.5).abs() < 1e-12);
        assert!((mu.point_mass(0.0) - 0.5).abs() < 1e-12);
        assert!(r.constraint_residual <= 1e-9);
    }

    #[test]
    fn unconstrained_tail_reaches_one() {
        let p = reduce_prior(&QuantityOfInterest::tail(0.5), &PriorClassSpec::unconstrained(Support::unit()), Direction::Sup)
            .unwrap();
        let r = solve(&p, &cfg()).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.witness.unwrap().measures[0].atoms()[0] >= 0.5);
    }

    #[test]
    fn two_moment_program_matches_grid_brute_force() {
        let spec = PriorClassSpec::new(
            MomentMap::powers(Support::unit(), 2),
            ConstraintSpec::equalities(&[0.5, 0.3]).unwrap(),
            None,
        )
        .unwrap();
        let p = reduce_prior(&QuantityOfInterest::tail(0.75), &spec, Direction::Sup).unwrap();
        let r = solve(&p, &cfg()).unwrap();
        // oracle: all 3-atom measures on a 201-point grid meeting both moments
        let xs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let mut best = f64::NEG_INFINITY;
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                for k in j + 1..xs.len() {
                    let (a, b, c) = (xs[i], xs[j], xs[k]);
                    let mut m = vec![vec![1.0; 3], vec![a, b, c], vec![a * a, b * b, c * c]];
                    let mut rhs = vec![1.0, 0.5, 0.3];
                    if let Some(w) = crate::numeric::solve_dense(&mut m, &mut rhs) {
                        if w.iter().all(|&x| x >= -1e-12) {
                            let v: f64 = [a, b, c].iter().zip(&w).filter(|(x, _)| **x >= 0.75).map(|(_, w)| w).sum();
                            best = best.max(v);
                        }
                    }
                }
            }
        }
        assert!((r.value - best).abs() < 1e-3, "{} vs {best}", r.value);
    }

    #[test]
    fn more_restarts_never_hurt() {
        let spec = PriorClassSpec::new(
            MomentMap::powers(Support::unit(), 2),
            ConstraintSpec::equalities(&[0.4, 0.2]).unwrap(),
            None,
        )
        .unwrap();
        let p = reduce_prior(&QuantityOfInterest::tail(0.63), &spec, Direction::Sup).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in [1, 2, 4, 8] {
            let v = solve(&p, &SolverConfig::default().with_restarts(k)).unwrap().value;
            assert!(v >= last - 1e-12);
            last = v;
        }
    }

    #[test]
    fn witness_replay_reproduces_value() {
        let obs = Observation::new(Support::unit(), vec![0.2, 0.55, 0.9], 0.02).unwrap();
        let p = reduce_posterior(&QuantityOfInterest::tail(0.5), &mean_spec(0.25), &obs, Direction::Sup, PosteriorOptions::default())
            .unwrap();
        let r = solve(&p, &cfg()).unwrap();
        let e = p.evaluate(r.witness.as_ref().unwrap()).unwrap();
        assert!((e.value - r.value).abs() <= 1e-9);
    }

    pub(crate) fn coin_program() -> ReducedProgram {
        let s = Support::unit();
        let heads = Observation::new(s, vec![1.0; 10], 0.5).unwrap();
        let tails_mass = MomentFn::Custom(AtomFn::new("1{x=0}", |x| f64::from(x == 0.0)).with_breakpoints(vec![0.0]));
        let spec = PriorClassSpec::new(
            MomentMap::new(s, vec![tails_mass]).unwrap(),
            ConstraintSpec::equalities(&[0.5 * 101.0 / 102.0]).unwrap(),
            None,
        )
        .unwrap();
        let unfair = QuantityOfInterest::custom(MeasureFn::new("unfair", |m| f64::from(m.point_mass(1.0) == 1.0)), Some(0.0), Some(1.0))
            .unwrap();
        let unfair_coin = DiscreteMeasure::dirac(s, 1.0).unwrap();
        let fair_coin = DiscreteMeasure::new(s, vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        reduce_posterior(&unfair, &spec, &heads, Direction::Sup, PosteriorOptions::limit())
            .unwrap()
            .pinned_to(vec![Candidate::new(unfair_coin), Candidate::new(fair_coin)])
    }

    #[test]
    fn pinned_coin_prior() {
        let r = solve_fractional(&coin_program(), &cfg()).unwrap();
        assert!((r.value - 1.0 / (1.0 + 101.0 * 2f64.powi(-10))).abs() < 1e-12);
    }

    #[test]
    fn coin_threshold_matches_fractional() {
        let p = coin_program();
        let t = posterior_by_threshold(&p, &SolverConfig::default().with_restarts(1), 1e-7).unwrap();
        assert!((t - 1.0 / (1.0 + 101.0 * 2f64.powi(-10))).abs() < 1e-6, "{t}");
    }

    #[test]
    fn threshold_resolves_vanishing_data_probabilities() {
        // the sup is approached by measures with ball mass ε, so V(λ) ~ (1 - λ)^4
        let obs = Observation::new(Support::unit(), crate::scenarios::data_centers(3), 0.01).unwrap();
        let p = reduce_posterior(&QuantityOfInterest::tail(0.75), &mean_spec(0.375), &obs, Direction::Sup, PosteriorOptions::default())
            .unwrap();
        let f = solve_fractional(&p, &cfg()).unwrap().value;
        let t = posterior_by_threshold(&p, &cfg(), 1e-6).unwrap();
        assert!((f - t).abs() <= 1e-4, "{f} vs {t}");
    }

    #[test]
    fn flat_band_gives_prior_value() {
        let obs = Observation::new(Support::unit(), vec![0.3, 0.6], 0.01).unwrap();
        let spec = mean_spec(0.375).with_band(DataBand::joint(1.0).unwrap());
        let p = reduce_posterior(&QuantityOfInterest::tail(0.75), &spec, &obs, Direction::Sup, PosteriorOptions::limit()).unwrap();
        let r = solve_fractional(&p, &cfg()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn learning_band_alpha_two() {
        let obs = Observation::new(Support::unit(), vec![0.3, 0.6], 0.01).unwrap();
        let spec = mean_spec(0.375).with_band(DataBand::joint(2.0).unwrap());
        let p = reduce_posterior(&QuantityOfInterest::tail(0.75), &spec, &obs, Direction::Sup, PosteriorOptions::limit()).unwrap();
        let r = solve_fractional(&p, &cfg()).unwrap();
        assert!((r.value - 0.8).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn brittle_limit_posterior_reaches_one() {
        let obs = Observation::new(Support::unit(), vec![0.2, 0.4, 0.9], 0.01).unwrap();
        let p = reduce_posterior(&QuantityOfInterest::tail(0.5), &mean_spec(0.25), &obs, Direction::Sup, PosteriorOptions::limit())
            .unwrap();
        let r = solve_fractional(&p, &cfg()).unwrap();
        assert!(r.value > 1.0 - 1e-3, "{r:?}");
        assert!(r.near_singular);
        let lo = reduce_posterior(&QuantityOfInterest::tail(0.5), &mean_spec(0.25), &obs, Direction::Inf, PosteriorOptions::limit())
            .unwrap();
        let r = solve_fractional(&lo, &cfg()).unwrap();
        assert!(r.value < 1e-3, "{r:?}");
    }

    #[test]
    fn no_data_posterior_equals_prior() {
        let obs = Observation::none(Support::unit());
        let p = reduce_posterior(&QuantityOfInterest::tail(0.5), &mean_spec(0.25), &obs, Direction::Sup, PosteriorOptions::default())
            .unwrap();
        assert!((solve(&p, &cfg()).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn null_event_is_an_error() {
        // every candidate misses the ball around 0.5: class confined to {0, 1}
        let s = Support::unit();
        let obs = Observation::new(s, vec![0.5], 0.01).unwrap();
        let spec = mean_spec(0.3);
        let p = reduce_posterior(&QuantityOfInterest::tail(0.5), &spec, &obs, Direction::Sup, PosteriorOptions::default())
            .unwrap()
            .pinned_to(vec![
                Candidate::new(DiscreteMeasure::dirac(s, 0.0).unwrap()),
                Candidate::new(DiscreteMeasure::dirac(s, 1.0).unwrap()),
            ]);
        assert!(matches!(solve(&p, &cfg()), Err(Error::NullEvent)));
    }

    #[test]
    fn infeasible_class_reports_status() {
        let spec = PriorClassSpec::new(
            MomentMap::powers(Support::unit(), 2),
            ConstraintSpec::equalities(&[0.5, 0.1]).unwrap(),
            None,
        )
        .unwrap();
        let p = reduce_prior(&QuantityOfInterest::tail(0.5), &spec, Direction::Sup).unwrap();
        let r = solve(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.value, f64::NEG_INFINITY);
    }

    #[test]
    fn redundant_constraint_changes_nothing() {
        let one = reduce_prior(&QuantityOfInterest::tail(0.6), &mean_spec(0.3), Direction::Sup).unwrap();
        let s = Support::unit();
        let twice = MomentFn::Custom(AtomFn::new("2x", |x| 2.0 * x));
        let spec = PriorClassSpec::new(
            MomentMap::new(s, vec![MomentFn::Power(1), twice]).unwrap(),
            ConstraintSpec::equalities(&[0.3, 0.6]).unwrap(),
            None,
        )
        .unwrap();
        let two = reduce_prior(&QuantityOfInterest::tail(0.6), &spec, Direction::Sup).unwrap();
        let a = solve(&one, &cfg()).unwrap().value;
        let b = solve(&two, &cfg()).unwrap().value;
        assert!((a - b).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn positive_program_scale_invariance_and_factorization() {
        let s = Support::unit();
        let psi0 = MomentFn::Custom(AtomFn::new("1+x", |x| 1.0 + x));
        let phi = QuantityOfInterest::atom_affine(AtomFn::new("(1+x)1{x>=0.5}", |x| (1.0 + x) * f64::from(x >= 0.5)).with_breakpoints(vec![0.5]), Some(0.0), None)
            .unwrap();
        let psis = vec![MomentFn::Custom(AtomFn::new("x-0.3(1+x)", |x| x - 0.3 * (1.0 + x)))];
        let f = reduce_positive(&phi, psi0.clone(), psis.clone(), s, Direction::Sup, true).unwrap();
        let u = reduce_positive(&phi, psi0, psis, s, Direction::Sup, false).unwrap();
        let rf = solve(&f, &cfg()).unwrap();
        let ru = solve(&u, &cfg()).unwrap();
        assert!((rf.value - ru.value).abs() < 1e-6, "{} {}", rf.value, ru.value);
        let w = rf.witness.unwrap();
        assert!((f.evaluate(&w).unwrap().denominator - 1.0).abs() < 1e-9);
        for c in [0.5, 2.0, 10.0] {
            let scaled = Witness { measures: vec![w.measures[0].scaled(c).unwrap()], ..w.clone() };
            assert_eq!(f.evaluate(&scaled).unwrap().value, f.evaluate(&w).unwrap().value);
        }
    }

    #[test]
    fn bracket_too_small_and_constant_family() {
        assert!(matches!(lambda_threshold(|l| Ok(0.7 - l), 0.0, 0.5, 1e-9), Err(Error::BracketTooSmall { .. })));
        let t = lambda_threshold(|l| Ok(0.3 * (0.42 - l)), 0.0, 1.0, 1e-10).unwrap();
        assert!((t - 0.42).abs() < 1e-9);
    }
}
