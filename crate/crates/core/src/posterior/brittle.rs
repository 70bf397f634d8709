use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{measure_data, BALL_MASS_FLOOR};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Interval, MomentMap, Observation, QuantityOfInterest, POINT_TOL};
use crate::numeric::{ext_f64_opt, sample_rng};
use crate::reduction::{DataMode, MomentSampler};
use crate::solver::grid;

/// Data probability at or below which a grid measure counts as missing
/// the data.
pub const DATA_FLOOR: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerdictOptions {
    pub delta_check: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub grid_points: usize,
    /// Lower bound on every ball mass of the near-extreme witnesses.
    pub min_ball_mass: f64,
    pub mode: DataMode,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        Self {
            delta_check: 0.05,
            n_samples: 200,
            seed: 0,
            grid_points: 101,
            min_ball_mass: BALL_MASS_FLOOR,
            mode: DataMode::Finite,
        }
    }
}

/// Outcome of the two sufficient conditions for brittleness, checked on
/// grid measures for sampled moment vectors `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrittlenessVerdict {
    /// Every accepted `q` has a grid measure in its fiber with zero data
    /// probability.
    pub vanishing_data: bool,
    /// Some accepted `q` has a grid measure in its fiber with positive data
    /// probability and `Φ` within `δ_check` of `sup_A Φ`.
    pub near_sup: bool,
    /// Same as `near_sup` for `inf_A Φ`.
    pub near_inf: bool,
    /// Grid `U(A)` when `vanishing_data && near_sup`.
    #[serde(with = "ext_f64_opt")]
    pub implied_upper: Option<f64>,
    /// Grid `L(A)` when `vanishing_data && near_inf`.
    #[serde(with = "ext_f64_opt")]
    pub implied_lower: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub zero_data_hits: usize,
    pub near_sup_hits: usize,
    pub near_inf_hits: usize,
    pub grid_resolution: f64,
    /// The data has at least `k + 2` disjoint balls, so every fiber holds a
    /// `k + 1`-atom measure missing one of them.
    pub separation_argument_applies: bool,
}

impl BrittlenessVerdict {
    pub fn conditions(&self) -> (bool, bool) {
        (self.vanishing_data, self.near_sup)
    }
}

enum Outcome {
    Rejected,
    Accepted { zero: bool, up: bool, down: bool },
}

struct Grid {
    pts: Vec<f64>,
    feats: Vec<Vec<f64>>,
    phi: Vec<f64>,
    balls: Vec<Vec<f64>>,
    sup: f64,
    inf: f64,
}

fn build_grid(phi: &QuantityOfInterest, psi: &MomentMap, obs: &Observation, opts: &VerdictOptions) -> Result<Grid> {
    let support = psi.support();
    let mut pts = support.grid(opts.grid_points);
    pts.extend(obs.centers().iter().copied());
    pts.extend(phi.breakpoints());
    pts.extend(psi.breakpoints());
    pts.retain(|x| support.contains(*x));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let phi_vals: Vec<f64> = pts
        .iter()
        .map(|&x| phi.atom_value(x).ok_or_else(|| Error::InvalidInput("brittleness verdict needs an affine quantity of interest".into())))
        .collect::<Result<_>>()?;
    let mut centers = obs.centers().to_vec();
    centers.sort_by(f64::total_cmp);
    centers.dedup();
    let balls = centers
        .iter()
        .map(|&c| {
            pts.iter()
                .map(|&x| {
                    let inside = match opts.mode {
                        DataMode::Finite => (x - c).abs() < obs.radius(),
                        DataMode::Limit => (x - c).abs() <= POINT_TOL,
                    };
                    f64::from(inside)
                })
                .collect()
        })
        .collect();
    let sup = phi_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = phi_vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Grid { feats: pts.iter().map(|&x| psi.eval_point(x)).collect(), pts, phi: phi_vals, balls, sup, inf })
}

fn check(q: &[f64], g: &Grid, psi: &MomentMap, obs: &Observation, opts: &VerdictOptions) -> Result<Outcome> {
    let support = psi.support();
    let fiber: Vec<Interval> = q.iter().map(|&v| Interval::point(v)).collect();
    let zeros = vec![0.0; g.pts.len()];
    let Some(basic) = grid::optimize(&zeros, &g.feats, &fiber, true)? else { return Ok(Outcome::Rejected) };
    let to_measure = |w: &[f64]| -> Result<DiscreteMeasure> {
        let (a, w): (Vec<f64>, Vec<f64>) = g.pts.iter().zip(w).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).unzip();
        DiscreteMeasure::new(*support, a, w)
    };
    let mut zero = measure_data(&to_measure(&basic.weights)?, obs, opts.mode) <= DATA_FLOOR;
    if !zero {
        // D is at most the mass of any single ball
        for ball in &g.balls {
            if let Some(s) = grid::optimize(ball, &g.feats, &fiber, false)? {
                if s.value <= DATA_FLOOR {
                    zero = true;
                    break;
                }
            }
        }
    }
    let mut feats = g.feats.clone();
    let mut rows = fiber.clone();
    let floor = opts.min_ball_mass.max(BALL_MASS_FLOOR);
    for ball in &g.balls {
        for (f, b) in feats.iter_mut().zip(ball) {
            f.push(*b);
        }
        rows.push(Interval::new(floor, 1.0));
    }
    let up = grid::optimize(&g.phi, &feats, &rows, true)?.is_some_and(|s| s.value > g.sup - opts.delta_check);
    let down = grid::optimize(&g.phi, &feats, &rows, false)?.is_some_and(|s| s.value < g.inf + opts.delta_check);
    Ok(Outcome::Accepted { zero, up, down })
}

/// Checks, on grid measures, that the data probability vanishes on the
/// fibers `Ψ⁻¹(q)` and that fibers with positive data probability reach
/// near the extremes of `Φ`, for `q` drawn from `sampler`.
pub fn brittleness_verdict<S>(
    phi: &QuantityOfInterest,
    psi: &MomentMap,
    sampler: &S,
    obs: &Observation,
    opts: &VerdictOptions,
) -> Result<BrittlenessVerdict>
where
    S: MomentSampler + Sync,
{
    if sampler.dim() != psi.dim() {
        return Err(Error::InvalidInput(format!("sampler dimension {} differs from {} moments", sampler.dim(), psi.dim())));
    }
    if obs.is_empty() {
        return Err(Error::InvalidInput("brittleness verdict needs data".into()));
    }
    if !(opts.delta_check > 0.0) || opts.n_samples == 0 {
        return Err(Error::InvalidInput("verdict needs delta_check > 0 and at least one sample".into()));
    }
    let g = build_grid(phi, psi, obs, opts)?;
    let draws: Vec<Option<Vec<f64>>> = match sampler.atoms() {
        Some(atoms) => atoms.into_iter().filter(|(_, p)| *p > 0.0).map(|(q, _)| Some(q)).collect(),
        None => (0..opts.n_samples).map(|i| sampler.sample(&mut sample_rng(opts.seed, i as u64))).collect(),
    };
    let outcomes: Vec<Outcome> = draws
        .par_iter()
        .map(|d| match d {
            Some(q) => check(q, &g, psi, obs, opts),
            None => Ok(Outcome::Rejected),
        })
        .collect::<Result<_>>()?;
    let total = outcomes.len();
    let (mut accepted, mut zero_hits, mut up_hits, mut down_hits) = (0, 0, 0, 0);
    for o in &outcomes {
        if let Outcome::Accepted { zero, up, down } = *o {
            accepted += 1;
            zero_hits += usize::from(zero);
            up_hits += usize::from(up);
            down_hits += usize::from(down);
        }
    }
    let rejected = total - accepted;
    if 2 * rejected > total {
        return Err(Error::GridTooCoarse { rejected, total });
    }
    let vanishing = accepted > 0 && zero_hits == accepted;
    let (near_sup, near_inf) = (up_hits > 0, down_hits > 0);
    Ok(BrittlenessVerdict {
        vanishing_data: vanishing,
        near_sup,
        near_inf,
        implied_upper: (vanishing && near_sup).then_some(g.sup),
        implied_lower: (vanishing && near_inf).then_some(g.inf),
        accepted,
        rejected,
        zero_data_hits: zero_hits,
        near_sup_hits: up_hits,
        near_inf_hits: down_hits,
        grid_resolution: psi.support().width() / (opts.grid_points.max(2) - 1) as f64,
        separation_argument_applies: obs.disjoint_ball_count() >= psi.dim() + 2,
    })
}

/// Empirical `Q`-essential supremum of `Φ ∘ section`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssentialSup {
    pub value: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `ess sup_{q∼Q} Φ(section(q))`. Each `section(q)`
/// must lie in the fiber of `q` and give the data positive probability.
pub fn essential_sup_bound<S, F>(
    phi: &QuantityOfInterest,
    psi: &MomentMap,
    sampler: &S,
    section: F,
    obs: &Observation,
    mode: DataMode,
    n_samples: usize,
    seed: u64,
) -> Result<EssentialSup>
where
    S: MomentSampler + Sync,
    F: Fn(&[f64]) -> Result<DiscreteMeasure> + Sync,
{
    if n_samples == 0 {
        return Err(Error::InvalidInput("essential supremum needs at least one sample".into()));
    }
    let values: Vec<Option<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let Some(q) = sampler.sample(&mut sample_rng(seed, i as u64)) else { return Ok(None) };
            let mu = section(&q)?;
            let gap = psi.eval(&mu).iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if gap > grid::GRID_RESIDUAL {
                return Err(Error::Precondition(format!("section misses the fiber of q = {q:?} by {gap:e}")));
            }
            if !(measure_data(&mu, obs, mode) > 0.0) {
                return Err(Error::Precondition(format!("section at q = {q:?} gives the data zero probability")));
            }
            phi.evaluate(&mu).map(Some)
        })
        .collect::<Result<_>>()?;
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::SamplerLeavesBody { rejected: n_samples, total: n_samples });
    }
    Ok(EssentialSup { value: kept.iter().copied().fold(f64::NEG_INFINITY, f64::max), samples: kept.len() })
}
