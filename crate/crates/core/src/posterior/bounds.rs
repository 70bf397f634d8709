use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    data_probability, data_probability_limit, DiscreteMeasure, Interval, Observation, QuantityOfInterest, POINT_TOL,
};
use crate::numeric::ext_f64;
use crate::reduction::{
    reduce_posterior, reduce_prior, Candidate, DataMode, Direction, PosteriorOptions, PriorClassSpec, ReducedProgram,
};
use crate::solver::grid::{self, GridSolution};
use crate::solver::{solve, SolveResult, SolveStatus, SolverConfig};

/// Lower bound on each ball mass for a grid measure to count as having
/// positive data probability.
pub const BALL_MASS_FLOOR: f64 = 1e-6;

/// Slack allowed in the ordering post-check of a sandwich.
pub const ORDER_TOL: f64 = 1e-9;

/// `sup` of the posterior value of `Φ` over the class given `obs`.
pub fn posterior_upper_bound(
    phi: &QuantityOfInterest,
    spec: &PriorClassSpec,
    obs: &Observation,
    cfg: &SolverConfig,
    opts: PosteriorOptions,
) -> Result<SolveResult> {
    posterior_bound(phi, spec, obs, cfg, opts, Direction::Sup, Vec::new())
}

/// `inf` counterpart of [`posterior_upper_bound`].
pub fn posterior_lower_bound(
    phi: &QuantityOfInterest,
    spec: &PriorClassSpec,
    obs: &Observation,
    cfg: &SolverConfig,
    opts: PosteriorOptions,
) -> Result<SolveResult> {
    posterior_bound(phi, spec, obs, cfg, opts, Direction::Inf, Vec::new())
}

fn posterior_bound(
    phi: &QuantityOfInterest,
    spec: &PriorClassSpec,
    obs: &Observation,
    cfg: &SolverConfig,
    opts: PosteriorOptions,
    dir: Direction,
    extra: Vec<Candidate>,
) -> Result<SolveResult> {
    let p = reduce_posterior(phi, spec, obs, dir, opts)?.with_candidates(extra);
    solve(&p, cfg)
}

/// The six bounds `L(A) ≤ L(Π) ≤ L(A_Π) ≤ U(A_Π) ≤ U(Π) ≤ U(A)`. With
/// data, `Π` and `A_Π` stand for their conditioned versions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSandwich {
    #[serde(rename = "L_A", with = "ext_f64")]
    pub l_a: f64,
    #[serde(rename = "L_Pi", with = "ext_f64")]
    pub l_pi: f64,
    #[serde(rename = "L_API", with = "ext_f64")]
    pub l_api: f64,
    #[serde(rename = "U_API", with = "ext_f64")]
    pub u_api: f64,
    #[serde(rename = "U_Pi", with = "ext_f64")]
    pub u_pi: f64,
    #[serde(rename = "U_A", with = "ext_f64")]
    pub u_a: f64,
}

impl BoundSandwich {
    pub fn as_array(&self) -> [f64; 6] {
        [self.l_a, self.l_pi, self.l_api, self.u_api, self.u_pi, self.u_a]
    }

    /// Whether `A_Π` was found nonempty.
    pub fn has_middle(&self) -> bool {
        self.l_api <= self.u_api
    }

    /// Largest ordering violation; `0` when ordered. An empty middle only
    /// requires the outer links.
    pub fn order_violation(&self) -> f64 {
        let a = self.as_array();
        let links: &[(usize, usize)] =
            if self.has_middle() { &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)] } else { &[(0, 1), (1, 4), (4, 5)] };
        links
            .iter()
            .map(|&(i, j)| if a[i].is_finite() && a[j].is_finite() { (a[i] - a[j]).max(0.0) } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

struct Level {
    sup: f64,
    inf: f64,
    witnesses: Vec<DiscreteMeasure>,
}

/// Sandwich for `Φ` over the class `spec`, optionally conditioned on `obs`.
///
/// `A` bounds are grid extremes, `Π` bounds come from the solver and
/// `A_Π` bounds from grid measures `μ` with `δ_μ` in the class. For
/// affine `Φ` and rectangle constraints the latter is a grid LP; otherwise
/// the grid Diracs and solver witnesses are filtered.
pub fn info_bound_sandwich(
    phi: &QuantityOfInterest,
    spec: &PriorClassSpec,
    obs: Option<&Observation>,
    grid_points: &[f64],
    cfg: &SolverConfig,
    opts: PosteriorOptions,
) -> Result<BoundSandwich> {
    let support = spec.support();
    let mut pts: Vec<f64> = grid_points.iter().copied().filter(|x| support.contains(*x)).collect();
    if pts.is_empty() {
        return Err(Error::InvalidInput("sandwich grid has no point inside the support".into()));
    }
    pts.extend(phi.breakpoints().into_iter().filter(|x| support.contains(*x)));
    pts.extend(spec.moment_map().breakpoints().into_iter().filter(|x| support.contains(*x)));
    if let Some(o) = obs {
        pts.extend(o.centers().iter().copied());
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let middle = middle_level(phi, spec, obs, &pts, opts.mode)?;
    let extra: Vec<Candidate> = middle.witnesses.iter().cloned().map(Candidate::new).collect();
    let (u_pi, w_up) = pi_level(phi, spec, obs, cfg, opts, Direction::Sup, extra.clone())?;
    let (l_pi, w_lo) = pi_level(phi, spec, obs, cfg, opts, Direction::Inf, extra)?;

    let mut outer: Vec<DiscreteMeasure> = Vec::new();
    for &x in &pts {
        outer.push(DiscreteMeasure::dirac(*support, x)?);
    }
    outer.extend(w_up.into_iter().chain(w_lo).chain(middle.witnesses.iter().cloned()));
    let (mut u_a, mut l_a) = (f64::NEG_INFINITY, f64::INFINITY);
    if phi.is_affine() {
        for mu in &outer {
            for &x in mu.atoms() {
                let v = phi.atom_value(x).unwrap_or(f64::NAN);
                u_a = u_a.max(v);
                l_a = l_a.min(v);
            }
        }
    } else {
        for mu in &outer {
            let v = phi.evaluate(mu)?;
            u_a = u_a.max(v);
            l_a = l_a.min(v);
        }
    }
    let s = BoundSandwich { l_a, l_pi, l_api: middle.inf, u_api: middle.sup, u_pi, u_a };
    let v = s.order_violation();
    if v > ORDER_TOL {
        return Err(Error::Evaluation(format!("sandwich ordering violated by {v:e}: {:?}", s.as_array())));
    }
    Ok(s)
}

fn pi_level(
    phi: &QuantityOfInterest,
    spec: &PriorClassSpec,
    obs: Option<&Observation>,
    cfg: &SolverConfig,
    opts: PosteriorOptions,
    dir: Direction,
    extra: Vec<Candidate>,
) -> Result<(f64, Vec<DiscreteMeasure>)> {
    let r = match obs {
        Some(o) => {
            // grid witnesses may carry one atom per tight row
            let slack = extra.iter().map(|c| c.measure.len()).max().unwrap_or(0);
            let base = spec.constraints().dim() + o.count() + 1;
            let opts = PosteriorOptions { atom_slack: opts.atom_slack.max(slack.saturating_sub(base)), ..opts };
            posterior_bound(phi, spec, o, cfg, opts, dir, extra)?
        }
        None => {
            let p: ReducedProgram = reduce_prior(phi, spec, dir)?.with_candidates(extra);
            solve(&p, cfg)?
        }
    };
    if r.status == SolveStatus::Infeasible {
        return Ok((r.value, Vec::new()));
    }
    let w = r.witness.map(|w| w.measures).unwrap_or_default();
    Ok((r.value, w))
}

fn distinct_centers(obs: &Observation) -> Vec<f64> {
    let mut c = obs.centers().to_vec();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

fn in_ball(x: f64, c: f64, obs: &Observation, mode: DataMode) -> bool {
    match mode {
        DataMode::Finite => (x - c).abs() < obs.radius(),
        DataMode::Limit => (x - c).abs() <= POINT_TOL,
    }
}

/// Data probability of a single measure under `mode`.
pub(crate) fn measure_data(mu: &DiscreteMeasure, obs: &Observation, mode: DataMode) -> f64 {
    match mode {
        DataMode::Finite => data_probability(mu, obs),
        DataMode::Limit => data_probability_limit(mu, obs),
    }
}

fn middle_level(
    phi: &QuantityOfInterest,
    spec: &PriorClassSpec,
    obs: Option<&Observation>,
    pts: &[f64],
    mode: DataMode,
) -> Result<Level> {
    let support = spec.support();
    let psi = spec.moment_map();
    let admissible = |mu: &DiscreteMeasure| -> bool {
        if spec.constraints().residual(&psi.eval(mu)) > grid::GRID_RESIDUAL {
            return false;
        }
        match obs {
            None => true,
            Some(o) => {
                measure_data(mu, o, mode) > 0.0 && spec.band().is_none_or(|b| b.admits(mu, o))
            }
        }
    };
    let empty = Level { sup: f64::NEG_INFINITY, inf: f64::INFINITY, witnesses: Vec::new() };
    if phi.is_affine() && spec.band().is_none() {
        let obj: Vec<f64> = pts.iter().map(|&x| phi.atom_value(x).unwrap_or(f64::NAN)).collect();
        let mut feats: Vec<Vec<f64>> = pts.iter().map(|&x| psi.eval_point(x)).collect();
        let mut intervals = spec.constraints().intervals().to_vec();
        if let Some(o) = obs {
            for c in distinct_centers(o) {
                for (f, &x) in feats.iter_mut().zip(pts) {
                    f.push(f64::from(in_ball(x, c, o, mode)));
                }
                intervals.push(Interval::new(BALL_MASS_FLOOR, 1.0));
            }
        }
        let hi = grid::optimize(&obj, &feats, &intervals, true)?;
        let lo = grid::optimize(&obj, &feats, &intervals, false)?;
        let (Some(hi), Some(lo)) = (hi, lo) else { return Ok(empty) };
        let to_measure = |g: &GridSolution| -> Result<DiscreteMeasure> {
            let (a, w): (Vec<f64>, Vec<f64>) =
                pts.iter().zip(&g.weights).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).unzip();
            DiscreteMeasure::new(*support, a, w)
        };
        let (mh, ml) = (to_measure(&hi)?, to_measure(&lo)?);
        let ok = admissible(&mh) && admissible(&ml);
        if ok {
            return Ok(Level { sup: hi.value, inf: lo.value, witnesses: vec![mh, ml] });
        }
        return Ok(empty);
    }
    let mut level = empty;
    for &x in pts {
        let mu = DiscreteMeasure::dirac(*support, x)?;
        if admissible(&mu) {
            let v = phi.evaluate(&mu)?;
            level.sup = level.sup.max(v);
            level.inf = level.inf.min(v);
            level.witnesses.push(mu);
        }
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{ConstraintSpec, MomentMap, Support};
    use crate::reduction::DataBand;

    fn cfg() -> SolverConfig {
        SolverConfig::default().with_restarts(8)
    }

    fn markov(q: f64) -> PriorClassSpec {
        PriorClassSpec::new(MomentMap::powers(Support::unit(), 1), ConstraintSpec::equalities(&[q]).unwrap(), None)
            .unwrap()
    }

    #[test]
    fn brittle_limit_instance_reaches_one() {
        let obs = Observation::new(Support::unit(), vec![0.1, 0.2, 0.3], 0.01).unwrap();
        let r = posterior_upper_bound(&QuantityOfInterest::tail(0.75), &markov(0.375), &obs, &cfg(), PosteriorOptions::limit())
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-3, "{}", r.value);
    }

    #[test]
    fn sure_event_gives_prior_bound() {
        let obs = Observation::new(Support::unit(), vec![0.5], 1.0).unwrap();
        let r = posterior_upper_bound(&QuantityOfInterest::tail(0.75), &markov(0.375), &obs, &cfg(), PosteriorOptions::default())
            .unwrap();
        assert!((r.value - 0.5).abs() < 1e-3, "{}", r.value);
    }

    #[test]
    fn band_alpha_ten() {
        let spec = markov(0.375).with_band(DataBand::joint(10.0).unwrap());
        let obs = Observation::new(Support::unit(), vec![0.2, 0.4, 0.9], 0.01).unwrap();
        let r = posterior_upper_bound(&QuantityOfInterest::tail(0.75), &spec, &obs, &cfg(), PosteriorOptions::limit())
            .unwrap();
        let exact = 1.0 / (1.0 + 1e-2 * (0.75 - 0.375) / 0.375);
        assert!((r.value - exact).abs() < 1e-3, "{} vs {exact}", r.value);
        assert!((r.value - 0.990).abs() < 1e-3);
    }

    #[test]
    fn unconstrained_sandwich_is_flat() {
        let spec = PriorClassSpec::unconstrained(Support::unit());
        let g = Support::unit().grid(21);
        let s = info_bound_sandwich(&QuantityOfInterest::tail(0.75), &spec, None, &g, &cfg(), PosteriorOptions::default())
            .unwrap();
        assert_eq!(s.as_array(), [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_moment_mean_sandwich_reaches_interval_ends() {
        let iv = vec![
            Interval::new(0.24821874260329976, 0.34236029615328567),
            Interval::new(0.05584761797309754, 0.12673858970737625),
        ];
        let spec = PriorClassSpec::new(MomentMap::powers(Support::unit(), 2), ConstraintSpec::new(iv).unwrap(), None)
            .unwrap();
        let g = Support::unit().grid(51);
        let s = info_bound_sandwich(&QuantityOfInterest::mean(), &spec, None, &g, &cfg(), PosteriorOptions::default())
            .unwrap();
        assert!((s.u_pi - 0.34236029615328567).abs() < 1e-12, "{s:?}");
        assert!((s.l_pi - 0.24821874260329976).abs() < 1e-12, "{s:?}");
        assert!(s.order_violation() <= ORDER_TOL);
    }

    #[test]
    fn markov_sandwich_chain() {
        let g = Support::unit().grid(101);
        let s = info_bound_sandwich(&QuantityOfInterest::tail(0.75), &markov(0.375), None, &g, &cfg(), PosteriorOptions::default())
            .unwrap();
        assert_eq!(s.l_a, 0.0);
        assert_eq!(s.u_a, 1.0);
        assert!((s.u_pi - 0.5).abs() < 1e-6, "{s:?}");
        assert!((s.u_api - 0.5).abs() < 1e-6, "{s:?}");
        assert!(s.l_pi.abs() < 1e-9 && s.l_api.abs() < 1e-9);
        assert_eq!(s.order_violation(), 0.0);
    }

    #[test]
    fn empty_middle_uses_sentinels() {
        // second moment 0.5 with mean 0.5: attainable by a prior over
        // measures, but no measure on a grid avoiding the atoms {0, 1} does it
        let s = Support::unit();
        let spec = PriorClassSpec::new(MomentMap::powers(s, 2), ConstraintSpec::equalities(&[0.5, 0.5]).unwrap(), None)
            .unwrap();
        let g: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let b = info_bound_sandwich(&QuantityOfInterest::mean(), &spec, None, &g, &cfg(), PosteriorOptions::default());
        let b = b.unwrap();
        assert_eq!(b.u_api, f64::NEG_INFINITY);
        assert_eq!(b.l_api, f64::INFINITY);
        assert!(!b.has_middle());
        let json = serde_json::to_string(&b).unwrap();
        assert!(json.contains("\"-inf\"") && json.contains("\"+inf\""), "{json}");
    }
}
