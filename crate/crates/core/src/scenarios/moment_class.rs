use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Check, ScenarioReport, CLOSED_FORM_TOL};
use crate::error::{Error, Result};
use crate::measures::{Interval, MomentMap, Observation, QuantityOfInterest, Support};
use crate::posterior::{brittleness_verdict, VerdictOptions};
use crate::reduction::MomentSampler;
use crate::solver::grid;

/// Distribution of `(E_μ[X], …, E_μ[X^k])` whose first coordinate is
/// uniform and whose `j`-th coordinate is uniform on its attainable range
/// given the previous ones. Ranges are computed over measures on a grid.
#[derive(Debug, Clone)]
pub struct IterativeUniform {
    k: usize,
    support: Support,
    feats: Vec<Vec<f64>>,
}

impl IterativeUniform {
    pub fn new(support: Support, k: usize, grid_points: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("need at least one moment".into()));
        }
        let psi = MomentMap::powers(support, k as u32);
        let feats = support.grid(grid_points).into_iter().map(|x| psi.eval_point(x)).collect();
        Ok(Self { k, support, feats })
    }

    /// `[min, max]` of the `j`-th moment (0-based) given the first `j`.
    pub fn range(&self, prefix: &[f64]) -> Result<Option<(f64, f64)>> {
        let j = prefix.len();
        if j == 0 {
            return Ok(Some((self.support.lo(), self.support.hi())));
        }
        let feats: Vec<Vec<f64>> = self.feats.iter().map(|f| f[..j].to_vec()).collect();
        let obj: Vec<f64> = self.feats.iter().map(|f| f[j]).collect();
        let rows: Vec<Interval> = prefix.iter().map(|&q| Interval::point(q)).collect();
        let lo = grid::optimize(&obj, &feats, &rows, false)?;
        let hi = grid::optimize(&obj, &feats, &rows, true)?;
        Ok(lo.zip(hi).map(|(l, h)| (l.value, h.value.max(l.value))))
    }
}

impl MomentSampler for IterativeUniform {
    fn dim(&self) -> usize {
        self.k
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let mut q = Vec::with_capacity(self.k);
        while q.len() < self.k {
            let (lo, hi) = self.range(&q).ok().flatten()?;
            let u: f64 = rng.random();
            q.push(lo + u * (hi - lo));
        }
        Some(q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentClassOptions {
    pub k: usize,
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub grid_points: usize,
    pub delta_check: f64,
}

impl Default for MomentClassOptions {
    fn default() -> Self {
        Self { k: 2, n: 5, delta: 0.01, seed: 1, n_samples: 400, grid_points: 101, delta_check: 0.05 }
    }
}

/// Brittleness verdict for `Φ = E_μ[X]` over priors whose moment vector
/// follows [`IterativeUniform`], with `n` equispaced data points.
pub fn scenario_moment_class(o: &MomentClassOptions) -> Result<ScenarioReport> {
    if o.n == 0 || !(o.delta > 0.0) {
        return Err(Error::InvalidInput("moment class scenario needs data and a positive radius".into()));
    }
    let t = Instant::now();
    let s = Support::unit();
    let centers: Vec<f64> = (0..o.n).map(|i| (i as f64 + 0.5) / o.n as f64).collect();
    let obs = Observation::new(s, centers, o.delta)?;
    let sampler = IterativeUniform::new(s, o.k, o.grid_points)?;
    let opts = VerdictOptions {
        delta_check: o.delta_check,
        n_samples: o.n_samples,
        seed: o.seed,
        grid_points: o.grid_points,
        ..VerdictOptions::default()
    };
    let v = brittleness_verdict(&QuantityOfInterest::mean(), &MomentMap::powers(s, o.k as u32), &sampler, &obs, &opts)?;
    let separated = v.separation_argument_applies;
    let flag = |b: bool| f64::from(u8::from(b));
    let mut checks = vec![Check::near("separation_argument", flag(separated), flag(o.n >= o.k + 2), 0.0, "property")];
    if o.n >= o.k + 2 {
        checks.extend([
            Check::near("vanishing_data", flag(v.vanishing_data), 1.0, 0.0, "property"),
            Check::near("near_sup", flag(v.near_sup), 1.0, 0.0, "property"),
            Check::near("near_inf", flag(v.near_inf), 1.0, 0.0, "property"),
            Check::near("implied_upper", v.implied_upper.unwrap_or(f64::NAN), 1.0, CLOSED_FORM_TOL, "limit"),
            Check::near("implied_lower", v.implied_lower.unwrap_or(f64::NAN), 0.0, CLOSED_FORM_TOL, "limit"),
        ]);
    }
    let params = [
        ("k", o.k as f64),
        ("n", o.n as f64),
        ("delta", o.delta),
        ("seed", o.seed as f64),
        ("n_samples", o.n_samples as f64),
        ("delta_check", o.delta_check),
    ];
    Ok(ScenarioReport::new("moment_class", &params, checks, json!({ "verdict": v })).timed(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sample_rng;

    #[test]
    fn second_moment_range() {
        let q = IterativeUniform::new(Support::unit(), 2, 101).unwrap();
        let (lo, hi) = q.range(&[0.3]).unwrap().unwrap();
        assert!((lo - 0.09).abs() < 1e-9 && (hi - 0.3).abs() < 1e-9, "{lo} {hi}");
        let x = q.sample(&mut sample_rng(4, 0)).unwrap();
        assert!(x[1] >= x[0] * x[0] - 1e-9 && x[1] <= x[0] + 1e-9);
    }

    #[test]
    fn single_moment_class_is_brittle() {
        let r = scenario_moment_class(&MomentClassOptions { k: 1, n: 3, ..MomentClassOptions::default() })
            .unwrap();
        assert!(r.pass, "{r:#?}");
    }

    #[test]
    fn few_points_lack_separation() {
        let r = scenario_moment_class(&MomentClassOptions { k: 2, n: 3, n_samples: 20, ..MomentClassOptions::default() })
            .unwrap();
        assert!(r.pass, "{r:#?}");
        assert_eq!(r.check("separation_argument").unwrap().computed, 0.0);
    }
}
