use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Check, ScenarioReport, QUADRATURE_TOL};
use crate::error::{Error, Result};

/// `θ` from which model b keeps the data region.
const THETA_SWITCH: f64 = 0.999;
/// Data point of both models.
const X1: f64 = 0.5;
/// Relative change on grid doubling above which quadrature is flagged.
const CONVERGENCE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelAbOptions {
    /// Ball radius of the observation.
    pub delta: f64,
    /// Width of the region suppressed by model b.
    pub delta_c: f64,
    /// Density factor inside the suppressed region.
    pub gap: f64,
    /// Midpoints per `θ` piece.
    pub theta_grid: usize,
    /// Midpoints per `x` piece.
    pub x_grid: usize,
}

impl Default for ModelAbOptions {
    fn default() -> Self {
        Self { delta: 0.005, delta_c: 0.01, gap: 1e-9, theta_grid: 4000, x_grid: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelAbResult {
    pub post_a: f64,
    pub post_b: f64,
    /// Prior means of `E_μ[X]`.
    pub prior_a: f64,
    pub prior_b: f64,
    /// `sup_θ d_TV(μ^a(θ), μ^b(θ))`.
    pub tv_max: f64,
}

/// Density of model a.
fn f_a(x: f64, theta: f64) -> f64 {
    let (p, r) = (1.0 / theta, 1.0 / (1.0 - theta));
    (1.0 - theta) * (1.0 + p) * (1.0 - x).powf(p) + theta * (1.0 + r) * x.powf(r)
}

/// `E[X]` under model a.
fn mean_a(theta: f64) -> f64 {
    let (p, r) = (1.0 / theta, 1.0 / (1.0 - theta));
    (1.0 - theta) / (p + 2.0) + theta * (r + 1.0) / (r + 2.0)
}

/// Midpoint rule for `∫ g` over `[lo, hi]`.
fn midpoint(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| g(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// `∫ g f_a` over the parts of `[lo, hi]` inside and outside the gap
/// `(gl, gu)`.
fn split(g: &impl Fn(f64) -> f64, theta: f64, lo: f64, hi: f64, gl: f64, gu: f64, n: usize) -> (f64, f64) {
    let h = |x: f64| g(x) * f_a(x, theta);
    let (il, iu) = (lo.max(gl), hi.min(gu));
    let inside = midpoint(h, il, iu, n);
    let outside = midpoint(h, lo, hi.min(gl), n) + midpoint(h, lo.max(gu), hi, n);
    (inside, outside)
}

struct Sums {
    num: f64,
    den: f64,
    prior: f64,
    tv: f64,
}

fn theta_sums(o: &ModelAbOptions, suppress: bool, theta_grid: usize, x_grid: usize) -> Sums {
    let (bl, bu) = (X1 - o.delta, X1 + o.delta);
    let (gl, gu) = (X1 - 0.5 * o.delta_c, X1 + 0.5 * o.delta_c);
    let mut s = Sums { num: 0.0, den: 0.0, prior: 0.0, tv: 0.0 };
    for (lo, hi) in [(0.0, THETA_SWITCH), (THETA_SWITCH, 1.0)] {
        let h = (hi - lo) / theta_grid as f64;
        for i in 0..theta_grid {
            let theta = lo + (i as f64 + 0.5) * h;
            let ma = mean_a(theta);
            let (bin, bout) = split(&|_| 1.0, theta, bl, bu, gl, gu, x_grid);
            let (mean, ball) = if suppress && theta < THETA_SWITCH {
                let (gmass, _) = split(&|_| 1.0, theta, gl, gu, gl, gu, x_grid);
                let (gx, _) = split(&|x| x, theta, gl, gu, gl, gu, x_grid);
                let z = 1.0 - (1.0 - o.gap) * gmass;
                s.tv = s.tv.max(0.5 * ((1.0 - gmass) * (1.0 / z - 1.0) + gmass * (1.0 - o.gap / z).abs()));
                ((ma - (1.0 - o.gap) * gx) / z, (bout + o.gap * bin) / z)
            } else {
                (ma, bin + bout)
            };
            s.num += h * mean * ball;
            s.den += h * ball;
            s.prior += h * mean;
        }
    }
    s
}

fn validate(o: &ModelAbOptions) -> Result<()> {
    let ok = 0.0 < o.delta
        && o.delta < o.delta_c
        && o.delta_c < 1.0
        && (0.0..=1.0).contains(&o.gap)
        && o.theta_grid > 0
        && o.x_grid > 0;
    if !ok {
        return Err(Error::InvalidInput(format!("need 0 < delta < delta_c < 1, gap in [0, 1] and positive grids: {o:?}")));
    }
    Ok(())
}

/// Posterior means of `E_μ[X]` under a uniform prior on `θ` for both
/// models, by midpoint quadrature in `θ` and `x`.
pub fn model_ab_posteriors(o: &ModelAbOptions) -> Result<ModelAbResult> {
    validate(o)?;
    let a = theta_sums(o, false, o.theta_grid, o.x_grid);
    let b = theta_sums(o, true, o.theta_grid, o.x_grid);
    if !(a.den > 0.0 && b.den > 0.0) {
        return Err(Error::NullEvent);
    }
    Ok(ModelAbResult { post_a: a.num / a.den, post_b: b.num / b.den, prior_a: a.prior, prior_b: b.prior, tv_max: b.tv })
}

/// The two-model flip: posterior `1/2` under model a, near `1` under the
/// slightly perturbed model b.
pub fn scenario_model_ab(o: &ModelAbOptions) -> Result<ScenarioReport> {
    let t = Instant::now();
    let r = model_ab_posteriors(o)?;
    let fine = model_ab_posteriors(&ModelAbOptions { theta_grid: 2 * o.theta_grid, x_grid: 2 * o.x_grid, ..o.clone() })?;
    let change = |c: f64, f: f64| (f - c).abs() / f.abs().max(f64::MIN_POSITIVE);
    let checks = vec![
        Check::near("post_a", r.post_a, 0.5, QUADRATURE_TOL, "closed_form"),
        Check::at_least("post_b", r.post_b, 0.95, 0.0, "limit"),
        Check::near("prior_a", r.prior_a, 0.5, QUADRATURE_TOL, "closed_form"),
        Check::near("refinement_change_a", change(r.post_a, fine.post_a), 0.0, CONVERGENCE_TOL, "property"),
        Check::near("refinement_change_b", change(r.post_b, fine.post_b), 0.0, CONVERGENCE_TOL, "property"),
    ];
    let params = [
        ("delta", o.delta),
        ("delta_c", o.delta_c),
        ("gap", o.gap),
        ("theta_grid", o.theta_grid as f64),
        ("x_grid", o.x_grid as f64),
    ];
    let details = json!({
        "result": r,
        "tv_max": r.tv_max,
        "tv_over_delta_c": r.tv_max / o.delta_c,
    });
    Ok(ScenarioReport::new("model_ab", &params, checks, details).timed(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `μ^a(θ)[lo, hi]` in closed form.
    fn mass_a(theta: f64, lo: f64, hi: f64) -> f64 {
        let (p, r) = (1.0 / theta, 1.0 / (1.0 - theta));
        (1.0 - theta) * ((1.0 - lo).powf(p + 1.0) - (1.0 - hi).powf(p + 1.0)) + theta * (hi.powf(r + 1.0) - lo.powf(r + 1.0))
    }

    #[test]
    fn density_is_normalized_and_symmetric() {
        for &theta in &[0.1, 0.37, 0.5, 0.9, 0.9995] {
            assert!((mass_a(theta, 0.0, 1.0) - 1.0).abs() < 1e-12);
            assert!((mean_a(theta) + mean_a(1.0 - theta) - 1.0).abs() < 1e-12);
            let q = midpoint(|x| f_a(x, theta), 0.495, 0.505, 64);
            assert!((q - mass_a(theta, 0.495, 0.505)).abs() <= 1e-6 * q + 1e-15);
        }
    }

    #[test]
    fn flip() {
        let r = model_ab_posteriors(&ModelAbOptions::default()).unwrap();
        assert!((r.post_a - 0.5).abs() <= 5e-3, "{r:?}");
        assert!(r.post_b >= 0.95, "{r:?}");
        assert!(r.tv_max > 0.0 && r.tv_max < 0.01, "{r:?}");
    }

    #[test]
    fn no_suppression_means_identical_models() {
        let o = ModelAbOptions { gap: 1.0, theta_grid: 500, ..ModelAbOptions::default() };
        let r = model_ab_posteriors(&o).unwrap();
        assert_eq!(r.post_a, r.post_b);
        assert_eq!(r.tv_max, 0.0);
    }

    #[test]
    fn rejects_bad_radii() {
        let o = ModelAbOptions { delta: 0.02, ..ModelAbOptions::default() };
        assert!(model_ab_posteriors(&o).is_err());
    }
}
