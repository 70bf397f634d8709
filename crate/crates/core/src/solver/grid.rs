//! Linear programs over measures supported on a fixed grid.

use super::lp::{self, LpOutcome, LpRow};
use crate::error::Result;
use crate::measures::Interval;
use crate::numeric::solve_dense;

/// Constraint residual accepted for a grid measure.
pub(crate) const GRID_RESIDUAL: f64 = 1e-8;

/// Optimal grid measure: weights per grid point and objective value.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GridSolution {
    pub weights: Vec<f64>,
    pub value: f64,
    pub residual: f64,
}

pub(crate) fn residual(weights: &[f64], feats: &[Vec<f64>], intervals: &[Interval]) -> f64 {
    let mut r = (weights.iter().sum::<f64>() - 1.0).abs();
    for (i, iv) in intervals.iter().enumerate() {
        let v: f64 = weights.iter().zip(feats).map(|(w, f)| w * f[i]).sum();
        r = r.max(iv.violation(v));
    }
    r
}

/// Least-squares re-solve of the rows that are tight at `w`, on the
/// support of `w`.
fn polish_tight(w: &[f64], feats: &[Vec<f64>], intervals: &[Interval]) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
    let k = support.len();
    let mut rows: Vec<(Vec<f64>, f64)> = vec![(vec![1.0; k], 1.0)];
    for (i, iv) in intervals.iter().enumerate() {
        let v: f64 = support.iter().map(|&j| w[j] * feats[j][i]).sum();
        let tol = 1e-7 * (1.0 + v.abs());
        let coeffs: Vec<f64> = support.iter().map(|&j| feats[j][i]).collect();
        if (v - iv.lo).abs() <= tol {
            rows.push((coeffs, iv.lo));
        } else if (v - iv.hi).abs() <= tol {
            rows.push((coeffs, iv.hi));
        }
    }
    // minimum-norm correction: A d = r, d = Aᵀ (A Aᵀ)⁻¹ r
    let m = rows.len();
    let r: Vec<f64> = rows
        .iter()
        .map(|(c, b)| b - c.iter().zip(&support).map(|(a, &j)| a * w[j]).sum::<f64>())
        .collect();
    let mut g = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            g[a][b] = rows[a].0.iter().zip(&rows[b].0).map(|(x, y)| x * y).sum();
        }
    }
    let mut rhs = r;
    let y = solve_dense(&mut g, &mut rhs)?;
    let mut out = w.to_vec();
    for (t, &j) in support.iter().enumerate() {
        let d: f64 = (0..m).map(|a| rows[a].0[t] * y[a]).sum();
        out[j] += d;
        if out[j] < -1e-12 {
            return None;
        }
        out[j] = out[j].max(0.0);
    }
    Some(out)
}

/// `max` (or `min`) of `Σ w_j obj_j` over probability weights on the grid
/// with `Σ w_j feats_j ∈ intervals`. `None` when infeasible.
pub(crate) fn optimize(
    obj: &[f64],
    feats: &[Vec<f64>],
    intervals: &[Interval],
    maximize: bool,
) -> Result<Option<GridSolution>> {
    let n = obj.len();
    let mut rows = vec![LpRow { coeffs: vec![1.0; n], lo: 1.0, hi: 1.0 }];
    for (i, iv) in intervals.iter().enumerate() {
        rows.push(LpRow { coeffs: feats.iter().map(|f| f[i]).collect(), lo: iv.lo, hi: iv.hi });
    }
    let outcome = if maximize { lp::maximize(obj, &rows)? } else { lp::minimize(obj, &rows)? };
    let LpOutcome::Optimal { x, .. } = outcome else { return Ok(None) };
    let mut w: Vec<f64> = x.iter().map(|&v| if v > 1e-15 { v } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Ok(None);
    }
    w.iter_mut().for_each(|v| *v /= total);
    let mut res = residual(&w, feats, intervals);
    if res > 1e-12 {
        if let Some(p) = polish_tight(&w, feats, intervals) {
            let r2 = residual(&p, feats, intervals);
            if r2 < res {
                w = p;
                res = r2;
            }
        }
    }
    if res > GRID_RESIDUAL {
        return Ok(None);
    }
    let value = w.iter().zip(obj).map(|(a, b)| a * b).sum();
    Ok(Some(GridSolution { weights: w, value, residual: res }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_markov_bound() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let obj: Vec<f64> = xs.iter().map(|&x| f64::from(x >= 0.6)).collect();
        let feats: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let s = optimize(&obj, &feats, &[Interval::point(0.3)], true).unwrap().unwrap();
        assert!((s.value - 0.5).abs() < 1e-9);
        assert!(s.residual <= GRID_RESIDUAL);
        let s = optimize(&obj, &feats, &[Interval::point(0.3)], false).unwrap().unwrap();
        assert!(s.value.abs() < 1e-12);
        assert!(optimize(&obj, &feats, &[Interval::point(1.3)], true).unwrap().is_none());
    }
}
