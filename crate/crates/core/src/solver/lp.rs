//! Thin wrapper over `microlp` for nonnegative-variable linear programs.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

/// `lo ≤ Σ_j coeffs[j] x_j ≤ hi`; either bound may be infinite.
#[derive(Debug, Clone)]
pub(crate) struct LpRow {
    pub coeffs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

/// `max Σ obj_j x_j` subject to `rows` and `x ≥ 0`.
pub(crate) fn maximize(obj: &[f64], rows: &[LpRow]) -> Result<LpOutcome> {
    optimize(OptimizationDirection::Maximize, obj, rows)
}

pub(crate) fn minimize(obj: &[f64], rows: &[LpRow]) -> Result<LpOutcome> {
    optimize(OptimizationDirection::Minimize, obj, rows)
}

fn optimize(dir: OptimizationDirection, obj: &[f64], rows: &[LpRow]) -> Result<LpOutcome> {
    let mut lp = Problem::new(dir);
    let vars: Vec<_> = obj.iter().map(|&c| lp.add_var(c, (0.0, f64::INFINITY))).collect();
    for row in rows {
        let expr: Vec<_> = vars
            .iter()
            .zip(&row.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(&v, &c)| (v, c))
            .collect();
        if row.lo == row.hi {
            lp.add_constraint(expr, ComparisonOp::Eq, row.lo);
            continue;
        }
        if row.lo.is_finite() {
            lp.add_constraint(expr.clone(), ComparisonOp::Ge, row.lo);
        }
        if row.hi.is_finite() {
            lp.add_constraint(expr, ComparisonOp::Le, row.hi);
        }
    }
    match lp.solve() {
        Ok(microlp::SolveOutcome::Solution(sol)) => {
            let x = vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
            Ok(LpOutcome::Optimal { x, objective: sol.objective() })
        }
        Ok(_) => Err(Error::Evaluation("linear program interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
        Err(e) => Err(Error::Evaluation(format!("linear program failed: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_lp_on_grid() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let obj: Vec<f64> = xs.iter().map(|&x| f64::from(x >= 0.5)).collect();
        let rows = vec![
            LpRow { coeffs: vec![1.0; xs.len()], lo: 1.0, hi: 1.0 },
            LpRow { coeffs: xs.clone(), lo: 0.25, hi: 0.25 },
        ];
        match maximize(&obj, &rows).unwrap() {
            LpOutcome::Optimal { objective, .. } => assert!((objective - 0.5).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let rows = vec![LpRow { coeffs: vec![1.0], lo: -1.0, hi: -1.0 }];
        assert_eq!(maximize(&[1.0], &rows).unwrap(), LpOutcome::Infeasible);
        assert_eq!(maximize(&[1.0], &[]).unwrap(), LpOutcome::Unbounded);
    }
}
