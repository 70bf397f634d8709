use serde::{Deserialize, Serialize};

use super::support::{IntervalSet, Support};
use crate::error::{Error, Result};

/// Drift in total weight that constructors silently renormalize.
pub const RENORMALIZE_DRIFT: f64 = 1e-9;

/// Finitely supported measure on a compact interval.
///
/// Probability measures have weights summing to one; measures flagged
/// `positive` are unnormalized and only need finite nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr")]
pub struct DiscreteMeasure {
    support: Support,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    positive: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr {
    #[serde(default)]
    support: Support,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    #[serde(default)]
    positive: bool,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        if r.positive {
            DiscreteMeasure::positive(r.support, r.atoms, r.weights)
        } else {
            DiscreteMeasure::new(r.support, r.atoms, r.weights)
        }
    }
}

fn check_atoms(support: &Support, atoms: &[f64], weights: &[f64]) -> Result<()> {
    if atoms.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} atoms but {} weights",
            atoms.len(),
            weights.len()
        )));
    }
    if atoms.is_empty() {
        return Err(Error::InvalidInput("measure has no atoms".into()));
    }
    for &x in atoms {
        if !support.contains(x) {
            return Err(Error::InvalidInput(format!(
                "atom {x} outside support [{}, {}]",
                support.lo(),
                support.hi()
            )));
        }
    }
    for &w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidInput(format!("weight {w} is not a finite nonnegative real")));
        }
    }
    Ok(())
}

impl DiscreteMeasure {
    /// Probability measure. Weights whose total drifts from one by at most
    /// [`RENORMALIZE_DRIFT`] are renormalized; larger drift is rejected.
    pub fn new(support: Support, atoms: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        check_atoms(&support, &atoms, &weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_DRIFT {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, not a probability measure"
            )));
        }
        if total != 1.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self { support, atoms, weights, positive: false })
    }

    /// Unnormalized nonnegative measure.
    pub fn positive(support: Support, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_atoms(&support, &atoms, &weights)?;
        Ok(Self { support, atoms, weights, positive: true })
    }

    pub fn dirac(support: Support, x: f64) -> Result<Self> {
        Self::new(support, vec![x], vec![1.0])
    }

    /// Builds a probability measure from weights already known to be on the
    /// simplex up to rounding, skipping the drift check.
    pub(crate) fn from_parts_unchecked(support: Support, atoms: Vec<f64>, mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total != 1.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Self { support, atoms, weights, positive: false }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integral of `f` against the measure.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    /// Mass of the closed interval union `set`.
    pub fn mass_in(&self, set: &IntervalSet) -> f64 {
        self.expect(|x| if set.contains(x) { 1.0 } else { 0.0 })
    }

    /// Mass of the open ball of radius `radius` about `center`.
    pub fn open_ball_mass(&self, center: f64, radius: f64) -> f64 {
        self.expect(|x| if (x - center).abs() < radius { 1.0 } else { 0.0 })
    }

    /// Mass carried by atoms located at `x`.
    pub fn point_mass(&self, x: f64) -> f64 {
        self.expect(|y| if (y - x).abs() <= POINT_TOL { 1.0 } else { 0.0 })
    }

    /// Positive measure with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::positive(self.support, self.atoms.clone(), self.weights.iter().map(|w| w * c).collect())
    }

    /// Drops atoms with weight `<= tol` and merges coincident atoms.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (&x, &w) in self.atoms.iter().zip(&self.weights) {
            if w <= tol {
                continue;
            }
            match pairs.iter_mut().find(|(y, _)| *y == x) {
                Some(p) => p.1 += w,
                None => pairs.push((x, w)),
            }
        }
        if pairs.is_empty() {
            return self.clone();
        }
        let (atoms, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if self.positive {
            Self { support: self.support, atoms, weights, positive: true }
        } else {
            Self::from_parts_unchecked(self.support, atoms, weights)
        }
    }

    /// Number of atoms with weight above `tol`.
    pub fn active_atoms(&self, tol: f64) -> usize {
        self.weights.iter().filter(|&&w| w > tol).count()
    }
}

/// Distance under which an atom counts as sitting at a point.
pub const POINT_TOL: f64 = 1e-12;

/// Mass of `set` under `mu` (closed interval union).
pub fn measure_mass(mu: &DiscreteMeasure, set: &IntervalSet) -> f64 {
    mu.mass_in(set)
}
