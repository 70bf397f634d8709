use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compact support interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SupportRepr")]
pub struct Support {
    lo: f64,
    hi: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportRepr {
    lo: f64,
    hi: f64,
}

impl TryFrom<SupportRepr> for Support {
    type Error = Error;
    fn try_from(r: SupportRepr) -> Result<Self> {
        Support::new(r.lo, r.hi)
    }
}

impl Default for Support {
    fn default() -> Self {
        Self::unit()
    }
}

impl Support {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!(
                "support [{lo}, {hi}] must be a finite interval with lo < hi"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// `n` equispaced points including both endpoints (`n >= 2`).
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        let h = self.width() / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { self.hi } else { self.lo + h * i as f64 })
            .collect()
    }
}

/// Finite union of closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct IntervalSet {
    parts: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for IntervalSet {
    type Error = Error;
    fn try_from(parts: Vec<(f64, f64)>) -> Result<Self> {
        IntervalSet::new(parts)
    }
}

impl From<IntervalSet> for Vec<(f64, f64)> {
    fn from(s: IntervalSet) -> Self {
        s.parts
    }
}

impl IntervalSet {
    pub fn new(parts: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &parts {
            if a.is_nan() || b.is_nan() || a > b {
                return Err(Error::InvalidInput(format!("interval [{a}, {b}] is empty")));
            }
        }
        Ok(Self { parts })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[(f64, f64)] {
        &self.parts
    }

    pub fn contains(&self, x: f64) -> bool {
        self.parts.iter().any(|&(a, b)| x >= a && x <= b)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.parts
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|v| v.is_finite())
            .collect()
    }

    pub fn within(&self, support: &Support) -> bool {
        self.parts
            .iter()
            .all(|&(a, b)| a >= support.lo() && b <= support.hi())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_both_endpoints() {
        let s = Support::new(-1.0, 2.0).unwrap();
        let g = s.grid(4);
        assert_eq!(g, vec![-1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_degenerate_support() {
        assert!(Support::new(1.0, 1.0).is_err());
        assert!(Support::new(0.0, f64::INFINITY).is_err());
        assert!(serde_json::from_str::<Support>(r#"{"lo":2,"hi":1}"#).is_err());
    }

    #[test]
    fn interval_sets_are_closed() {
        let s = IntervalSet::new(vec![(0.1, 0.2), (0.5, 0.5)]).unwrap();
        assert!(s.contains(0.1) && s.contains(0.2) && s.contains(0.5));
        assert!(!s.contains(0.3));
        assert!(IntervalSet::new(vec![(0.3, 0.2)]).is_err());
    }
}
