use serde::{Deserialize, Serialize};

use super::density::Density;
use super::discrete::DiscreteMeasure;
use super::support::Support;
use crate::error::{Error, Result};

/// Data event `B = Π_i B_δ(x_i)`: open balls of common radius about the
/// observed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservationRepr")]
pub struct Observation {
    support: Support,
    centers: Vec<f64>,
    radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationRepr {
    #[serde(default)]
    support: Support,
    centers: Vec<f64>,
    radius: f64,
}

impl TryFrom<ObservationRepr> for Observation {
    type Error = Error;
    fn try_from(r: ObservationRepr) -> Result<Self> {
        Observation::new(r.support, r.centers, r.radius)
    }
}

impl Observation {
    pub fn new(support: Support, centers: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidInput(format!("ball radius {radius} must be positive")));
        }
        if let Some(c) = centers.iter().find(|c| !support.contains(**c)) {
            return Err(Error::InvalidInput(format!("observation {c} outside the support")));
        }
        Ok(Self { support, centers, radius })
    }

    /// No data: `B` is the whole sample space.
    pub fn none(support: Support) -> Self {
        Self { support, centers: Vec::new(), radius: 1.0 }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.support, self.centers.clone(), radius)
    }

    /// Whether `x` lies in some data ball.
    pub fn in_any_ball(&self, x: f64) -> bool {
        self.centers.iter().any(|c| (x - c).abs() < self.radius)
    }

    /// Splits the observation into the first `k` points and the rest.
    pub fn split(&self, k: usize) -> (Self, Self) {
        let k = k.min(self.count());
        let a = Self { support: self.support, centers: self.centers[..k].to_vec(), radius: self.radius };
        let b = Self { support: self.support, centers: self.centers[k..].to_vec(), radius: self.radius };
        (a, b)
    }

    /// Largest number of pairwise disjoint balls among the data balls.
    pub fn disjoint_ball_count(&self) -> usize {
        let mut c = self.centers.clone();
        c.sort_by(f64::total_cmp);
        let mut count = 0;
        let mut last = f64::NEG_INFINITY;
        for x in c {
            if x - last >= 2.0 * self.radius || count == 0 {
                count += 1;
                last = x;
            }
        }
        count
    }
}

/// Measures whose open-ball masses can be computed.
pub trait BallMass {
    fn ball_mass(&self, center: f64, radius: f64) -> f64;
}

impl BallMass for DiscreteMeasure {
    fn ball_mass(&self, center: f64, radius: f64) -> f64 {
        self.open_ball_mass(center, radius)
    }
}

impl BallMass for Density {
    fn ball_mass(&self, center: f64, radius: f64) -> f64 {
        self.mass(center - radius, center + radius)
    }
}

/// `D(μ)[B] = Π_i μ[B_δ(x_i)]` for i.i.d. data.
pub fn data_probability<M: BallMass + ?Sized>(mu: &M, obs: &Observation) -> f64 {
    obs.centers.iter().map(|&c| mu.ball_mass(c, obs.radius)).product()
}

/// Limit of `D(μ)[B]` as the radius shrinks to zero: `Π_i μ({x_i})`.
pub fn data_probability_limit(mu: &DiscreteMeasure, obs: &Observation) -> f64 {
    obs.centers.iter().map(|&c| mu.point_mass(c)).product()
}
