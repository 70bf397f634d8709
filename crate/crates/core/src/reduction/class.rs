use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    data_probability, BallMass, ConstraintSpec, Density, DiscreteMeasure, MomentMap, Observation, Support,
};

/// Relative slack allowed when checking band membership.
const BAND_TOL: f64 = 1e-12;

/// Shape of a data-probability band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandKind {
    /// `(1/α) μ₀ⁿ[B] ≤ μⁿ[B] ≤ α μ₀ⁿ[B]`
    Joint { alpha: f64 },
    /// `(1/γ) μ₀[B_i] ≤ μ[B_i] ≤ γ μ₀[B_i]` for every ball
    PerBall { gamma: f64 },
}

/// Multiplicative band on the data probability relative to a reference
/// measure `μ₀`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DataBandRepr")]
pub struct DataBand {
    kind: BandKind,
    reference: Density,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DataBandRepr {
    kind: BandKind,
    reference: Option<Density>,
}

impl TryFrom<DataBandRepr> for DataBand {
    type Error = Error;
    fn try_from(r: DataBandRepr) -> Result<Self> {
        let reference = r.reference.unwrap_or_else(|| Density::uniform(Support::unit()));
        DataBand::new(r.kind, reference)
    }
}

impl DataBand {
    pub fn new(kind: BandKind, reference: Density) -> Result<Self> {
        match kind {
            BandKind::Joint { alpha } if !(alpha.is_finite() && alpha >= 1.0) => {
                Err(Error::InvalidInput(format!("band parameter alpha = {alpha} must be >= 1")))
            }
            BandKind::PerBall { gamma } if !(gamma.is_finite() && gamma >= 1.0) => {
                Err(Error::InvalidInput(format!("band parameter gamma = {gamma} must be >= 1")))
            }
            _ => Ok(Self { kind, reference }),
        }
    }

    /// Joint band against the uniform reference on `[0, 1]`.
    pub fn joint(alpha: f64) -> Result<Self> {
        Self::new(BandKind::Joint { alpha }, Density::uniform(Support::unit()))
    }

    /// Per-ball band against the uniform reference on `[0, 1]`.
    pub fn per_ball(gamma: f64) -> Result<Self> {
        Self::new(BandKind::PerBall { gamma }, Density::uniform(Support::unit()))
    }

    pub fn kind(&self) -> BandKind {
        self.kind
    }

    pub fn reference(&self) -> &Density {
        &self.reference
    }

    /// Admissible range of `D(μ)[B] / D(μ₀)[B]` for `n` observations.
    pub fn relative_range(&self, n: usize) -> (f64, f64) {
        match self.kind {
            BandKind::Joint { alpha } => (1.0 / alpha, alpha),
            BandKind::PerBall { gamma } => {
                let g = gamma.powi(n as i32);
                (1.0 / g, g)
            }
        }
    }

    /// Whether `mu` satisfies the band at the observation's radius.
    pub fn admits(&self, mu: &DiscreteMeasure, obs: &Observation) -> bool {
        match self.kind {
            BandKind::Joint { alpha } => {
                let d = data_probability(mu, obs);
                let d0 = data_probability(&self.reference, obs);
                d >= d0 / alpha * (1.0 - BAND_TOL) && d <= d0 * alpha * (1.0 + BAND_TOL)
            }
            BandKind::PerBall { gamma } => obs.centers().iter().all(|&c| {
                let m = mu.ball_mass(c, obs.radius());
                let m0 = self.reference.ball_mass(c, obs.radius());
                m >= m0 / gamma * (1.0 - BAND_TOL) && m <= m0 * gamma * (1.0 + BAND_TOL)
            }),
        }
    }
}

/// Prior class `Π(Z) = {π : E_π[Ψ] ∈ Z}`, optionally restricted to models
/// inside a data-probability band.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PriorClassRepr")]
pub struct PriorClassSpec {
    moment_map: MomentMap,
    constraints: ConstraintSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    band: Option<DataBand>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorClassRepr {
    moment_map: MomentMap,
    constraints: ConstraintSpec,
    band: Option<DataBand>,
}

impl TryFrom<PriorClassRepr> for PriorClassSpec {
    type Error = Error;
    fn try_from(r: PriorClassRepr) -> Result<Self> {
        PriorClassSpec::new(r.moment_map, r.constraints, r.band)
    }
}

impl PriorClassSpec {
    pub fn new(moment_map: MomentMap, constraints: ConstraintSpec, band: Option<DataBand>) -> Result<Self> {
        if moment_map.dim() != constraints.dim() {
            return Err(Error::InvalidInput(format!(
                "moment map has {} components but {} constraint intervals",
                moment_map.dim(),
                constraints.dim()
            )));
        }
        Ok(Self { moment_map, constraints, band })
    }

    /// All priors on measures over `support`.
    pub fn unconstrained(support: Support) -> Self {
        Self { moment_map: MomentMap::empty(support), constraints: ConstraintSpec::none(), band: None }
    }

    pub fn with_band(mut self, band: DataBand) -> Self {
        self.band = Some(band);
        self
    }

    pub fn moment_map(&self) -> &MomentMap {
        &self.moment_map
    }

    pub fn constraints(&self) -> &ConstraintSpec {
        &self.constraints
    }

    pub fn band(&self) -> Option<&DataBand> {
        self.band.as_ref()
    }

    pub fn support(&self) -> &Support {
        self.moment_map.support()
    }
}
