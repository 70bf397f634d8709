use serde::{Deserialize, Serialize};

use super::discrete::DiscreteMeasure;
use super::functions::AtomFn;
use super::support::Support;
use crate::error::{Error, Result};
use crate::numeric::ext_f64;

/// Sample count of the boundedness check.
const BOUND_CHECK_SAMPLES: usize = 1001;
/// Magnitude above which a sampled value counts as unbounded.
const BOUND_CHECK_LIMIT: f64 = 1e12;

/// One generalized-moment function `g_i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "MomentFnRepr", try_from = "MomentFnRepr")]
pub enum MomentFn {
    /// `x^k`
    Power(u32),
    /// `1{x >= a}`
    Threshold(f64),
    /// `1{|x - center| < radius}`
    Ball { center: f64, radius: f64 },
    Custom(AtomFn),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MomentFnRepr {
    Power { k: u32 },
    Threshold { a: f64 },
    Ball { center: f64, radius: f64 },
    Custom { name: String },
}

impl From<MomentFn> for MomentFnRepr {
    fn from(g: MomentFn) -> Self {
        match g {
            MomentFn::Power(k) => Self::Power { k },
            MomentFn::Threshold(a) => Self::Threshold { a },
            MomentFn::Ball { center, radius } => Self::Ball { center, radius },
            MomentFn::Custom(f) => Self::Custom { name: f.name().to_string() },
        }
    }
}

impl TryFrom<MomentFnRepr> for MomentFn {
    type Error = Error;
    fn try_from(r: MomentFnRepr) -> Result<Self> {
        match r {
            MomentFnRepr::Power { k } => Ok(Self::Power(k)),
            MomentFnRepr::Threshold { a } => Ok(Self::Threshold(a)),
            MomentFnRepr::Ball { center, radius } => Ok(Self::Ball { center, radius }),
            MomentFnRepr::Custom { name } => Err(Error::InvalidInput(format!(
                "custom moment function {name:?} cannot be rebuilt from JSON"
            ))),
        }
    }
}

impl MomentFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MomentFn::Power(k) => x.powi(*k as i32),
            MomentFn::Threshold(a) => f64::from(x >= *a),
            MomentFn::Ball { center, radius } => f64::from((x - center).abs() < *radius),
            MomentFn::Custom(f) => f.eval(x),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            MomentFn::Power(_) => Vec::new(),
            MomentFn::Threshold(a) => vec![*a],
            MomentFn::Ball { center, radius } => vec![center - radius, *center, center + radius],
            MomentFn::Custom(f) => f.breakpoints().to_vec(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            MomentFn::Power(k) => format!("x^{k}"),
            MomentFn::Threshold(a) => format!("1{{x>={a}}}"),
            MomentFn::Ball { center, radius } => format!("1{{|x-{center}|<{radius}}}"),
            MomentFn::Custom(f) => f.name().to_string(),
        }
    }

    /// Checks finiteness and boundedness on sampled points of `support`.
    pub fn check_bounded(&self, support: &Support) -> Result<()> {
        let mut pts = support.grid(BOUND_CHECK_SAMPLES);
        pts.extend(self.breakpoints().into_iter().filter(|t| support.contains(*t)));
        for x in pts {
            let v = self.eval(x);
            if !v.is_finite() || v.abs() > BOUND_CHECK_LIMIT {
                return Err(Error::InvalidInput(format!(
                    "moment function {} is unbounded near x = {x} (value {v})",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}

/// Feature map `Ψ = (g_1, …, g_n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MomentMapRepr")]
pub struct MomentMap {
    support: Support,
    components: Vec<MomentFn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentMapRepr {
    #[serde(default)]
    support: Support,
    components: Vec<MomentFn>,
}

impl TryFrom<MomentMapRepr> for MomentMap {
    type Error = Error;
    fn try_from(r: MomentMapRepr) -> Result<Self> {
        MomentMap::new(r.support, r.components)
    }
}

impl MomentMap {
    pub fn new(support: Support, components: Vec<MomentFn>) -> Result<Self> {
        for g in &components {
            g.check_bounded(&support)?;
        }
        Ok(Self { support, components })
    }

    pub fn empty(support: Support) -> Self {
        Self { support, components: Vec::new() }
    }

    /// Power moments `x, x^2, …, x^k`.
    pub fn powers(support: Support, k: u32) -> Self {
        Self { support, components: (1..=k).map(MomentFn::Power).collect() }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn components(&self) -> &[MomentFn] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// `(g_1(x), …, g_n(x))`
    pub fn eval_point(&self, x: f64) -> Vec<f64> {
        self.components.iter().map(|g| g.eval(x)).collect()
    }

    /// `E_μ[Ψ]`
    pub fn eval(&self, mu: &DiscreteMeasure) -> Vec<f64> {
        self.components.iter().map(|g| mu.expect(|x| g.eval(x))).collect()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.components.iter().flat_map(|g| g.breakpoints()).collect()
    }
}

/// Closed interval with possibly infinite ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "ext_f64")]
    pub lo: f64,
    #[serde(with = "ext_f64")]
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Distance from `v` to the interval.
    pub fn violation(&self, v: f64) -> f64 {
        if v < self.lo {
            self.lo - v
        } else if v > self.hi {
            v - self.hi
        } else {
            0.0
        }
    }
}

/// Target rectangle `Z = I_1 × … × I_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct ConstraintSpec {
    intervals: Vec<Interval>,
}

impl TryFrom<Vec<Interval>> for ConstraintSpec {
    type Error = Error;
    fn try_from(v: Vec<Interval>) -> Result<Self> {
        ConstraintSpec::new(v)
    }
}

impl From<ConstraintSpec> for Vec<Interval> {
    fn from(c: ConstraintSpec) -> Self {
        c.intervals
    }
}

impl ConstraintSpec {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        for (i, iv) in intervals.iter().enumerate() {
            if iv.lo.is_nan() || iv.hi.is_nan() {
                return Err(Error::InvalidInput(format!("constraint {i} has a NaN bound")));
            }
            if iv.lo > iv.hi {
                return Err(Error::VoidConstraintSet(format!(
                    "constraint {i} asks for [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
            if iv.lo == f64::INFINITY || iv.hi == f64::NEG_INFINITY {
                return Err(Error::VoidConstraintSet(format!("constraint {i} lies at infinity")));
            }
        }
        Ok(Self { intervals })
    }

    pub fn equalities(targets: &[f64]) -> Result<Self> {
        Self::new(targets.iter().map(|&q| Interval::point(q)).collect())
    }

    pub fn none() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    /// Largest violation `max_i dist(v_i, I_i)`.
    pub fn residual(&self, v: &[f64]) -> f64 {
        self.intervals
            .iter()
            .zip(v)
            .map(|(iv, &x)| iv.violation(x))
            .fold(0.0, f64::max)
    }
}
