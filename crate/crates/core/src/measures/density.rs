use serde::{Deserialize, Serialize};

use super::functions::AtomFn;
use super::support::Support;
use crate::error::{Error, Result};
use crate::numeric::integrate;

/// Absolute tolerance handed to adaptive quadrature.
const QUAD_TOL: f64 = 1e-12;

/// Fixed probability density on a compact interval.
#[derive(Debug, Clone)]
pub struct Density {
    support: Support,
    kind: DensityKind,
}

#[derive(Debug, Clone)]
enum DensityKind {
    Uniform,
    PiecewiseConstant { edges: Vec<f64>, values: Vec<f64> },
    Function { pdf: AtomFn, norm: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DensityRepr {
    Uniform {
        #[serde(default)]
        support: Support,
    },
    PiecewiseConstant {
        #[serde(default)]
        support: Support,
        edges: Vec<f64>,
        values: Vec<f64>,
    },
    Custom {
        name: String,
    },
}

impl Serialize for Density {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match &self.kind {
            DensityKind::Uniform => DensityRepr::Uniform { support: self.support },
            DensityKind::PiecewiseConstant { edges, values } => DensityRepr::PiecewiseConstant {
                support: self.support,
                edges: edges.clone(),
                values: values.clone(),
            },
            DensityKind::Function { pdf, .. } => DensityRepr::Custom { name: pdf.name().to_string() },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Density {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match DensityRepr::deserialize(d)? {
            DensityRepr::Uniform { support } => Ok(Density::uniform(support)),
            DensityRepr::PiecewiseConstant { support, edges, values } => {
                Density::piecewise_constant(support, edges, values).map_err(D::Error::custom)
            }
            DensityRepr::Custom { name } => Err(D::Error::custom(format!(
                "custom density {name:?} cannot be rebuilt from JSON"
            ))),
        }
    }
}

impl Density {
    pub fn uniform(support: Support) -> Self {
        Self { support, kind: DensityKind::Uniform }
    }

    /// Density proportional to `values[i]` on `[edges[i], edges[i+1])`.
    pub fn piecewise_constant(support: Support, edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if edges.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidInput("piecewise density needs len(edges) = len(values) + 1".into()));
        }
        if edges[0] != support.lo() || *edges.last().unwrap() != support.hi() {
            return Err(Error::InvalidInput("piecewise density edges must span the support".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("piecewise density edges must increase".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("piecewise density values must be finite and nonnegative".into()));
        }
        let total: f64 = values.iter().zip(edges.windows(2)).map(|(v, w)| v * (w[1] - w[0])).sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("piecewise density has zero mass".into()));
        }
        let values = values.iter().map(|v| v / total).collect();
        Ok(Self { support, kind: DensityKind::PiecewiseConstant { edges, values } })
    }

    /// Density proportional to `pdf`, normalized by quadrature.
    pub fn from_fn(support: Support, pdf: AtomFn) -> Result<Self> {
        let mut d = Self { support, kind: DensityKind::Function { pdf, norm: 1.0 } };
        let total = d.raw_mass(support.lo(), support.hi());
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidInput("density has no finite positive mass".into()));
        }
        if let DensityKind::Function { norm, .. } = &mut d.kind {
            *norm = total;
        }
        Ok(d)
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Uniform => 1.0 / self.support.width(),
            DensityKind::PiecewiseConstant { edges, values } => {
                let i = edges.partition_point(|&e| e <= x).saturating_sub(1).min(values.len() - 1);
                values[i]
            }
            DensityKind::Function { pdf, norm } => pdf.eval(x) / norm,
        }
    }

    fn raw_mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.support.lo()), b.min(self.support.hi()));
        if b <= a {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Uniform => (b - a) / self.support.width(),
            DensityKind::PiecewiseConstant { edges, values } => edges
                .windows(2)
                .zip(values)
                .map(|(w, v)| v * (b.min(w[1]) - a.max(w[0])).max(0.0))
                .sum(),
            DensityKind::Function { pdf, norm } => {
                let mut cuts = vec![a];
                cuts.extend(pdf.breakpoints().iter().copied().filter(|&t| t > a && t < b));
                cuts.push(b);
                cuts.sort_by(f64::total_cmp);
                let f = |x: f64| pdf.eval(x) / norm;
                cuts.windows(2).map(|w| integrate(&f, w[0], w[1], QUAD_TOL)).sum()
            }
        }
    }

    /// Mass of `[a, b]` (open and closed intervals agree for densities).
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.raw_mass(a, b)
    }

    /// Integral of `f` against the density.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut cuts = vec![self.support.lo(), self.support.hi()];
        match &self.kind {
            DensityKind::PiecewiseConstant { edges, .. } => cuts.extend(edges.iter().copied()),
            DensityKind::Function { pdf, .. } => cuts.extend(pdf.breakpoints().iter().copied()),
            DensityKind::Uniform => {}
        }
        cuts.retain(|t| self.support.contains(*t));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let g = |x: f64| f(x) * self.pdf(x);
        cuts.windows(2).map(|w| integrate(&g, w[0], w[1], QUAD_TOL)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }
}
