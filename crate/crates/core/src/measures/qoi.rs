use serde::{Deserialize, Serialize};

use super::density::Density;
use super::discrete::DiscreteMeasure;
use super::functions::{AtomFn, MeasureFn};
use super::support::{IntervalSet, Support};
use crate::error::{Error, Result};

/// Quantity of interest `Φ`.
#[derive(Debug, Clone)]
pub enum QuantityOfInterest {
    /// `μ[X >= a]` (closed event)
    Tail(f64),
    Mean,
    SetProbability(IntervalSet),
    /// `Σ w_i f(x_i)`: measure-affine with a user-supplied atom evaluator.
    AtomAffine { f: AtomFn, lower: Option<f64>, upper: Option<f64> },
    /// Arbitrary functional of the measure.
    Custom { f: MeasureFn, lower: Option<f64>, upper: Option<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum QoiRepr {
    Tail { a: f64 },
    Mean,
    SetProbability { set: IntervalSet },
    AtomAffine { name: String },
    Custom { name: String },
}

impl Serialize for QuantityOfInterest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Tail(a) => QoiRepr::Tail { a: *a },
            Self::Mean => QoiRepr::Mean,
            Self::SetProbability(set) => QoiRepr::SetProbability { set: set.clone() },
            Self::AtomAffine { f, .. } => QoiRepr::AtomAffine { name: f.name().into() },
            Self::Custom { f, .. } => QoiRepr::Custom { name: f.name().into() },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuantityOfInterest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match QoiRepr::deserialize(d)? {
            QoiRepr::Tail { a } if a.is_finite() => Ok(Self::Tail(a)),
            QoiRepr::Tail { a } => Err(D::Error::custom(format!("tail threshold {a} is not finite"))),
            QoiRepr::Mean => Ok(Self::Mean),
            QoiRepr::SetProbability { set } => Ok(Self::SetProbability(set)),
            QoiRepr::AtomAffine { name } | QoiRepr::Custom { name } => Err(D::Error::custom(format!(
                "custom quantity of interest {name:?} cannot be rebuilt from JSON"
            ))),
        }
    }
}

fn check_semibounded(lower: Option<f64>, upper: Option<f64>) -> Result<()> {
    let finite = |b: Option<f64>| b.is_some_and(f64::is_finite);
    if !finite(lower) && !finite(upper) {
        return Err(Error::InvalidInput(
            "quantity of interest must declare a finite lower or upper bound".into(),
        ));
    }
    Ok(())
}

impl QuantityOfInterest {
    pub fn tail(a: f64) -> Self {
        Self::Tail(a)
    }

    pub fn mean() -> Self {
        Self::Mean
    }

    pub fn set_probability(set: IntervalSet) -> Self {
        Self::SetProbability(set)
    }

    pub fn atom_affine(f: AtomFn, lower: Option<f64>, upper: Option<f64>) -> Result<Self> {
        check_semibounded(lower, upper)?;
        Ok(Self::AtomAffine { f, lower, upper })
    }

    pub fn custom(f: MeasureFn, lower: Option<f64>, upper: Option<f64>) -> Result<Self> {
        check_semibounded(lower, upper)?;
        Ok(Self::Custom { f, lower, upper })
    }

    /// Canonical-affine kinds evaluate atom by atom.
    pub fn is_affine(&self) -> bool {
        !matches!(self, Self::Custom { .. })
    }

    /// `Φ(δ_x)` for affine kinds.
    pub fn atom_value(&self, x: f64) -> Option<f64> {
        match self {
            Self::Tail(a) => Some(f64::from(x >= *a)),
            Self::Mean => Some(x),
            Self::SetProbability(set) => Some(f64::from(set.contains(x))),
            Self::AtomAffine { f, .. } => Some(f.eval(x)),
            Self::Custom { .. } => None,
        }
    }

    /// Declared or implied bounds of `Φ` over measures on `support`.
    pub fn bounds(&self, support: &Support) -> (Option<f64>, Option<f64>) {
        match self {
            Self::Tail(_) | Self::SetProbability(_) => (Some(0.0), Some(1.0)),
            Self::Mean => (Some(support.lo()), Some(support.hi())),
            Self::AtomAffine { lower, upper, .. } | Self::Custom { lower, upper, .. } => (*lower, *upper),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Tail(a) => vec![*a],
            Self::Mean => Vec::new(),
            Self::SetProbability(set) => set.breakpoints(),
            Self::AtomAffine { f, .. } => f.breakpoints().to_vec(),
            Self::Custom { .. } => Vec::new(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Tail(a) => format!("tail({a})"),
            Self::Mean => "mean".into(),
            Self::SetProbability(_) => "set_probability".into(),
            Self::AtomAffine { f, .. } => f.name().into(),
            Self::Custom { f, .. } => f.name().into(),
        }
    }

    pub fn evaluate(&self, mu: &DiscreteMeasure) -> Result<f64> {
        // rounding in the weight sum must not push a probability above one
        let cap = |p: f64| if mu.is_positive() { p } else { p.min(1.0) };
        let v = match self {
            Self::Tail(a) => cap(mu.expect(|x| f64::from(x >= *a))),
            Self::Mean => mu.mean(),
            Self::SetProbability(set) => cap(mu.mass_in(set)),
            Self::AtomAffine { f, .. } => mu.expect(|x| f.eval(x)),
            Self::Custom { f, .. } => f.eval(mu),
        };
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("{} returned {v}", self.name())));
        }
        Ok(v)
    }

    pub fn evaluate_density(&self, d: &Density) -> Result<f64> {
        let v = match self {
            Self::Tail(a) => d.mass(*a, d.support().hi()),
            Self::Mean => d.mean(),
            Self::SetProbability(set) => set.parts().iter().map(|&(a, b)| d.mass(a, b)).sum(),
            Self::AtomAffine { f, .. } => d.expect(|x| f.eval(x)),
            Self::Custom { f, .. } => {
                return Err(Error::Evaluation(format!("{} is defined on discrete measures only", f.name())))
            }
        };
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("{} returned {v}", self.name())));
        }
        Ok(v)
    }
}

/// `Φ(μ)`
pub fn evaluate_qoi(phi: &QuantityOfInterest, mu: &DiscreteMeasure) -> Result<f64> {
    phi.evaluate(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::markov_inner_sup;

    fn m(atoms: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(Support::unit(), atoms.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn tail_counts_atom_at_threshold() {
        assert_eq!(evaluate_qoi(&QuantityOfInterest::tail(0.75), &m(&[0.0, 0.75], &[0.5, 0.5])).unwrap(), 0.5);
    }

    #[test]
    fn mean_is_weighted_sum() {
        assert_eq!(evaluate_qoi(&QuantityOfInterest::mean(), &m(&[0.0, 1.0], &[0.25, 0.75])).unwrap(), 0.75);
    }

    #[test]
    fn markov_extremal_witness() {
        let mu = m(&[0.0, 0.6], &[0.5, 0.5]);
        let tail = evaluate_qoi(&QuantityOfInterest::tail(0.6), &mu).unwrap();
        let mean = evaluate_qoi(&QuantityOfInterest::mean(), &mu).unwrap();
        assert_eq!(tail, 0.5);
        assert!((mean - 0.3).abs() < 1e-15);
        assert!((tail - markov_inner_sup(mean, 0.6)).abs() < 1e-12);
    }

    #[test]
    fn non_finite_custom_value_is_an_evaluation_error() {
        let phi = QuantityOfInterest::custom(MeasureFn::new("bad", |_| f64::NAN), Some(0.0), None).unwrap();
        assert!(matches!(phi.evaluate(&m(&[0.5], &[1.0])), Err(Error::Evaluation(_))));
    }

    #[test]
    fn unbounded_custom_is_rejected() {
        assert!(QuantityOfInterest::atom_affine(AtomFn::new("x", |x| x), None, None).is_err());
        assert!(QuantityOfInterest::atom_affine(AtomFn::new("x", |x| x), None, Some(f64::INFINITY)).is_err());
    }

    #[test]
    fn density_tail_and_mean() {
        let d = Density::uniform(Support::unit());
        assert!((QuantityOfInterest::tail(0.25).evaluate_density(&d).unwrap() - 0.75).abs() < 1e-12);
        assert!((QuantityOfInterest::mean().evaluate_density(&d).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn json_forms() {
        let q: QuantityOfInterest = serde_json::from_str(r#"{"kind":"tail","a":0.5}"#).unwrap();
        assert!(matches!(q, QuantityOfInterest::Tail(a) if a == 0.5));
        let q: QuantityOfInterest = serde_json::from_str(r#"{"kind":"set_probability","set":[[0.1,0.2]]}"#).unwrap();
        assert_eq!(q.atom_value(0.15), Some(1.0));
        assert!(serde_json::from_str::<QuantityOfInterest>(r#"{"kind":"custom","name":"f"}"#).is_err());
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tail_probability_is_a_probability(
                pairs in prop::collection::vec((0.0f64..=1.0, 0.001f64..1.0), 1..8),
                a in -0.5f64..1.5,
            ) {
                let total: f64 = pairs.iter().map(|p| p.1).sum();
                let mu = DiscreteMeasure::new(
                    Support::unit(),
                    pairs.iter().map(|p| p.0).collect(),
                    pairs.iter().map(|p| p.1 / total).collect(),
                ).unwrap();
                let v = evaluate_qoi(&QuantityOfInterest::tail(a), &mu).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
