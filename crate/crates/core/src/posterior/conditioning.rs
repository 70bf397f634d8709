use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{data_probability, data_probability_limit, Density, DiscreteMeasure, Observation, QuantityOfInterest};
use crate::reduction::DataMode;

/// One candidate data-generating model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Discrete { measure: DiscreteMeasure },
    Density { density: Density },
}

impl From<DiscreteMeasure> for Model {
    fn from(measure: DiscreteMeasure) -> Self {
        Model::Discrete { measure }
    }
}

impl From<Density> for Model {
    fn from(density: Density) -> Self {
        Model::Density { density }
    }
}

impl Model {
    pub fn qoi(&self, phi: &QuantityOfInterest) -> Result<f64> {
        match self {
            Model::Discrete { measure } => phi.evaluate(measure),
            Model::Density { density } => phi.evaluate_density(density),
        }
    }

    pub fn data_probability(&self, obs: &Observation, mode: DataMode) -> Result<f64> {
        match (self, mode) {
            (Model::Discrete { measure }, DataMode::Finite) => Ok(data_probability(measure, obs)),
            (Model::Discrete { measure }, DataMode::Limit) => Ok(data_probability_limit(measure, obs)),
            (Model::Density { density }, DataMode::Finite) => Ok(data_probability(density, obs)),
            (Model::Density { .. }, DataMode::Limit) => {
                Err(Error::InvalidInput("limit data probabilities of a density vanish".into()))
            }
        }
    }
}

/// Prior with finitely many models.
#[derive(Debug, Clone, Serialize)]
pub struct DiscretePrior {
    models: Vec<Model>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorRepr {
    models: Vec<Model>,
    weights: Vec<f64>,
}

impl<'de> Deserialize<'de> for DiscretePrior {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PriorRepr::deserialize(d)?;
        DiscretePrior::new(r.models, r.weights).map_err(serde::de::Error::custom)
    }
}

impl DiscretePrior {
    /// Weights must be nonnegative and sum to one; drift up to
    /// [`crate::measures::RENORMALIZE_DRIFT`] is renormalized.
    pub fn new(models: Vec<Model>, weights: Vec<f64>) -> Result<Self> {
        if models.is_empty() || models.len() != weights.len() {
            return Err(Error::InvalidInput("prior needs one weight per model".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("prior weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > crate::measures::RENORMALIZE_DRIFT {
            return Err(Error::InvalidInput(format!("prior weights sum to {total}")));
        }
        let weights = if total == 1.0 { weights } else { weights.iter().map(|w| w / total).collect() };
        Ok(Self { models, weights })
    }

    /// Prior proportional to the given nonnegative weights.
    pub fn proportional(models: Vec<Model>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidInput("prior weights must have a positive finite sum".into()));
        }
        Self::new(models, weights.iter().map(|w| w / total).collect())
    }

    pub fn dirac(model: Model) -> Self {
        Self { models: vec![model], weights: vec![1.0] }
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E_π[Φ]`
    pub fn expectation(&self, phi: &QuantityOfInterest) -> Result<f64> {
        let mut v = 0.0;
        for (m, w) in self.models.iter().zip(&self.weights) {
            v += w * m.qoi(phi)?;
        }
        Ok(v)
    }
}

/// `E_π[Φ D] / E_π[D]` with `D(μ) = μⁿ[B]`.
pub fn conditional_expectation(prior: &DiscretePrior, phi: &QuantityOfInterest, obs: &Observation) -> Result<f64> {
    conditional_expectation_in(prior, phi, obs, DataMode::Finite)
}

/// [`conditional_expectation`] with the data probability of `mode`.
pub fn conditional_expectation_in(
    prior: &DiscretePrior,
    phi: &QuantityOfInterest,
    obs: &Observation,
    mode: DataMode,
) -> Result<f64> {
    weighted_posterior(prior, obs, mode, |m, _| m.qoi(phi))
}

/// Posterior mean of a value attached to each model, `values[i]` for
/// `prior.models()[i]`.
pub fn conditional_expectation_of_values(
    prior: &DiscretePrior,
    values: &[f64],
    obs: &Observation,
    mode: DataMode,
) -> Result<f64> {
    if values.len() != prior.models.len() {
        return Err(Error::InvalidInput(format!("{} values for {} models", values.len(), prior.models.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("model values must be finite".into()));
    }
    weighted_posterior(prior, obs, mode, |_, i| Ok(values[i]))
}

fn weighted_posterior(
    prior: &DiscretePrior,
    obs: &Observation,
    mode: DataMode,
    value: impl Fn(&Model, usize) -> Result<f64>,
) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (m, &w)) in prior.models.iter().zip(&prior.weights).enumerate() {
        if w == 0.0 {
            continue;
        }
        let d = m.data_probability(obs, mode)?;
        if d == 0.0 {
            continue;
        }
        num += w * d * value(m, i)?;
        den += w * d;
    }
    if !(den > 0.0) {
        return Err(Error::NullEvent);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{MeasureFn, Support};
    use proptest::prelude::*;

    fn coin(p_heads: f64) -> Model {
        DiscreteMeasure::new(Support::unit(), vec![0.0, 1.0], vec![1.0 - p_heads, p_heads]).unwrap().into()
    }

    fn unfair() -> QuantityOfInterest {
        QuantityOfInterest::custom(MeasureFn::new("unfair", |m| f64::from(m.point_mass(1.0) == 1.0)), Some(0.0), Some(1.0))
            .unwrap()
    }

    #[test]
    fn coin_posterior() {
        let prior = DiscretePrior::new(vec![coin(1.0), coin(0.5)], vec![1.0 / 102.0, 101.0 / 102.0]).unwrap();
        let heads = Observation::new(Support::unit(), vec![1.0; 10], 0.5).unwrap();
        let v = conditional_expectation(&prior, &unfair(), &heads).unwrap();
        assert!((v - 1.0 / (1.0 + 101.0 * 2f64.powi(-10))).abs() < 1e-12);
        let lim = conditional_expectation_in(&prior, &unfair(), &heads, DataMode::Limit).unwrap();
        assert_eq!(v, lim);
        let by_value = conditional_expectation_of_values(&prior, &[1.0, 0.0], &heads, DataMode::Finite).unwrap();
        assert_eq!(v, by_value);
        assert!(conditional_expectation_of_values(&prior, &[1.0], &heads, DataMode::Finite).is_err());
    }

    #[test]
    fn single_model_prior() {
        let m: Model = DiscreteMeasure::new(Support::unit(), vec![0.2, 0.7], vec![0.5, 0.5]).unwrap().into();
        let obs = Observation::new(Support::unit(), vec![0.2], 0.1).unwrap();
        let v = conditional_expectation(&DiscretePrior::dirac(m), &QuantityOfInterest::mean(), &obs).unwrap();
        assert!((v - 0.45).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_model_drops_out() {
        let a: Model = DiscreteMeasure::dirac(Support::unit(), 0.9).unwrap().into();
        let b: Model = DiscreteMeasure::dirac(Support::unit(), 0.1).unwrap().into();
        let obs = Observation::new(Support::unit(), vec![0.1], 0.05).unwrap();
        let prior = DiscretePrior::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        assert_eq!(conditional_expectation(&prior, &QuantityOfInterest::mean(), &obs).unwrap(), 0.1);
    }

    #[test]
    fn null_event() {
        let a: Model = DiscreteMeasure::dirac(Support::unit(), 0.9).unwrap().into();
        let obs = Observation::new(Support::unit(), vec![0.1], 0.05).unwrap();
        let e = conditional_expectation(&DiscretePrior::dirac(a), &QuantityOfInterest::mean(), &obs);
        assert!(matches!(e, Err(Error::NullEvent)));
    }

    #[test]
    fn density_models_use_quadrature() {
        let u: Model = Density::uniform(Support::unit()).into();
        let obs = Observation::new(Support::unit(), vec![0.3, 0.6], 0.05).unwrap();
        assert!((u.data_probability(&obs, DataMode::Finite).unwrap() - 0.01).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn equal_data_probability_collapses_to_prior(
            pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.01f64..1.0), 1..6),
        ) {
            // every model puts mass 0.5 at the single observed point
            let s = Support::unit();
            let models: Vec<Model> = pts
                .iter()
                .map(|&(x, y, _)| {
                    let (x, y) = (0.2 + 0.8 * x, 0.2 + 0.8 * y);
                    DiscreteMeasure::new(s, vec![0.0, x, y], vec![0.5, 0.25, 0.25]).unwrap().into()
                })
                .collect();
            let prior = DiscretePrior::proportional(models, pts.iter().map(|p| p.2).collect()).unwrap();
            let obs = Observation::new(s, vec![0.0], 0.1).unwrap();
            let phi = QuantityOfInterest::mean();
            let post = conditional_expectation(&prior, &phi, &obs).unwrap();
            prop_assert!((post - prior.expectation(&phi).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn rescaled_weights_give_the_same_posterior(
            ws in prop::collection::vec(0.01f64..1.0, 3),
            k in -4i32..5,
        ) {
            let s = Support::unit();
            let models: Vec<Model> = [0.1, 0.5, 0.8]
                .iter()
                .map(|&x| DiscreteMeasure::new(s, vec![x, 0.3], vec![0.5, 0.5]).unwrap().into())
                .collect();
            let obs = Observation::new(s, vec![0.35, 0.5], 0.2).unwrap();
            let phi = QuantityOfInterest::tail(0.4);
            let c = 2f64.powi(k);
            let a = conditional_expectation(&DiscretePrior::proportional(models.clone(), ws.clone()).unwrap(), &phi, &obs).unwrap();
            let b = conditional_expectation(
                &DiscretePrior::proportional(models, ws.iter().map(|w| w * c).collect()).unwrap(), &phi, &obs
            ).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
