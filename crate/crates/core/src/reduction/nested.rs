use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::class::PriorClassSpec;
use super::program::{reduce_prior, Direction, ReducedProgram};
use crate::error::{Error, Result};
use crate::measures::{AtomFn, DiscreteMeasure, QuantityOfInterest};
use crate::numeric::sample_rng;

/// `sup Φ` over measures on `[0, 1]` with mean `q` for `Φ = μ[X ≥ a]`.
pub fn markov_inner_sup(q: f64, a: f64) -> f64 {
    (q / a).min(1.0)
}

/// Distribution `Q` over moment vectors.
pub trait MomentSampler: Send + Sync {
    fn dim(&self) -> usize;

    /// Draws one moment vector, or `None` when the draw is rejected.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>>;

    /// Atoms and probabilities when `Q` is finitely supported.
    fn atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMass(pub Vec<f64>);

impl MomentSampler for PointMass {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn sample(&self, _: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        Some(self.0.clone())
    }

    fn atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        Some(vec![(self.0.clone(), 1.0)])
    }
}

/// Finitely supported `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSampler {
    points: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl DiscreteSampler {
    pub fn new(points: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.is_empty() || points.len() != probs.len() || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("discrete sampler needs matching points and probabilities".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("sampler probabilities must form a simplex vector".into()));
        }
        Ok(Self { points, probs })
    }

    /// One-dimensional `Q` read off a discrete measure.
    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        Self {
            points: mu.atoms().iter().map(|&x| vec![x]).collect(),
            probs: mu.weights().to_vec(),
        }
    }
}

impl MomentSampler for DiscreteSampler {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (p, w) in self.points.iter().zip(&self.probs) {
            acc += w;
            if u < acc {
                return Some(p.clone());
            }
        }
        self.points.last().cloned()
    }

    fn atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        Some(self.points.iter().cloned().zip(self.probs.iter().copied()).collect())
    }
}

/// Uniform distribution on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl UniformBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidInput("uniform box needs finite lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }
}

impl MomentSampler for UniformBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        Some(self.lo.iter().zip(&self.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect())
    }
}

/// One-dimensional piecewise uniform density, sampled by inverse CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseUniform {
    edges: Vec<f64>,
    probs: Vec<f64>,
}

impl PiecewiseUniform {
    /// `probs[i]` is the mass of `[edges[i], edges[i+1]]`.
    pub fn new(edges: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if edges.len() != probs.len() + 1 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("piecewise uniform needs increasing edges, one more than pieces".into()));
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidInput("piecewise uniform masses must be nonnegative".into()));
        }
        Ok(Self { edges, probs: probs.iter().map(|p| p / total).collect() })
    }

    pub fn mean(&self) -> f64 {
        self.edges.windows(2).zip(&self.probs).map(|(w, p)| p * 0.5 * (w[0] + w[1])).sum()
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (w, &p) in self.edges.windows(2).zip(&self.probs) {
            if p > 0.0 && u <= acc + p {
                return w[0] + (w[1] - w[0]) * ((u - acc) / p).clamp(0.0, 1.0);
            }
            acc += p;
        }
        *self.edges.last().expect("edges")
    }
}

impl MomentSampler for PiecewiseUniform {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        Some(vec![self.quantile(rng.random())])
    }
}

/// Sampler backed by a closure.
pub struct FnSampler<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&mut ChaCha8Rng) -> Option<Vec<f64>> + Send + Sync> FnSampler<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&mut ChaCha8Rng) -> Option<Vec<f64>> + Send + Sync> MomentSampler for FnSampler<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        (self.f)(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedEstimate {
    pub value: f64,
    pub std_error: f64,
    pub accepted: usize,
    pub rejected: usize,
    /// Computed as a finite sum over the atoms of `Q` rather than sampled.
    pub exact: bool,
}

/// `E_{q∼Q}[inner(q)]`, where `inner(q)` is the sup of `Φ` over the moment
/// fiber of `q` and returns `None` when the fiber is empty.
///
/// Finitely supported `Q` are summed exactly. Otherwise sample `i` is drawn
/// from its own stream of `seed`, so the estimate does not depend on the
/// thread count.
pub fn nested_prior_value<S, F>(sampler: &S, inner: F, n_samples: usize, seed: u64) -> Result<NestedEstimate>
where
    S: MomentSampler + ?Sized,
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    if let Some(atoms) = sampler.atoms() {
        let (mut value, mut kept, mut rejected) = (0.0, 0.0, 0usize);
        for (q, p) in &atoms {
            if *p == 0.0 {
                continue;
            }
            match inner(q) {
                Some(v) => {
                    value += p * v;
                    kept += p;
                }
                None => rejected += 1,
            }
        }
        if kept < 0.5 {
            return Err(Error::SamplerLeavesBody { rejected, total: atoms.len() });
        }
        return Ok(NestedEstimate {
            value: value / kept,
            std_error: 0.0,
            accepted: atoms.len() - rejected,
            rejected,
            exact: true,
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("nested estimate needs at least one sample".into()));
    }
    let draws: Vec<Option<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            sampler.sample(&mut rng).and_then(|q| inner(&q)).filter(|v| v.is_finite())
        })
        .collect();
    let values: Vec<f64> = draws.iter().flatten().copied().collect();
    let rejected = n_samples - values.len();
    if 2 * rejected > n_samples {
        return Err(Error::SamplerLeavesBody { rejected, total: n_samples });
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Ok(NestedEstimate { value: mean, std_error: (var / k).sqrt(), accepted: values.len(), rejected, exact: false })
}

/// Nested reduction: the sup over priors becomes a sup over distributions
/// `Q` of moment values of `E_Q[inner(q)]`, which is a primary program on
/// the moment space with the atom-level objective `inner`.
pub fn reduce_nested(
    inner: AtomFn,
    lower: Option<f64>,
    upper: Option<f64>,
    outer: &PriorClassSpec,
    direction: Direction,
) -> Result<ReducedProgram> {
    let phi = QuantityOfInterest::atom_affine(inner, lower, upper)?;
    reduce_prior(&phi, outer, direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Support;

    #[test]
    fn markov_examples() {
        assert!((markov_inner_sup(0.3, 0.6) - 0.5).abs() < 1e-15);
        assert_eq!(markov_inner_sup(0.6, 0.6), 1.0);
        assert_eq!(markov_inner_sup(0.9, 0.6), 1.0);
    }

    #[test]
    fn markov_matches_two_atom_grid() {
        // sup over x1 <= q <= x2 of the weight on x2 >= a, with mean q
        let grid: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
        for &(q, a) in &[(0.3, 0.6), (0.1, 0.45), (0.7, 0.5)] {
            let mut best: f64 = if q >= a { 1.0 } else { 0.0 };
            for &x1 in grid.iter().filter(|&&x| x <= q) {
                for &x2 in grid.iter().filter(|&&x| x >= q && x > x1) {
                    let w2 = (q - x1) / (x2 - x1);
                    if x2 >= a {
                        best = best.max(w2);
                    }
                }
            }
            assert!((best - markov_inner_sup(q, a)).abs() < 1e-3, "{q} {a}");
        }
    }

    #[test]
    fn point_mass_is_exact() {
        let e = nested_prior_value(&PointMass(vec![0.3]), |q| Some(markov_inner_sup(q[0], 0.5)), 10, 1).unwrap();
        assert_eq!(e.value, 0.6);
        assert!(e.exact);
    }

    #[test]
    fn two_point_q_reaches_q_over_a() {
        let (a, q) = (0.5, 0.25);
        let s = DiscreteSampler::new(vec![vec![a], vec![0.0]], vec![q / a, 1.0 - q / a]).unwrap();
        let e = nested_prior_value(&s, |v| Some(markov_inner_sup(v[0], a)), 0, 0).unwrap();
        assert!((e.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_q_monte_carlo() {
        let s = UniformBox::new(vec![0.0], vec![1.0]).unwrap();
        let e = nested_prior_value(&s, |v| Some(markov_inner_sup(v[0], 0.5)), 40_000, 7).unwrap();
        assert!((e.value - 0.75).abs() < 4.0 * e.std_error + 1e-3, "{e:?}");
        let again = nested_prior_value(&s, |v| Some(markov_inner_sup(v[0], 0.5)), 40_000, 7).unwrap();
        assert_eq!(e.value.to_bits(), again.value.to_bits());
    }

    #[test]
    fn mostly_rejected_sampler_errors() {
        let s = UniformBox::new(vec![0.0], vec![1.0]).unwrap();
        let e = nested_prior_value(&s, |v| (v[0] < 0.3).then_some(1.0), 1000, 3);
        assert!(matches!(e, Err(Error::SamplerLeavesBody { .. })));
    }

    #[test]
    fn thread_count_does_not_change_estimate() {
        let s = PiecewiseUniform::new(vec![0.0, 0.5, 1.0], vec![0.3, 0.7]).unwrap();
        let f = |v: &[f64]| Some(markov_inner_sup(v[0], 0.4));
        let a = nested_prior_value(&s, f, 5000, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| nested_prior_value(&s, f, 5000, 11).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn nested_program_is_a_prior_program_on_moments() {
        let outer = PriorClassSpec::new(
            crate::measures::MomentMap::powers(Support::unit(), 1),
            crate::measures::ConstraintSpec::equalities(&[0.25]).unwrap(),
            None,
        )
        .unwrap();
        let inner = AtomFn::new("markov", |q| markov_inner_sup(q, 0.5)).with_breakpoints(vec![0.5]);
        let p = reduce_nested(inner, Some(0.0), Some(1.0), &outer, Direction::Sup).unwrap();
        assert_eq!(p.n_atoms(), 2);
    }
}
