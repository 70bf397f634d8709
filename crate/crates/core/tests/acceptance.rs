//! Acceptance criteria: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use brittle_bayes::measures::{
    AtomFn, ConstraintSpec, DiscreteMeasure, Interval, MeasureFn, MomentMap, Observation, QuantityOfInterest, Support,
};
use brittle_bayes::posterior::{
    brittleness_verdict, conditional_expectation, info_bound_sandwich, posterior_upper_bound, DiscretePrior, Model,
    VerdictOptions,
};
use brittle_bayes::reduction::{
    markov_inner_sup, reduce_nested, reduce_prior, DataBand, Direction, MomentSampler, PosteriorOptions, PriorClassSpec,
};
use brittle_bayes::scenarios::{
    learning_curve, model_ab_posteriors, scenario_moment_class, IterativeUniform, ModelAbOptions, MomentClassOptions,
};
use brittle_bayes::solver::{solve, SolveStatus, SolverConfig};
use brittle_bayes::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn mean_class(q: f64) -> PriorClassSpec {
    PriorClassSpec::new(MomentMap::powers(Support::unit(), 1), ConstraintSpec::equalities(&[q]).unwrap(), None).unwrap()
}

fn coin(n_coins: f64) -> Result<f64> {
    let s = Support::unit();
    let unfair: Model = DiscreteMeasure::dirac(s, 1.0)?.into();
    let fair: Model = DiscreteMeasure::new(s, vec![0.0, 1.0], vec![0.5, 0.5])?.into();
    let phi = QuantityOfInterest::custom(MeasureFn::new("unfair", |m| f64::from(m.point_mass(1.0) == 1.0)), Some(0.0), Some(1.0))?;
    let prior = DiscretePrior::new(vec![unfair, fair], vec![1.0 / n_coins, (n_coins - 1.0) / n_coins])?;
    conditional_expectation(&prior, &phi, &Observation::new(s, vec![1.0; 10], 0.5)?)
}

fn c1_coin() -> Result<Outcome> {
    let t = Instant::now();
    let exact = coin(102.0)?;
    let perturbed = coin(100.0)?;
    let dt = t.elapsed();
    let e1 = (exact - 1.0 / (1.0 + 101.0 * 2f64.powi(-10))).abs();
    let e2 = (perturbed - 1.0 / (1.0 + 99.0 * 2f64.powi(-10))).abs();
    Ok(Outcome {
        pass: e1 <= 1e-12 && e2 <= 1e-12 && dt < Duration::from_millis(1),
        detail: format!("exact {exact:.9} (err {e1:.1e}), perturbed {perturbed:.9} (err {e2:.1e}), {dt:?} < 1ms"),
    })
}

fn c2_prior_bound() -> Result<Outcome> {
    let t = Instant::now();
    let cfg = SolverConfig::default().with_restarts(4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut worst_gap) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let a: f64 = rng.random_range(0.05..0.95);
        let q: f64 = rng.random_range(0.01..0.99) * a;
        let spec = mean_class(q);
        let primary = solve(&reduce_prior(&QuantityOfInterest::tail(a), &spec, Direction::Sup)?, &cfg)?.value;
        let inner = AtomFn::new("markov_inner_sup", move |x| markov_inner_sup(x, a)).with_breakpoints(vec![a]);
        let nested = solve(&reduce_nested(inner, Some(0.0), Some(1.0), &spec, Direction::Sup)?, &cfg)?.value;
        worst = worst.max((primary - q / a).abs()).max((nested - q / a).abs());
        worst_gap = worst_gap.max((primary - nested).abs());
    }
    let dt = t.elapsed();
    Ok(Outcome {
        pass: worst <= 1e-3 && worst_gap <= 1e-6 && dt < Duration::from_secs(5),
        detail: format!("max |value - q/a| {worst:.1e} <= 1e-3, max path gap {worst_gap:.1e} <= 1e-6, {dt:?} < 5s"),
    })
}

/// `sup` of the mass at or above `a` over two-atom measures on a grid with
/// mean `q`.
fn two_atom_brute_force(q: f64, a: f64, grid: &[f64]) -> f64 {
    let mut best = f64::from(q >= a);
    for &x1 in grid.iter().filter(|&&x| x <= q) {
        for &x2 in grid.iter().filter(|&&x| x >= q && x > x1) {
            let w2 = (q - x1) / (x2 - x1);
            let v = w2 * f64::from(x2 >= a) + (1.0 - w2) * f64::from(x1 >= a);
            best = best.max(v);
        }
    }
    best
}

fn c3_markov_inner() -> Result<Outcome> {
    let t = Instant::now();
    let grid = Support::unit().grid(2001);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (q, a): (f64, f64) = (rng.random(), rng.random_range(0.01..1.0));
        worst = worst.max((markov_inner_sup(q, a) - two_atom_brute_force(q, a, &grid)).abs());
    }
    let dt = t.elapsed();
    Ok(Outcome {
        pass: worst <= 1e-3 && dt < Duration::from_secs(10),
        detail: format!("max error {worst:.1e} <= 1e-3 over 50 draws, {dt:?} < 10s"),
    })
}

fn centers(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.05 + 0.6 * (i as f64 + 0.5) / n as f64).collect()
}

fn c4_posterior_brittleness() -> Result<Outcome> {
    let t = Instant::now();
    let cfg = SolverConfig::default().with_restarts(8);
    let (q, a) = (0.375, 0.75);
    let phi = QuantityOfInterest::tail(a);
    let mut limit = Vec::new();
    for n in [1, 3, 10] {
        let obs = Observation::new(Support::unit(), centers(n), 0.01)?;
        limit.push(posterior_upper_bound(&phi, &mean_class(q), &obs, &cfg, PosteriorOptions::limit())?.value);
    }
    let mut sweep = Vec::new();
    for d in [0.1, 0.01, 0.001] {
        let obs = Observation::new(Support::unit(), centers(3), d)?;
        sweep.push(posterior_upper_bound(&phi, &mean_class(q), &obs, &cfg, PosteriorOptions::default())?.value);
    }
    let dt = t.elapsed();
    let worst = limit.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let monotone = sweep.windows(2).all(|w| w[1] >= w[0]);
    Ok(Outcome {
        pass: worst <= 1e-3 && monotone && dt < Duration::from_secs(30),
        detail: format!("limit values {limit:?} (max |v - 1| {worst:.1e}), sweep {sweep:?} monotone {monotone}, {dt:?} < 30s"),
    })
}

fn c5_learning() -> Result<Outcome> {
    let t = Instant::now();
    let cfg = SolverConfig::default().with_restarts(8);
    let (a, m) = (0.75, 0.375);
    let obs = Observation::new(Support::unit(), centers(2), 0.01)?;
    let mut worst = 0.0f64;
    let mut values = Vec::new();
    for alpha in [1.0, 2.0, 10.0] {
        let spec = mean_class(m).with_band(DataBand::joint(alpha)?);
        let v = posterior_upper_bound(&QuantityOfInterest::tail(a), &spec, &obs, &cfg, PosteriorOptions::limit())?.value;
        worst = worst.max((v - learning_curve(alpha, a, m)?).abs());
        values.push(v);
    }
    let dt = t.elapsed();
    let quoted = (values[0] - 0.5).abs() <= 1e-3 && (values[1] - 0.8).abs() <= 1e-3 && (values[2] - 0.99).abs() <= 1e-3;
    Ok(Outcome {
        pass: worst <= 1e-3 && quoted && dt < Duration::from_secs(30),
        detail: format!("values {values:?}, max error vs closed form {worst:.1e} <= 1e-3, {dt:?} < 30s"),
    })
}

fn c6_model_ab() -> Result<Outcome> {
    let t = Instant::now();
    let r = model_ab_posteriors(&ModelAbOptions { delta: 0.005, delta_c: 0.01, gap: 1e-9, ..ModelAbOptions::default() })?;
    let dt = t.elapsed();
    Ok(Outcome {
        pass: (r.post_a - 0.5).abs() <= 5e-3 && r.post_b >= 0.95 && dt < Duration::from_secs(60),
        detail: format!("post_a {:.6} (|.-0.5| <= 5e-3), post_b {:.6} (>= 0.95), {dt:?} < 60s", r.post_a, r.post_b),
    })
}

fn c7_dilation() -> Result<Outcome> {
    let t = Instant::now();
    let s = Support::unit();
    let cfg = SolverConfig::default().with_restarts(4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut certified, mut attempts, mut worst) = (0, 0, f64::INFINITY);
    while certified < 20 && attempts < 60 {
        attempts += 1;
        let k = rng.random_range(1..=3usize);
        let n = rng.random_range(k + 2..=k + 5);
        let delta = 0.01;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5 + 0.4 * (rng.random::<f64>() - 0.5)) / n as f64).collect();
        let obs = Observation::new(s, xs, delta)?;
        let sampler = IterativeUniform::new(s, k, 101)?;
        let seed: u64 = rng.random();
        let opts = VerdictOptions { n_samples: 400, seed, ..VerdictOptions::default() };
        let phi = QuantityOfInterest::mean();
        let psi = MomentMap::powers(s, k as u32);
        let v = brittleness_verdict(&phi, &psi, &sampler, &obs, &opts)?;
        if !(v.vanishing_data && v.near_sup) {
            continue;
        }
        certified += 1;
        // moment class with the mean moment vector of Q
        let mut qbar = vec![0.0; k];
        let draws = 200;
        for i in 0..draws {
            let q = sampler.sample(&mut brittle_bayes::numeric::sample_rng(seed, i)).expect("sampler stays in body");
            qbar.iter_mut().zip(&q).for_each(|(a, b)| *a += b / draws as f64);
        }
        let spec = PriorClassSpec::new(psi, ConstraintSpec::equalities(&qbar)?, None)?;
        let prior = solve(&reduce_prior(&phi, &spec, Direction::Sup)?, &cfg)?;
        let post = posterior_upper_bound(&phi, &spec, &obs, &cfg, PosteriorOptions::default())?;
        if prior.status == SolveStatus::Infeasible || post.status == SolveStatus::Infeasible {
            worst = f64::NEG_INFINITY;
            continue;
        }
        worst = worst.min(post.value - prior.value);
    }
    let dt = t.elapsed();
    Ok(Outcome {
        pass: certified == 20 && worst >= -1e-4 && dt < Duration::from_secs(120),
        detail: format!(
            "{certified}/20 certified in {attempts} draws, min(posterior - prior) {worst:.2e} >= -1e-4, {dt:?} < 120s"
        ),
    })
}

fn random_spec(rng: &mut ChaCha8Rng) -> Result<PriorClassSpec> {
    let s = Support::unit();
    let k = rng.random_range(0..=2u32);
    if k == 0 {
        return Ok(PriorClassSpec::unconstrained(s));
    }
    // targets from a random three-atom measure, widened into intervals
    let xs: Vec<f64> = (0..3).map(|_| rng.random()).collect();
    let ws: Vec<f64> = (0..3).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = ws.iter().sum();
    let mut intervals = Vec::new();
    for j in 1..=k {
        let m: f64 = xs.iter().zip(&ws).map(|(x, w)| w / total * x.powi(j as i32)).sum();
        let half: f64 = if rng.random::<bool>() { 0.0 } else { 0.05 * rng.random::<f64>() };
        intervals.push(Interval::new((m - half).max(0.0), (m + half).min(1.0)));
    }
    PriorClassSpec::new(MomentMap::powers(s, k), ConstraintSpec::new(intervals)?, None)
}

fn c8_sandwich() -> Result<Outcome> {
    let t = Instant::now();
    let cfg = SolverConfig::default().with_restarts(4);
    let grid = Support::unit().grid(51);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut nonempty, mut worst) = (0, 0.0f64);
    for _ in 0..50 {
        let spec = random_spec(&mut rng)?;
        let phi = if rng.random::<bool>() { QuantityOfInterest::mean() } else { QuantityOfInterest::tail(rng.random_range(0.1..0.9)) };
        let obs = if rng.random::<bool>() {
            None
        } else {
            let n = rng.random_range(1..=2usize);
            Some(Observation::new(Support::unit(), (0..n).map(|_| rng.random()).collect(), 0.05)?)
        };
        let b = info_bound_sandwich(&phi, &spec, obs.as_ref(), &grid, &cfg, PosteriorOptions::default())?;
        if b.has_middle() {
            nonempty += 1;
            worst = worst.max(b.order_violation());
        }
    }
    let dt = t.elapsed();
    Ok(Outcome {
        pass: nonempty > 0 && worst <= 1e-9,
        detail: format!("{nonempty}/50 nonempty chains, max ordering violation {worst:.1e} <= 1e-9, {dt:?}"),
    })
}

fn c9_collapse() -> Result<Outcome> {
    let s = Support::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let c: f64 = rng.random_range(0.05..0.95);
        let center: f64 = rng.random_range(0.2..0.8);
        let obs = Observation::new(s, vec![center; rng.random_range(1..=4)], 0.05)?;
        let n_models = rng.random_range(1..=6);
        let mut models = Vec::new();
        for _ in 0..n_models {
            // mass c inside the ball, the rest outside it
            let far: f64 = if rng.random::<bool>() { rng.random_range(0.0..center - 0.05) } else { rng.random_range(center + 0.05..1.0) };
            let near = center + rng.random_range(-0.04..0.04);
            models.push(DiscreteMeasure::new(s, vec![near, far], vec![c, 1.0 - c])?.into());
        }
        let weights: Vec<f64> = (0..n_models).map(|_| rng.random_range(0.01..1.0)).collect();
        let prior = DiscretePrior::proportional(models, weights)?;
        let phi = QuantityOfInterest::mean();
        worst = worst.max((conditional_expectation(&prior, &phi, &obs)? - prior.expectation(&phi)?).abs());
    }
    Ok(Outcome { pass: worst <= 1e-12, detail: format!("max |posterior - prior| {worst:.1e} <= 1e-12 over 20 priors") })
}

fn c10_moment_class() -> Result<Outcome> {
    let t = Instant::now();
    let (mut runs, mut failed) = (0, Vec::new());
    for k in 1..=3 {
        for n in k + 2..=k + 5 {
            for seed in 1..=5 {
                runs += 1;
                let r = scenario_moment_class(&MomentClassOptions { k, n, seed, ..MomentClassOptions::default() })?;
                if !r.pass {
                    failed.push((k, n, seed));
                }
            }
        }
    }
    let dt = t.elapsed();
    Ok(Outcome {
        pass: failed.is_empty() && dt < Duration::from_secs(180),
        detail: format!("{}/{runs} certified with implied bounds (0, 1), failures {failed:?}, {dt:?} < 180s", runs - failed.len()),
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("coin posterior", c1_coin),
        ("prior bound q/a", c2_prior_bound),
        ("markov inner sup", c3_markov_inner),
        ("posterior brittleness", c4_posterior_brittleness),
        ("learning vs robustness", c5_learning),
        ("model a/b flip", c6_model_ab),
        ("dilation", c7_dilation),
        ("sandwich ordering", c8_sandwich),
        ("equiprobable-data collapse", c9_collapse),
        ("moment-class brittleness", c10_moment_class),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {detail} [{:.2?}]", i + 1, t.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
