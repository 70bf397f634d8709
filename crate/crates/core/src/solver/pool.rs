//! Candidate measures for the global phase.

use crate::measures::{BallMass, DiscreteMeasure, Support};
use crate::reduction::{Candidate, DataMode, ProgramKind, ReducedProgram};

/// Ball weights `s·n` of the "mostly Dirac" candidates, relative to the
/// data count.
const BALL_WEIGHT_LADDER: [f64; 8] = [1.0, 0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-9];

/// Distance, relative to the support width, of the points placed on either
/// side of a breakpoint.
const BREAKPOINT_OFFSET: f64 = 1e-9;

/// Smallest data probability a generated candidate may carry.
const MIN_CANDIDATE_DATA: f64 = 1e-250;

/// Grid of `n` points shifted by `shift` cells, with both endpoints and the
/// program's special points (breakpoints, data centers, ball edges).
pub(crate) fn grid(program: &ReducedProgram, n: usize, shift: f64) -> Vec<f64> {
    let s = program.support();
    let mut pts = s.grid(n.max(2));
    if shift > 0.0 {
        let h = s.width() / (n.max(2) - 1) as f64;
        let last = pts.len() - 1;
        for x in &mut pts[1..last] {
            *x = s.clamp(*x + shift * h);
        }
    }
    // indicator optima sit at one-sided limits of their jumps
    let eps = BREAKPOINT_OFFSET * s.width();
    for b in program.qoi().breakpoints().into_iter().chain(program.moment_map().breakpoints()) {
        pts.extend([b - eps, b, b + eps]);
    }
    if let Some(obs) = program.observation() {
        pts.extend_from_slice(obs.centers());
        if program.data_mode() == DataMode::Finite {
            for &c in obs.centers() {
                pts.push(c - obs.radius());
                pts.push(c + obs.radius());
            }
        }
    }
    if let Some(pos) = &program.positive {
        pts.extend(pos.psi0.breakpoints());
    }
    finish(s, pts)
}

fn finish(s: &Support, mut pts: Vec<f64>) -> Vec<f64> {
    pts.retain(|x| x.is_finite() && s.contains(*x));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    pts
}

fn dirac(s: &Support, x: f64) -> DiscreteMeasure {
    DiscreteMeasure::dirac(*s, x).expect("grid point inside support")
}

fn ladder(lo: f64, hi: f64) -> Vec<f64> {
    let mut v = vec![lo, lo.sqrt(), 1.0, hi.sqrt(), hi];
    v.retain(|f| *f >= lo && *f <= hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Candidate measures: Diracs on the grid, plus, for programs with data,
/// Diracs carrying a small mass on every observed point.
pub(crate) fn build(program: &ReducedProgram, n: usize, shift: f64) -> Vec<Candidate> {
    let s = *program.support();
    let pts = grid(program, n, shift);
    let mut out = Vec::new();
    let posterior = matches!(program.kind(), ProgramKind::PosteriorFractional | ProgramKind::LambdaThreshold);
    let obs = program.observation().filter(|o| !o.is_empty());
    match (posterior, obs) {
        (true, Some(obs)) if program.uses_data_factors() => {
            let (lo, hi) = program.band().expect("band").relative_range(obs.count());
            let factors = ladder(lo, hi);
            for &y in &pts {
                for &f in &factors {
                    out.push(Candidate::with_factor(dirac(&s, y), f));
                }
            }
        }
        (true, Some(obs)) => {
            out.extend(pts.iter().map(|&y| Candidate::new(dirac(&s, y))));
            let n_obs = obs.count();
            let ball_sets: Vec<Vec<f64>> = match program.band() {
                Some(band) => {
                    let reference: Vec<f64> =
                        obs.centers().iter().map(|&c| band.reference().ball_mass(c, obs.radius())).collect();
                    let (lo, hi) = band.relative_range(n_obs);
                    ladder(lo, hi)
                        .into_iter()
                        .map(|f| {
                            let rho = f.powf(1.0 / n_obs as f64);
                            reference.iter().map(|m| rho * m).collect()
                        })
                        .collect()
                }
                None => BALL_WEIGHT_LADDER
                    .iter()
                    .map(|f| f / n_obs as f64)
                    .filter(|s| s.powi(n_obs as i32) >= MIN_CANDIDATE_DATA)
                    .map(|s| vec![s; n_obs])
                    .collect(),
            };
            for balls in ball_sets {
                let rest = 1.0 - balls.iter().sum::<f64>();
                if rest < -1e-12 {
                    continue;
                }
                if rest <= 1e-12 {
                    let m = DiscreteMeasure::new(s, obs.centers().to_vec(), balls.clone());
                    if let Ok(m) = m {
                        out.push(Candidate::new(m));
                    }
                    continue;
                }
                let mut weights = balls.clone();
                weights.push(rest);
                for &y in &pts {
                    let mut atoms = obs.centers().to_vec();
                    atoms.push(y);
                    if let Ok(m) = DiscreteMeasure::new(s, atoms, weights.clone()) {
                        out.push(Candidate::new(m.pruned(0.0)));
                    }
                }
            }
        }
        _ => out.extend(pts.iter().map(|&y| Candidate::new(dirac(&s, y)))),
    }
    out.retain(|c| c.measure.len() <= program.n_atoms());
    out
}
