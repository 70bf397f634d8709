//! Local refinement of a global-phase vertex.
//!
//! Block-coordinate projected ascent over atom positions, the weights of
//! each measure and, for band programs in limit mode, log data factors.
//! Gradients are one-sided finite differences so that the step picks an
//! ascent direction at the jumps of indicator quantities. Every trial point
//! re-solves the mixing weights exactly, so iterates stay feasible.

use super::mixing::{better, enumerate, Column, Vertex};
use super::SolverConfig;
use crate::measures::{DiscreteMeasure, Support};
use crate::reduction::{Candidate, DataMode, ReducedProgram};

const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone)]
struct State {
    atoms: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    factors: Vec<Option<f64>>,
}

impl State {
    fn from_candidates(c: &[Candidate]) -> Self {
        Self {
            atoms: c.iter().map(|c| c.measure.atoms().to_vec()).collect(),
            weights: c.iter().map(|c| c.measure.weights().to_vec()).collect(),
            factors: c.iter().map(|c| c.data_factor).collect(),
        }
    }

    fn candidates(&self, s: Support) -> Vec<Candidate> {
        self.atoms
            .iter()
            .zip(&self.weights)
            .zip(&self.factors)
            .map(|((a, w), f)| Candidate {
                measure: DiscreteMeasure::from_parts_unchecked(s, a.clone(), w.clone()),
                data_factor: *f,
            })
            .collect()
    }
}

pub(crate) struct PolishOutcome {
    pub candidates: Vec<Candidate>,
    pub vertex: Vertex,
    pub converged: bool,
}

pub(crate) struct Polisher<'a> {
    pub program: &'a ReducedProgram,
    pub cfg: &'a SolverConfig,
    pub max_support: usize,
    /// Largest attainable ratio, when known.
    pub cap: Option<f64>,
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn one_sided(f0: f64, fp: Option<f64>, fm: Option<f64>, hp: f64, hm: f64) -> f64 {
    let dp = fp.map_or(f64::NEG_INFINITY, |f| (f - f0) / hp);
    let dm = fm.map_or(f64::INFINITY, |f| (f0 - f) / hm);
    let up = dp > 0.0 && dp.is_finite();
    let down = dm < 0.0 && dm.is_finite();
    match (up, down) {
        (true, true) => {
            if dp >= -dm {
                dp
            } else {
                dm
            }
        }
        (true, false) => dp,
        (false, true) => dm,
        _ => 0.0,
    }
}

impl Polisher<'_> {
    pub fn evaluate(&self, cands: &[Candidate]) -> Option<Vertex> {
        let mut cols = Vec::with_capacity(cands.len());
        for c in cands {
            let col = self.program.column(c).ok()??;
            let (num, den) = self.program.objective_terms(col.phi, col.data);
            if !num.is_finite() || !den.is_finite() {
                return None;
            }
            cols.push(Column { num, den, psi: col.psi });
        }
        let out = enumerate(&cols, self.program.constraints().intervals(), self.max_support, 1);
        out.best.into_iter().next()
    }

    fn value(&self, st: &State) -> Option<f64> {
        self.evaluate(&st.candidates(*self.program.support())).map(|v| v.ratio())
    }

    fn fixed_atom(&self, x: f64) -> bool {
        self.program.data_mode() == DataMode::Limit
            && self
                .program
                .observation()
                .is_some_and(|o| o.centers().iter().any(|&c| (c - x).abs() <= crate::measures::POINT_TOL))
    }

    pub fn run(&self, cands: Vec<Candidate>) -> Option<PolishOutcome> {
        let s = *self.program.support();
        let mut st = State::from_candidates(&cands);
        let mut vertex = self.evaluate(&cands)?;
        let mut cur = vertex.ratio();
        let uses_factors = self.program.uses_data_factors();
        let t0 = [0.1 * s.width(), 0.1, 0.5];
        let mut t = t0;
        if !uses_factors {
            t[2] = 0.0;
        }
        if st.weights.iter().all(|w| w.len() < 2) {
            t[1] = 0.0;
        }
        let mut iterations = 0;
        let mut converged = false;
        let mut grads: [Option<Vec<f64>>; 3] = [None, None, None];
        'outer: loop {
            if let Some(cap) = self.cap {
                if cur >= cap - 1e-15 * cap.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if t.iter().all(|&x| x < self.cfg.step_tol) {
                converged = true;
                break;
            }
            for b in 0..3 {
                if t[b] < self.cfg.step_tol {
                    continue;
                }
                if iterations >= self.cfg.max_iters {
                    break 'outer;
                }
                iterations += 1;
                if grads[b].is_none() {
                    grads[b] = Some(self.gradient(b, &st, cur));
                }
                let g = grads[b].as_ref().expect("gradient");
                let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    t[b] = 0.0;
                    continue;
                }
                let trial = self.step(b, &st, g, t[b] / norm);
                match self.evaluate(&trial.candidates(s)) {
                    Some(v) if better(v.ratio(), cur) => {
                        cur = v.ratio();
                        vertex = v;
                        st = trial;
                        t[b] = (2.0 * t[b]).min(t0[b]);
                        grads = [None, None, None];
                        for k in 0..3 {
                            if t[k] == 0.0 && k != b && (k != 2 || uses_factors) && (k != 1 || st.weights.iter().any(|w| w.len() > 1)) {
                                t[k] = t0[k] / 8.0;
                            }
                        }
                    }
                    _ => t[b] /= 2.0,
                }
            }
        }
        Some(PolishOutcome { candidates: st.candidates(s), vertex, converged })
    }

    fn gradient(&self, block: usize, st: &State, f0: f64) -> Vec<f64> {
        let s = self.program.support();
        match block {
            0 => {
                let mut g = Vec::new();
                for j in 0..st.atoms.len() {
                    for i in 0..st.atoms[j].len() {
                        let x = st.atoms[j][i];
                        if self.fixed_atom(x) {
                            g.push(0.0);
                            continue;
                        }
                        let up = (x + FD_STEP).min(s.hi());
                        let dn = (x - FD_STEP).max(s.lo());
                        let mut probe = st.clone();
                        let fp = (up > x).then(|| {
                            probe.atoms[j][i] = up;
                            self.value(&probe)
                        });
                        let fm = (dn < x).then(|| {
                            probe.atoms[j][i] = dn;
                            self.value(&probe)
                        });
                        g.push(one_sided(f0, fp.flatten(), fm.flatten(), up - x, x - dn));
                    }
                }
                g
            }
            1 => {
                let mut g = Vec::new();
                for j in 0..st.weights.len() {
                    let w = &st.weights[j];
                    if w.len() < 2 {
                        g.extend(std::iter::repeat_n(0.0, w.len()));
                        continue;
                    }
                    let mut d = Vec::with_capacity(w.len());
                    for i in 0..w.len() {
                        let mut v = w.clone();
                        v[i] += FD_STEP;
                        let mut probe = st.clone();
                        probe.weights[j] = project_simplex(&v);
                        d.push(self.value(&probe).map_or(0.0, |f| (f - f0) / FD_STEP));
                    }
                    let mean = d.iter().sum::<f64>() / d.len() as f64;
                    g.extend(d.iter().map(|x| x - mean));
                }
                g
            }
            _ => {
                let (lo, hi) = self
                    .program
                    .band()
                    .map(|b| b.relative_range(self.program.n_obs()))
                    .unwrap_or((1.0, 1.0));
                let (llo, lhi) = (lo.ln(), hi.ln());
                st.factors
                    .iter()
                    .enumerate()
                    .map(|(j, f)| {
                        let Some(f) = f else { return 0.0 };
                        let l = f.ln();
                        let up = (l + FD_STEP).min(lhi);
                        let dn = (l - FD_STEP).max(llo);
                        let mut probe = st.clone();
                        let fp = (up > l).then(|| {
                            probe.factors[j] = Some(up.exp());
                            self.value(&probe)
                        });
                        let fm = (dn < l).then(|| {
                            probe.factors[j] = Some(dn.exp());
                            self.value(&probe)
                        });
                        one_sided(f0, fp.flatten(), fm.flatten(), up - l, l - dn)
                    })
                    .collect()
            }
        }
    }

    fn step(&self, block: usize, st: &State, g: &[f64], scale: f64) -> State {
        let s = self.program.support();
        let mut next = st.clone();
        match block {
            0 => {
                let mut k = 0;
                for atoms in &mut next.atoms {
                    for x in atoms.iter_mut() {
                        *x = s.clamp(*x + scale * g[k]);
                        k += 1;
                    }
                }
            }
            1 => {
                let mut k = 0;
                for w in &mut next.weights {
                    let v: Vec<f64> = w.iter().enumerate().map(|(i, x)| x + scale * g[k + i]).collect();
                    k += w.len();
                    if v.len() > 1 {
                        *w = project_simplex(&v);
                    }
                }
            }
            _ => {
                let (lo, hi) = self
                    .program
                    .band()
                    .map(|b| b.relative_range(self.program.n_obs()))
                    .unwrap_or((1.0, 1.0));
                for (f, d) in next.factors.iter_mut().zip(g) {
                    if let Some(f) = f {
                        *f = (f.ln() + scale * d).exp().clamp(lo, hi);
                    }
                }
            }
        }
        next
    }
}
