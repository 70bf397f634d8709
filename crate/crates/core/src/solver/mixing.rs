//! Exact vertex enumeration for the mixing problem
//!
//! `max Σ p_j num_j / Σ p_j den_j` over `p` in the simplex with
//! `lo ≤ Σ p_j ψ_j ≤ hi` componentwise. The objective is quasi-linear, so
//! the optimum sits at a vertex of the feasible polytope, and a vertex with
//! support `S` makes `|S| - 1` constraint rows tight.

use itertools::Itertools;

use crate::measures::Interval;
use crate::numeric::solve_dense;

/// Denominators at or below this are treated as zero.
pub const DEN_FLOOR: f64 = 1e-300;

const NEG_WEIGHT_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Column {
    pub num: f64,
    pub den: f64,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Vertex {
    pub idx: Vec<usize>,
    pub p: Vec<f64>,
    pub num: f64,
    pub den: f64,
}

impl Vertex {
    pub fn ratio(&self) -> f64 {
        self.num / self.den
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct MixOutcome {
    /// Best vertices with distinct supports, best first.
    pub best: Vec<Vertex>,
    pub feasible: bool,
    pub unbounded: bool,
}

impl MixOutcome {
    pub fn top(&self) -> Option<&Vertex> {
        self.best.first()
    }
}

pub(crate) fn better(a: f64, b: f64) -> bool {
    a > b + TIE_TOL * b.abs()
}

/// Inserts `v` into the ranked list if it ranks. A support already listed
/// keeps only its better vertex.
pub(crate) fn offer(list: &mut Vec<Vertex>, v: Vertex, keep: usize) {
    let r = v.ratio();
    if let Some(k) = list.iter().position(|w| w.idx == v.idx) {
        if !better(r, list[k].ratio()) {
            return;
        }
        list.remove(k);
    }
    let pos = list.iter().position(|w| better(r, w.ratio())).unwrap_or(list.len());
    if pos < keep {
        list.insert(pos, v);
        list.truncate(keep);
    }
}

fn feasible(psi_mix: &[f64], intervals: &[Interval]) -> bool {
    psi_mix.iter().zip(intervals).all(|(&v, iv)| {
        let tol_lo = FEAS_TOL * (1.0 + iv.lo.abs().min(1e300));
        let tol_hi = FEAS_TOL * (1.0 + iv.hi.abs().min(1e300));
        v >= iv.lo - tol_lo && v <= iv.hi + tol_hi
    })
}

/// Tight-row choices for a support of size `s`: `s - 1` distinct
/// components, each pinned at a finite bound.
fn tight_choices(intervals: &[Interval], r: usize) -> Vec<Vec<(usize, f64)>> {
    let sides: Vec<Vec<f64>> = intervals
        .iter()
        .map(|iv| {
            if iv.is_point() {
                vec![iv.lo]
            } else {
                [iv.lo, iv.hi].into_iter().filter(|b| b.is_finite()).collect()
            }
        })
        .collect();
    let comps: Vec<usize> = (0..intervals.len()).filter(|&i| !sides[i].is_empty()).collect();
    let mut out = Vec::new();
    for combo in comps.iter().copied().combinations(r) {
        for pick in combo.iter().map(|&i| sides[i].iter().map(move |&b| (i, b))).multi_cartesian_product() {
            out.push(pick);
        }
        if r == 0 {
            out.push(Vec::new());
        }
    }
    out.dedup();
    out
}

/// Number of linear systems [`enumerate`] would solve.
pub(crate) fn vertex_count(n_cols: usize, intervals: &[Interval], max_support: usize) -> f64 {
    let mut total = 0.0;
    for s in 1..=max_support.min(n_cols) {
        let mut comb = 1.0;
        for k in 0..s {
            comb *= (n_cols - k) as f64 / (k + 1) as f64;
        }
        total += comb * tight_choices(intervals, s - 1).len().max(if s == 1 { 1 } else { 0 }) as f64;
    }
    total
}

struct Scratch<'a> {
    cols: &'a [Column],
    intervals: &'a [Interval],
    keep: usize,
    out: MixOutcome,
    mix: Vec<f64>,
}

impl Scratch<'_> {
    fn consider(&mut self, idx: &[usize], p: &mut [f64]) {
        if p.iter().any(|&w| !(w >= -NEG_WEIGHT_TOL)) {
            return;
        }
        let mut total = 0.0;
        for w in p.iter_mut() {
            *w = w.max(0.0);
            total += *w;
        }
        if !(total > 0.0) {
            return;
        }
        p.iter_mut().for_each(|w| *w /= total);
        self.mix.iter_mut().for_each(|v| *v = 0.0);
        let (mut num, mut den) = (0.0, 0.0);
        for (&j, &w) in idx.iter().zip(p.iter()) {
            let c = &self.cols[j];
            num += w * c.num;
            den += w * c.den;
            for (acc, v) in self.mix.iter_mut().zip(&c.psi) {
                *acc += w * v;
            }
        }
        if !feasible(&self.mix, self.intervals) {
            return;
        }
        self.out.feasible = true;
        if den <= DEN_FLOOR {
            if den == 0.0 && num > 0.0 {
                self.out.unbounded = true;
            }
            return;
        }
        let (idx, p): (Vec<usize>, Vec<f64>) =
            idx.iter().zip(p.iter()).filter(|(_, &w)| w > 0.0).map(|(&j, &w)| (j, w)).unzip();
        let v = Vertex { idx, p, num, den };
        if self.out.best.len() >= self.keep
            && !better(v.ratio(), self.out.best.last().map_or(f64::NEG_INFINITY, Vertex::ratio))
        {
            return;
        }
        offer(&mut self.out.best, v, self.keep);
    }
}

/// Enumerates every vertex with support of at most `max_support` columns.
pub(crate) fn enumerate(cols: &[Column], intervals: &[Interval], max_support: usize, keep: usize) -> MixOutcome {
    let mut sc = Scratch { cols, intervals, keep: keep.max(1), out: MixOutcome::default(), mix: vec![0.0; intervals.len()] };
    let n = cols.len();
    let max_s = max_support.min(n);
    if max_s >= 1 {
        for j in 0..n {
            sc.consider(&[j], &mut [1.0]);
        }
    }
    if max_s >= 2 {
        let choices = tight_choices(intervals, 1);
        for a in 0..n {
            for b in a + 1..n {
                for ch in &choices {
                    let (i, bound) = ch[0];
                    let (x, y) = (cols[a].psi[i], cols[b].psi[i]);
                    let d = x - y;
                    if d.abs() <= 1e-14 * (1.0 + x.abs().max(y.abs())) {
                        continue;
                    }
                    let pa = (bound - y) / d;
                    sc.consider(&[a, b], &mut [pa, 1.0 - pa]);
                }
            }
        }
    }
    for s in 3..=max_s {
        let choices = tight_choices(intervals, s - 1);
        for subset in (0..n).combinations(s) {
            for ch in &choices {
                let mut a: Vec<Vec<f64>> = Vec::with_capacity(s);
                let mut b = Vec::with_capacity(s);
                a.push(vec![1.0; s]);
                b.push(1.0);
                for &(i, bound) in ch {
                    a.push(subset.iter().map(|&j| cols[j].psi[i]).collect());
                    b.push(bound);
                }
                if let Some(mut p) = solve_dense(&mut a, &mut b) {
                    sc.consider(&subset, &mut p);
                }
            }
        }
    }
    sc.out
}
