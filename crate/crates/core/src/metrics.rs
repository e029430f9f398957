//! Summary statistics read directly off the closed form.
//!
//! Level moments are conditional on the chain being in the repeating portion;
//! boundary states have no level and are reported as their own mass bucket.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math::powi;
use crate::series::negbin_upper_sum;
use crate::solver::{SolutionTerm, StationaryDistribution};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub total_mass: f64,
    pub boundary_mass: f64,
    /// Mean level given the chain is in the repeating portion.
    pub mean_level: f64,
    /// Level variance given the chain is in the repeating portion.
    pub level_variance: f64,
    pub phase_marginals: Vec<f64>,
    /// `(t, P(level ≥ t))`; boundary states never count.
    pub tail: Vec<(u64, f64)>,
    pub boundary_probs: Vec<(String, f64)>,
}

/// `(Σ w, Σ a w, Σ a² w)` over `a ≥ 1` with `w = C(a−1+n, n) β^a`.
fn term_moments(t: &SolutionTerm) -> (f64, f64, f64) {
    let b = t.base;
    if b == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let n = t.degree as u64;
    let nf = n as f64;
    let q = 1.0 - b;
    let s0 = b / powi(q, n + 1);
    let s1 = b * (1.0 + nf * b) / powi(q, n + 2);
    let deriv = (1.0 + 2.0 * nf * b) / powi(q, n + 2) + b * (1.0 + nf * b) * (nf + 2.0) / powi(q, n + 3);
    let s2 = b * deriv;
    (t.coeff * s0, t.coeff * s1, t.coeff * s2)
}

/// `Σ_{a ≥ from} C(a−1+n, n) β^a · coeff` for `from ≥ 1`.
fn term_tail(t: &SolutionTerm, from: u64, j0: u64) -> f64 {
    if t.base == 0.0 {
        return 0.0;
    }
    let upper = negbin_upper_sum(t.base, t.degree as u64, j0 + from, j0 + 1).expect("bases lie in [0, 1)");
    t.coeff * powi(t.base, from) * upper
}

pub fn compute_metrics(dist: &StationaryDistribution, tail_thresholds: &[u64]) -> MetricsReport {
    let j0 = dist.j0() as f64;
    let boundary_mass = dist.boundary_mass();
    let mut mass = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    let mut phase_marginals = Vec::with_capacity(dist.num_phases());
    for m in 0..dist.num_phases() {
        let p0 = dist.level_j0_probs()[m];
        let (mut s0, mut s1, mut s2) = (p0, j0 * p0, j0 * j0 * p0);
        for t in &dist.phase_solutions()[m] {
            let (w0, w1, w2) = term_moments(t);
            s0 += w0;
            s1 += j0 * w0 + w1;
            s2 += j0 * j0 * w0 + 2.0 * j0 * w1 + w2;
        }
        phase_marginals.push(s0);
        mass += s0;
        first += s1;
        second += s2;
    }
    let (mean_level, level_variance) = if mass > 0.0 {
        let mean = first / mass;
        (mean, (second / mass - mean * mean).max(0.0))
    } else {
        (0.0, 0.0)
    };
    let tail = tail_thresholds
        .iter()
        .map(|&t| {
            let p = if t <= dist.j0() {
                mass
            } else {
                let from = t - dist.j0();
                dist.phase_solutions()
                    .iter()
                    .flatten()
                    .map(|term| term_tail(term, from, dist.j0()))
                    .sum::<f64>()
            };
            (t, p.max(0.0))
        })
        .collect();
    MetricsReport {
        total_mass: boundary_mass + mass,
        boundary_mass,
        mean_level,
        level_variance,
        phase_marginals,
        tail,
        boundary_probs: dist
            .boundary_names()
            .iter()
            .cloned()
            .zip(dist.boundary_probs().iter().copied())
            .collect(),
    }
}
