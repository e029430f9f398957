//! Reference computations that share no formulas with the solver.
//!
//! [`truncated_stationary`] solves the generator cut off at a finite level,
//! and [`iterate_rate_matrix`] runs the classic matrix-geometric fixed-point
//! iteration. The [`clearing`] submodule does the same for a single M/M/1
//! queue with clearing by solving truncated absorbing chains.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::chain::{build_truncated_generator_with_cap, ChainSpec, SpecError, StateId, DEFAULT_STATE_CAP};
use crate::linalg::{BandMatrix, DenseMatrix, LinalgError, LuDecomposition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("rate-matrix iteration did not converge after {iterations} steps (last change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },
    #[error("truncated solve produced no positive mass")]
    NoMass,
}

/// Default tolerance on the mass in the top two levels of a truncation.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationOptions {
    pub tol: f64,
    pub state_cap: usize,
}

impl Default for TruncationOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TRUNCATION_TOL,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

/// Stationary vector of a truncated chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSolution {
    pub j0: u64,
    pub j_max: u64,
    pub n_boundary: usize,
    pub n_phases: usize,
    pub probs: Vec<f64>,
    /// Mass in the two highest levels.
    pub top_mass: f64,
    /// Whether `top_mass` fell below the tolerance before the state cap.
    pub converged: bool,
}

impl TruncatedSolution {
    pub fn index_of(&self, s: StateId) -> Option<usize> {
        match s {
            StateId::Boundary(x) => (x < self.n_boundary).then_some(x),
            StateId::Repeating { phase, level } => {
                if phase >= self.n_phases || level < self.j0 || level > self.j_max {
                    return None;
                }
                Some(self.n_boundary + (level - self.j0) as usize * self.n_phases + phase)
            }
        }
    }

    /// Probability of `s`; states above the truncation have probability 0.
    pub fn prob(&self, s: StateId) -> f64 {
        self.index_of(s).map_or(0.0, |i| self.probs[i])
    }

    /// Row vector `(π_(0,j), ..., π_(M,j))`.
    pub fn level(&self, j: u64) -> Vec<f64> {
        (0..self.n_phases)
            .map(|phase| self.prob(StateId::Repeating { phase, level: j }))
            .collect()
    }
}

/// Solves `πQ = 0` on the chain truncated at `j_max` (upward moves out of
/// `j_max` dropped), without adapting the truncation.
pub fn truncated_stationary_fixed(
    spec: &ChainSpec,
    j_max: u64,
    state_cap: usize,
) -> Result<TruncatedSolution, OracleError> {
    let gen = build_truncated_generator_with_cap(spec, j_max, state_cap)?;
    let n = gen.dim();
    let (lo, hi) = gen.bandwidths();
    // Q^T has the bandwidths swapped.
    let mut a = BandMatrix::zeros(n, hi, lo);
    for i in 0..n {
        a.add(i, i, gen.diagonal[i]);
        for &(j, v) in &gen.rows[i] {
            a.add(j, i, v);
        }
    }
    // Pin state 0 instead of using a dense normalization row.
    a.set_row_zero(0);
    a.add(0, 0, 1.0);
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let mut p = a.solve(&rhs)?;
    let total: f64 = p.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(OracleError::NoMass);
    }
    p.iter_mut().for_each(|v| *v /= total);
    let n_b = spec.num_boundary_states();
    let n_p = spec.num_phases();
    let top_mass: f64 = p[n - 2 * n_p..].iter().sum();
    Ok(TruncatedSolution {
        j0: spec.j0(),
        j_max,
        n_boundary: n_b,
        n_phases: n_p,
        probs: p,
        top_mass,
        converged: false,
    })
}

/// Truncated stationary solve that doubles the number of levels until the
/// mass in the top two levels drops below `opts.tol` or the state cap is hit.
pub fn truncated_stationary(
    spec: &ChainSpec,
    j_max: u64,
    opts: &TruncationOptions,
) -> Result<TruncatedSolution, OracleError> {
    let j0 = spec.j0();
    let mut j_max = j_max.max(j0 + 2);
    let mut sol = truncated_stationary_fixed(spec, j_max, opts.state_cap)?;
    loop {
        if sol.top_mass.abs() < opts.tol {
            sol.converged = true;
            return Ok(sol);
        }
        let next = j0 + 2 * (j_max - j0);
        match truncated_stationary_fixed(spec, next, opts.state_cap) {
            Ok(s) => {
                sol = s;
                j_max = next;
            }
            Err(OracleError::Spec(SpecError::StateCapExceeded { .. })) => return Ok(sol),
            Err(e) => return Err(e),
        }
    }
}

/// Level-up, within-level and level-down blocks of the repeating portion
/// (levels above `j0`).
#[derive(Debug, Clone, PartialEq)]
pub struct QbdBlocks {
    pub a0: DenseMatrix,
    pub a1: DenseMatrix,
    pub a2: DenseMatrix,
}

pub fn extract_blocks(spec: &ChainSpec) -> QbdBlocks {
    let n = spec.num_phases();
    let mut a0 = DenseMatrix::zeros(n, n);
    let mut a1 = DenseMatrix::zeros(n, n);
    let mut a2 = DenseMatrix::zeros(n, n);
    for m in 0..n {
        let p = spec.phase(m);
        a0[(m, m)] = p.lambda;
        a2[(m, m)] = p.mu;
        a1[(m, m)] = -(p.lambda + p.mu + spec.total_jump_rate(m));
        for i in m + 1..n {
            a0[(m, i)] = spec.jump_rate(m, i, 1);
            a1[(m, i)] = spec.jump_rate(m, i, 0);
            a2[(m, i)] = spec.jump_rate(m, i, -1);
        }
    }
    QbdBlocks { a0, a1, a2 }
}

pub const DEFAULT_R_TOL: f64 = 1e-13;
pub const DEFAULT_R_MAX_ITER: usize = 100_000;

/// Minimal nonnegative solution of `A0 + R A1 + R² A2 = 0` by the iteration
/// `R ← −(A0 + R² A2) A1⁻¹` started at `R = 0`.
pub fn iterate_rate_matrix(blocks: &QbdBlocks, tol: f64, max_iter: usize) -> Result<DenseMatrix, OracleError> {
    let n = blocks.a0.rows();
    let a1_inv = LuDecomposition::factor(&blocks.a1)?.inverse()?;
    let neg_a1_inv = {
        let mut m = a1_inv;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = -m[(i, j)];
            }
        }
        m
    };
    let a0_term = blocks.a0.mul(&neg_a1_inv)?;
    let a2_term = blocks.a2.mul(&neg_a1_inv)?;
    let mut r = DenseMatrix::zeros(n, n);
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let r2 = r.mul(&r)?;
        let mut next = r2.mul(&a2_term)?;
        for i in 0..n {
            for j in 0..n {
                next[(i, j)] += a0_term[(i, j)];
            }
        }
        change = 0.0;
        for i in 0..n {
            for j in 0..n {
                change = f64::max(change, (next[(i, j)] - r[(i, j)]).abs());
            }
        }
        r = next;
        if change < tol {
            return Ok(r);
        }
    }
    Err(OracleError::NonConvergence {
        iterations: max_iter,
        change,
    })
}

/// Truncated-chain computations for one M/M/1 queue with clearing.
///
/// Every function here builds the chain on levels `0..=n_top` (upward moves
/// out of `n_top` dropped) and solves a banded linear system.
pub mod clearing {
    use super::*;
    use crate::clearing::ClearingParams;

    /// Stationary distribution on `0..=n_top`.
    pub fn stationary(p: &ClearingParams, n_top: usize) -> Result<Vec<f64>, OracleError> {
        let n = n_top + 1;
        // Balance at j ≥ 1 only involves j−1, j, j+1; state 0 is pinned.
        let mut a = BandMatrix::zeros(n, 1, 1);
        a.add(0, 0, 1.0);
        for j in 1..n {
            let up = if j < n_top { p.lambda } else { 0.0 };
            a.add(j, j, -(up + p.mu + p.alpha));
            a.add(j, j - 1, p.lambda);
            if j < n_top {
                a.add(j, j + 1, p.mu);
            }
        }
        let mut rhs = vec![0.0; n];
        rhs[0] = 1.0;
        let mut pi = a.solve(&rhs)?;
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= s);
        Ok(pi)
    }

    /// `P(reach j before 0 | start at ell)`; clearing counts as reaching 0.
    pub fn reach_probability(p: &ClearingParams, ell: usize, j: usize, n_top: usize) -> Result<f64, OracleError> {
        // Unknowns h_1..h_{n_top}; h_0 = 0, h_j = 1.
        let n = n_top;
        let mut a = BandMatrix::zeros(n, 1, 1);
        let mut rhs = vec![0.0; n];
        for lv in 1..=n_top {
            let row = lv - 1;
            if lv == j {
                a.add(row, row, 1.0);
                rhs[row] = 1.0;
                continue;
            }
            let up = if lv < n_top { p.lambda } else { 0.0 };
            a.add(row, row, up + p.mu + p.alpha);
            if lv < n_top {
                a.add(row, row + 1, -up);
            }
            if lv > 1 {
                a.add(row, row - 1, -p.mu);
            }
        }
        Ok(a.solve(&rhs)?[ell - 1])
    }

    /// Expected time spent at level `j` before the chain first drops to level
    /// `j0` or is cleared, starting from `ell`. Levels are `j0+1..=n_top`.
    pub fn occupancy_time(
        p: &ClearingParams,
        j0: usize,
        ell: usize,
        j: usize,
        n_top: usize,
    ) -> Result<f64, OracleError> {
        // v_l = E_l[T_j] solves (-Q_T) v = e_j.
        let n = n_top - j0;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for lv in j0 + 1..=n_top {
            let row = lv - j0 - 1;
            let up = if lv < n_top { p.lambda } else { 0.0 };
            a.add(row, row, up + p.mu + p.alpha);
            if lv < n_top {
                a.add(row, row + 1, -up);
            }
            if lv > j0 + 1 {
                a.add(row, row - 1, -p.mu);
            }
        }
        let mut rhs = vec![0.0; n];
        rhs[j - j0 - 1] = 1.0;
        Ok(a.solve(&rhs)?[ell - j0 - 1])
    }

    /// Mean time from level 1 until level 0 is reached or a clearing occurs.
    pub fn expected_busy_period(p: &ClearingParams, n_top: usize) -> Result<f64, OracleError> {
        let n = n_top;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for lv in 1..=n_top {
            let row = lv - 1;
            let up = if lv < n_top { p.lambda } else { 0.0 };
            a.add(row, row, up + p.mu + p.alpha);
            if lv < n_top {
                a.add(row, row + 1, -up);
            }
            if lv > 1 {
                a.add(row, row - 1, -p.mu);
            }
        }
        Ok(a.solve(&vec![1.0; n])?[0])
    }

    /// `P(busy period ≤ Exp(w))`: the probability of emptying from level 1
    /// before an independent rate-`w` clock rings.
    pub fn busy_period_transform(lambda: f64, mu: f64, w: f64, n_top: usize) -> Result<f64, OracleError> {
        let n = n_top;
        let mut a = BandMatrix::zeros(n, 1, 1);
        let mut rhs = vec![0.0; n];
        for lv in 1..=n_top {
            let row = lv - 1;
            let up = if lv < n_top { lambda } else { 0.0 };
            a.add(row, row, up + mu + w);
            if lv < n_top {
                a.add(row, row + 1, -up);
            }
            if lv > 1 {
                a.add(row, row - 1, -mu);
            } else {
                rhs[row] = mu;
            }
        }
        Ok(a.solve(&rhs)?[0])
    }
}
