//! Negative-binomial series and the weighted occupancy sums used by the
//! repeated-base solution paths.
//!
//! All closed forms here have brute-force counterparts in [`brute`], which
//! sum the defining series directly. The solver never calls `brute`; it is
//! shipped so tests and downstream users can audit the closed forms.

use thiserror::Error;

use crate::clearing::{ClearingError, ClearingParams};
use crate::math::{level_binomial, powi, DoubleDouble};

pub use crate::math::binomial;

/// Default relative tolerance for "these two bases are the same".
pub const DEFAULT_BASE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SeriesError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
}

/// Sums for the level shifts `−1`, `0`, `+1`, in that order.
pub type ShiftTriple = [f64; 3];

/// `Σ_{ℓ≥j0} C(ℓ−j0+n, n) β^{ℓ−j0+1} = β / (1−β)^{n+1}`.
pub fn negbin_tail_sum(beta: f64, n: u64) -> Result<f64, SeriesError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SeriesError::Domain("β must lie in (0, 1)"));
    }
    Ok(beta / powi(1.0 - beta, n + 1))
}

/// `Σ_{ℓ=j0}^{j−1} C(ℓ−j0+n, n) β^{ℓ−j0+1}` in closed form.
pub fn negbin_truncated_sum(beta: f64, n: u64, j: u64, j0: u64) -> Result<f64, SeriesError> {
    if !(beta > 0.0 && beta.is_finite()) || beta == 1.0 {
        return Err(SeriesError::Domain("β must be positive and different from 1"));
    }
    if j <= j0 {
        return Err(SeriesError::Domain("need j > j0"));
    }
    let a = j - j0;
    // The right-hand side equals (β − β^{a+1} Σ_{k=0}^{n} C(a+k−1, k) q^k) / q^{n+1}.
    // The two numerator terms cancel to many digits when β is close to 1, so
    // the numerator is evaluated in double-double arithmetic.
    let b = DoubleDouble::new(beta);
    let q = DoubleDouble::new(1.0).sub(b);
    let mut poly = DoubleDouble::new(0.0);
    let mut q_pow = DoubleDouble::new(1.0);
    for k in 0..=n {
        let c = if k == 0 { 1.0 } else { binomial(a + k - 1, k) };
        poly = poly.add(q_pow.mul(DoubleDouble::new(c)));
        q_pow = q_pow.mul(q);
    }
    let numerator = b.sub(b.powi(a + 1).mul(poly));
    Ok(numerator.to_f64() / powi(q.to_f64(), n + 1))
}

/// `Σ_{ℓ≥j} C(ℓ−j0+n, n) β^{ℓ−j}` in closed form.
pub fn negbin_upper_sum(beta: f64, n: u64, j: u64, j0: u64) -> Result<f64, SeriesError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SeriesError::Domain("β must lie in (0, 1)"));
    }
    if j < j0 {
        return Err(SeriesError::Domain("need j ≥ j0"));
    }
    let a = j - j0;
    let q = 1.0 - beta;
    let corr: f64 = (1..=n)
        .map(|k| {
            if a == 0 {
                0.0
            } else {
                binomial(a + k - 1, k) / powi(q, n + 1 - k)
            }
        })
        .sum();
    Ok(1.0 / powi(q, n + 1) + corr)
}

fn same_base(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Closed forms of
/// `Σ_{ℓ} C(ℓ−(j0+1)+u, u) r0^{ℓ−j0} E_(ℓ+Δ)[T_j]` for `Δ ∈ {−1, 0, +1}`,
/// where the phase's own base equals `r0`. `ℓ` runs over levels for which
/// `ℓ+Δ ≥ j0+1`.
pub fn weighted_occupancy_sums_equal(
    phase: &ClearingParams,
    r0: f64,
    u: u64,
    j: u64,
    j0: u64,
) -> Result<ShiftTriple, SeriesError> {
    if !(phase.lambda > 0.0 && phase.mu > 0.0) {
        return Err(SeriesError::Domain("need λ, μ > 0"));
    }
    if j < j0 + 1 {
        return Err(SeriesError::Domain("need j ≥ j0 + 1"));
    }
    let d = phase.derive()?;
    if !same_base(d.r, r0, DEFAULT_BASE_TOL) {
        return Err(SeriesError::Domain("phase base differs from r0"));
    }
    let omega = d.omega.expect("λ > 0");
    let phi = d.phi_at_alpha;
    let a = j - j0;
    let x = r0 * phi;
    let g = |k: u64| level_binomial(a, k) * powi(r0, a);
    let w = |k: u64| 1.0 / powi(1.0 - x, u + 1 - k);

    let minus: f64 = (1..=u + 1).map(|k| omega * r0 * w(k) * g(k)).sum();
    let zero = omega * g(u + 1) + (1..=u).map(|k| omega * r0 * phi * w(k) * g(k)).sum::<f64>();
    let plus = omega / r0 * g(u + 1) - g(u) / phase.lambda
        + (1..=u).map(|k| omega * r0 * phi * phi * w(k) * g(k)).sum::<f64>();
    Ok([minus, zero, plus])
}

/// Closed forms of the same three sums for the final phase `M` (so `α_M = 0`)
/// when its base `rM` differs from the common base `r0` of the other phases.
pub fn weighted_occupancy_sums_split(
    phase_m: &ClearingParams,
    r0: f64,
    r_m: f64,
    u: u64,
    j: u64,
    j0: u64,
) -> Result<ShiftTriple, SeriesError> {
    if !(phase_m.lambda > 0.0 && phase_m.mu > 0.0) {
        return Err(SeriesError::Domain("need λ_M, μ_M > 0"));
    }
    if phase_m.alpha != 0.0 {
        return Err(SeriesError::Domain("the final phase has no outgoing jumps"));
    }
    if !(r0 > 0.0 && r0 < 1.0 && r_m > 0.0 && r_m < 1.0) {
        return Err(SeriesError::Domain("bases must lie in (0, 1)"));
    }
    if same_base(r0, r_m, DEFAULT_BASE_TOL) {
        return Err(SeriesError::Domain("r0 and rM coincide"));
    }
    if j < j0 + 1 {
        return Err(SeriesError::Domain("need j ≥ j0 + 1"));
    }
    let d = phase_m.derive()?;
    if !same_base(d.r, r_m, DEFAULT_BASE_TOL) {
        return Err(SeriesError::Domain("rM differs from the phase's base"));
    }
    let omega = d.omega.expect("λ > 0");
    let a = j - j0;
    // Terms grow like (1 − r0/rM)^{−u−1} and cancel, so the common factor
    // Ω r0 is pulled out and the rest is summed in double-double.
    let dd = DoubleDouble::new;
    let one = dd(1.0);
    let (r0d, rmd) = (dd(r0), dd(r_m));
    let inv_q0 = one.div(one.sub(r0d));
    let inv_gap = one.div(rmd.sub(r0d));
    let r0_a = r0d.powi(a);
    let bracket = |e: u64, p: u64| {
        let second = rmd.powi(e).mul(inv_gap.powi(e)).div(rmd.powi(p));
        inv_q0.powi(e).sub(second)
    };
    let form = |p: u64| {
        let mut acc = bracket(u + 1, p).mul(rmd.powi(a)).neg();
        for k in 0..=u {
            let g = r0_a.mul(dd(level_binomial(a, k)));
            acc = acc.add(bracket(u + 1 - k, p).mul(g));
        }
        omega * r0 * acc.to_f64()
    };
    let g_u = level_binomial(a, u) * powi(r0, a);
    Ok([form(0), form(1), form(2) - g_u / phase_m.lambda])
}

/// Direct partial sums of the series above.
pub mod brute {
    use super::*;
    use crate::clearing::occupancy_time;

    /// Terms are added until one falls below this fraction of the running sum
    /// (after the terms have started to decrease).
    pub const REL_CUTOFF: f64 = 1e-18;

    const MAX_TERMS: u64 = 10_000_000;

    /// Sums `term(i)` for `i = 0, 1, ...` until the series has converged.
    pub fn sum_until_converged(mut term: impl FnMut(u64) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut prev = f64::INFINITY;
        let mut small_run = 0;
        for i in 0..MAX_TERMS {
            let t = term(i);
            acc += t;
            let mag = t.abs();
            if acc == 0.0 {
                if i >= 10_000 {
                    break;
                }
            } else if mag <= prev && mag <= REL_CUTOFF * acc.abs() {
                small_run += 1;
                if small_run >= 3 {
                    break;
                }
            } else {
                small_run = 0;
            }
            prev = mag;
        }
        acc
    }

    pub fn negbin_tail_sum(beta: f64, n: u64) -> f64 {
        sum_until_converged(|i| binomial(i + n, n) * powi(beta, i + 1))
    }

    pub fn negbin_truncated_sum(beta: f64, n: u64, j: u64, j0: u64) -> f64 {
        (0..j - j0).map(|i| binomial(i + n, n) * powi(beta, i + 1)).sum()
    }

    pub fn negbin_upper_sum(beta: f64, n: u64, j: u64, j0: u64) -> f64 {
        let a = j - j0;
        sum_until_converged(|i| binomial(a + i + n, n) * powi(beta, i))
    }

    fn weighted(phase: &ClearingParams, base: f64, u: u64, j: u64, j0: u64, shift: i64) -> Result<f64, SeriesError> {
        // ℓ = j0 + b with b ≥ 1, and ℓ + shift ≥ j0 + 1.
        let b_min = if shift < 0 { 2 } else { 1 };
        let mut err = None;
        let s = sum_until_converged(|i| {
            let b = b_min + i;
            let start = (j0 + b) as i64 + shift;
            match occupancy_time(phase, j0, start as u64, j) {
                Ok(t) => level_binomial(b, u) * powi(base, b) * t,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        });
        match err {
            Some(e) => Err(e.into()),
            None => Ok(s),
        }
    }

    pub fn weighted_occupancy_sums(
        phase: &ClearingParams,
        base: f64,
        u: u64,
        j: u64,
        j0: u64,
    ) -> Result<ShiftTriple, SeriesError> {
        Ok([
            weighted(phase, base, u, j, j0, -1)?,
            weighted(phase, base, u, j, j0, 0)?,
            weighted(phase, base, u, j, j0, 1)?,
        ])
    }
}
