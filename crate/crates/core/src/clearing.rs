//! The M/M/1 queue with clearing.
//!
//! A birth-death chain on `0, 1, 2, ...` with arrival rate `λ`, service rate
//! `μ`, and a rate-`α` jump from every nonzero state to `0`. Inside a class-𝕄
//! chain each phase behaves like one of these queues (the clearing event is
//! the jump to a higher phase), which is where the base terms come from.

use thiserror::Error;

use crate::math::{is_finite_nonneg, powi, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ClearingError {
    #[error("rate `{name}` must be finite and nonnegative, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("busy-period transform undefined for λ = μ = s = 0")]
    UndefinedTransform,
    #[error("domain error: {0}")]
    Domain(&'static str),
}

/// Busy-period Laplace transform `φ(s)` of an M/M/1 queue with rates `(λ, μ)`.
///
/// Uses `φ(s) = 2μ / (s + λ + μ + √D)` with `D` factored as
/// `(s + (√λ − √μ)²)(s + (√λ + √μ)²)`. This is the rationalized form of the
/// usual root, so it needs no `λ = 0` special case (it returns `μ/(s+μ)`) and
/// keeps full precision near `s = 0, λ = μ`.
pub fn busy_period_transform(lambda: f64, mu: f64, s: f64) -> Result<f64, ClearingError> {
    check_rate("lambda", lambda)?;
    check_rate("mu", mu)?;
    check_rate("s", s)?;
    if lambda == 0.0 && mu == 0.0 && s == 0.0 {
        return Err(ClearingError::UndefinedTransform);
    }
    Ok(phi_unchecked(lambda, mu, s))
}

pub(crate) fn phi_unchecked(lambda: f64, mu: f64, s: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let (sl, sm) = (sqrt(lambda), sqrt(mu));
    let d = (s + (sl - sm) * (sl - sm)) * (s + (sl + sm) * (sl + sm));
    2.0 * mu / (s + lambda + mu + sqrt(d))
}

fn check_rate(name: &'static str, value: f64) -> Result<(), ClearingError> {
    if is_finite_nonneg(value) {
        Ok(())
    } else {
        Err(ClearingError::InvalidRate { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingParams {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
}

/// Quantities derived from a [`ClearingParams`] triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingDerived {
    /// `λ/μ`, absent when `μ = 0`.
    pub rho: Option<f64>,
    pub phi_at_alpha: f64,
    /// Base term: `ρ φ(α)` when `μ > 0`, else `λ/(λ+α)`.
    pub r: f64,
    /// `r / (λ (1 − r φ(α)))`, absent when `λ = 0`.
    pub omega: Option<f64>,
}

impl ClearingParams {
    pub fn new(lambda: f64, mu: f64, alpha: f64) -> Result<Self, ClearingError> {
        check_rate("lambda", lambda)?;
        check_rate("mu", mu)?;
        check_rate("alpha", alpha)?;
        Ok(Self { lambda, mu, alpha })
    }

    /// True when the standalone clearing chain is ergodic.
    pub fn is_ergodic(&self) -> bool {
        self.alpha > 0.0 || self.lambda < self.mu
    }

    pub fn derive(&self) -> Result<ClearingDerived, ClearingError> {
        let Self { lambda, mu, alpha } = *self;
        if lambda == 0.0 && mu == 0.0 && alpha == 0.0 {
            return Err(ClearingError::Domain("all rates are zero"));
        }
        let phi = phi_unchecked(lambda, mu, alpha);
        let rho = (mu > 0.0).then(|| lambda / mu);
        // Both branches of the base-term definition reduce to this expression.
        let r = if lambda == 0.0 {
            0.0
        } else {
            let (sl, sm) = (sqrt(lambda), sqrt(mu));
            let d = (alpha + (sl - sm) * (sl - sm)) * (alpha + (sl + sm) * (sl + sm));
            2.0 * lambda / (alpha + lambda + mu + sqrt(d))
        };
        let omega = (lambda > 0.0).then(|| r / (lambda * (1.0 - r * phi)));
        Ok(ClearingDerived {
            rho,
            phi_at_alpha: phi,
            r,
            omega,
        })
    }

    /// `φ(s)` for this triple's `(λ, μ)`.
    pub fn phi(&self, s: f64) -> Result<f64, ClearingError> {
        busy_period_transform(self.lambda, self.mu, s)
    }
}

/// Limiting probability of state `j`: `(1 − ρφ(α)) (ρφ(α))^j`.
pub fn clearing_limiting_distribution(p: &ClearingParams, j: u64) -> Result<f64, ClearingError> {
    if !(p.lambda > 0.0 && p.mu > 0.0) {
        return Err(ClearingError::Domain("limiting distribution needs λ, μ > 0"));
    }
    if !p.is_ergodic() {
        return Err(ClearingError::Domain("clearing chain is not ergodic"));
    }
    let r = p.derive()?.r;
    Ok((1.0 - r) * powi(r, j))
}

/// Probability of reaching level `j` before level `0`, starting from `ell`.
pub fn reach_probability(p: &ClearingParams, ell: u64, j: u64) -> Result<f64, ClearingError> {
    if !(p.lambda > 0.0 && p.mu > 0.0) {
        return Err(ClearingError::Domain("reach probability needs λ, μ > 0"));
    }
    if ell < 1 || j < 1 {
        return Err(ClearingError::Domain("levels must be at least 1"));
    }
    if ell == j {
        return Ok(1.0);
    }
    let d = p.derive()?;
    let (r, phi) = (d.r, d.phi_at_alpha);
    if ell > j {
        return Ok(powi(phi, ell - j));
    }
    let x = r * phi;
    if x == 1.0 {
        // λ = μ, α = 0: gambler's ruin with a fair coin.
        return Ok(ell as f64 / j as f64);
    }
    Ok(powi(r, j - ell) * (1.0 - powi(x, ell)) / (1.0 - powi(x, j)))
}

/// Mean time from the first arrival until the queue empties or is cleared.
pub fn expected_clearing_busy_period(p: &ClearingParams) -> Result<f64, ClearingError> {
    if p.alpha > 0.0 {
        let phi = phi_unchecked(p.lambda, p.mu, p.alpha);
        Ok((1.0 - phi) / p.alpha)
    } else if p.lambda < p.mu {
        Ok(1.0 / (p.mu - p.lambda))
    } else {
        Err(ClearingError::Domain("busy period is infinite for α = 0, λ ≥ μ"))
    }
}

/// Expected time spent in level `j` before leaving levels `> j0`, starting
/// from level `ell`, for one phase of a class-𝕄 chain with rates `p`.
pub fn occupancy_time(p: &ClearingParams, j0: u64, ell: u64, j: u64) -> Result<f64, ClearingError> {
    if ell < j0 + 1 || j < j0 + 1 {
        return Err(ClearingError::Domain("levels must be at least j0 + 1"));
    }
    let ClearingParams { lambda, mu, alpha } = *p;
    match (lambda > 0.0, mu > 0.0) {
        (true, true) => {
            let d = p.derive()?;
            let (r, phi) = (d.r, d.phi_at_alpha);
            let omega = d.omega.expect("λ > 0");
            let (a, b) = (j - j0, ell - j0);
            let x = r * phi;
            Ok(if b <= a {
                omega * powi(r, a - b) * (1.0 - powi(x, b))
            } else {
                omega * powi(phi, b - a) * (1.0 - powi(x, a))
            })
        }
        (true, false) => {
            if ell > j {
                return Ok(0.0);
            }
            let r = lambda / (lambda + alpha);
            Ok(powi(r, j - ell + 1) / lambda)
        }
        (false, true) => {
            if ell < j {
                return Ok(0.0);
            }
            let n = ell - j;
            Ok(powi(mu, n) / powi(mu + alpha, n + 1))
        }
        (false, false) => {
            if alpha == 0.0 {
                return Err(ClearingError::Domain("all rates are zero"));
            }
            Ok(if ell == j { 1.0 / alpha } else { 0.0 })
        }
    }
}
