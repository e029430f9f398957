//! Exact stationary distribution by clearing analysis on phases.
//!
//! Each phase `m` contributes one base `r_m`. The stationary probabilities of
//! phase `m` above level `j0` are a finite sum of terms
//! `c · C(a−1+d, d) · base^a`, `a = j − j0`, whose coefficients are linear in a
//! small set of unknowns: the boundary probabilities and the level-`j0`
//! probabilities. The coefficients are propagated phase by phase as
//! [`AffineExpr`]s, then the unknowns come from the balance equations at those
//! states plus normalization.
//!
//! Three base patterns are handled: all nonzero bases distinct, all bases
//! equal, and all bases equal except the last.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::affine::AffineExpr;
use crate::chain::{validate_spec, ChainSpec, StateId};
use crate::clearing::ClearingParams;
use crate::linalg::{lu_solve_detailed, DenseMatrix, LinalgError};
use crate::math::{level_binomial, powi, powi_signed};
use crate::series::DEFAULT_BASE_TOL;

/// Tolerance on the balance equation that is left out of the solve.
pub const DROPPED_ROW_TOL: f64 = 1e-9;
/// Tolerance on the total probability mass.
pub const MASS_TOL: f64 = 1e-10;
/// Values above `-NEGATIVE_HARD` are rounding noise and clamped to zero.
pub const NEGATIVE_HARD: f64 = 1e-9;
/// Clamped values below `-NEGATIVE_WARN` produce a warning.
pub const NEGATIVE_WARN: f64 = 1e-12;
/// Number of levels above `j0` scanned for negative probabilities.
pub const NEGATIVE_SCAN_LEVELS: u64 = 200;

/// Leading phrase of every unsupported-pattern message.
pub const UNSUPPORTED_PATTERN: &str = "Unsupported multiplicity pattern";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid chain: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error("{UNSUPPORTED_PATTERN}: {0}")]
    Unsupported(String),
    #[error("unsupported chain structure: {0}")]
    UnsupportedStructure(String),
    #[error("boundary system is singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("{check} residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge {
        check: &'static str,
        residual: f64,
        tolerance: f64,
    },
    #[error("probability {value:e} at {state} is negative")]
    NegativeProbability { state: StateId, value: f64 },
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative tolerance under which two bases count as equal.
    pub tol_base: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_base: DEFAULT_BASE_TOL,
        }
    }
}

/// Per-phase clearing quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseTerms {
    pub params: Vec<ClearingParams>,
    pub r: Vec<f64>,
    pub phi_at_alpha: Vec<f64>,
    pub omega: Vec<Option<f64>>,
}

impl BaseTerms {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseTag {
    DistinctNonzero,
    AllEqual,
    AllButLastEqual,
    Unsupported(String),
}

impl CaseTag {
    pub fn name(&self) -> &'static str {
        match self {
            CaseTag::DistinctNonzero => "DistinctNonzero",
            CaseTag::AllEqual => "AllEqual",
            CaseTag::AllButLastEqual => "AllButLastEqual",
            CaseTag::Unsupported(_) => "Unsupported",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseTag::Unsupported(d) => write!(f, "{UNSUPPORTED_PATTERN}: {d}"),
            other => f.write_str(other.name()),
        }
    }
}

/// One term `coeff · C(a−1+degree, degree) · base^a` of a phase's closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionTerm {
    pub coeff: f64,
    pub base: f64,
    pub degree: u32,
}

impl SolutionTerm {
    /// Contribution at level offset `a = j − j0 ≥ 1`.
    pub fn at(&self, a: u64) -> f64 {
        self.coeff * level_binomial(a, self.degree as u64) * powi(self.base, a)
    }

    /// Sum of the contributions over all `a ≥ 1`.
    pub fn tail_mass(&self) -> f64 {
        if self.base == 0.0 {
            return 0.0;
        }
        self.coeff * self.base / powi(1.0 - self.base, self.degree as u64 + 1)
    }
}

/// A [`SolutionTerm`] whose coefficient is still symbolic in the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicTerm {
    pub coeff: AffineExpr,
    pub base: f64,
    pub degree: u32,
}

/// Indexing of the unknown vector: boundary states first, then `π_(m,j0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownLayout {
    pub boundary: usize,
    pub phases: usize,
}

impl UnknownLayout {
    pub fn of(spec: &ChainSpec) -> Self {
        Self {
            boundary: spec.num_boundary_states(),
            phases: spec.num_phases(),
        }
    }

    pub fn len(&self) -> usize {
        self.boundary + self.phases
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn boundary(&self, x: usize) -> usize {
        x
    }

    pub fn level_j0(&self, m: usize) -> usize {
        self.boundary + m
    }
}

pub fn compute_base_terms(spec: &ChainSpec) -> Result<BaseTerms, SolveError> {
    let n = spec.num_phases();
    let mut bt = BaseTerms {
        params: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        phi_at_alpha: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
    };
    for m in 0..n {
        let p = spec.phase(m);
        let params = ClearingParams::new(p.lambda, p.mu, spec.total_jump_rate(m))
            .map_err(|e| SolveError::InvalidSpec(vec![format!("phase {m}: {e}")]))?;
        let d = params
            .derive()
            .map_err(|e| SolveError::InvalidSpec(vec![format!("phase {m}: {e}")]))?;
        bt.params.push(params);
        bt.r.push(d.r);
        bt.phi_at_alpha.push(d.phi_at_alpha);
        bt.omega.push(d.omega);
    }
    Ok(bt)
}

fn same(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn classify_case(bases: &BaseTerms, tol_base: f64) -> CaseTag {
    let r = &bases.r;
    let n = r.len();
    if n <= 1 {
        return CaseTag::DistinctNonzero;
    }
    let mut clash = None;
    'outer: for i in 0..n {
        for k in i + 1..n {
            if r[i] > 0.0 && r[k] > 0.0 && same(r[i], r[k], tol_base) {
                clash = Some((i, k));
                break 'outer;
            }
        }
    }
    let Some((ci, ck)) = clash else {
        return CaseTag::DistinctNonzero;
    };
    let all_positive = bases.params.iter().all(|p| p.lambda > 0.0 && p.mu > 0.0);
    let r0 = r[0];
    let head_equal = r[..n - 1].iter().all(|&x| same(x, r0, tol_base));
    if all_positive && head_equal {
        return if same(r[n - 1], r0, tol_base) {
            CaseTag::AllEqual
        } else {
            CaseTag::AllButLastEqual
        };
    }
    let why = if !all_positive {
        "repeated bases need lambda > 0 and mu > 0 in every phase"
    } else {
        "only all-distinct, all-equal and all-but-last-equal patterns are solvable"
    };
    CaseTag::Unsupported(format!(
        "phases {ci} and {ck} share base {:.12} within tolerance {tol_base:e} ({why}); bases = {:?}",
        r[ci], r
    ))
}

/// Closed-form coefficients for every phase, symbolic in the unknowns.
pub type SymbolicSolution = Vec<Vec<SymbolicTerm>>;

pub fn propagate_coefficients(
    spec: &ChainSpec,
    bases: &BaseTerms,
    case: &CaseTag,
    tol_base: f64,
) -> Result<SymbolicSolution, SolveError> {
    match case {
        CaseTag::DistinctNonzero => propagate_distinct(spec, bases, tol_base),
        CaseTag::AllEqual => {
            let c = propagate_equal(spec, bases, spec.max_phase())?;
            let r0 = bases.r[0];
            Ok(c.into_iter()
                .map(|row| {
                    row.into_iter()
                        .enumerate()
                        .map(|(k, coeff)| SymbolicTerm {
                            coeff,
                            base: r0,
                            degree: k as u32,
                        })
                        .collect()
                })
                .collect())
        }
        CaseTag::AllButLastEqual => propagate_split(spec, bases),
        CaseTag::Unsupported(d) => Err(SolveError::Unsupported(d.clone())),
    }
}

fn inflow_weight(spec: &ChainSpec, i: usize, m: usize, mut f: impl FnMut(i64) -> f64) -> f64 {
    (-1..=1_i64)
        .map(|d| {
            let a = spec.jump_rate(i, m, d);
            if a == 0.0 {
                0.0
            } else {
                a * f(d)
            }
        })
        .sum()
}

fn propagate_distinct(spec: &ChainSpec, b: &BaseTerms, tol_base: f64) -> Result<SymbolicSolution, SolveError> {
    let layout = UnknownLayout::of(spec);
    let nu = layout.len();
    let n = spec.num_phases();
    let r = &b.r;
    let mut c: Vec<Vec<AffineExpr>> = Vec::with_capacity(n);
    // Level-j0 mass of phase i not described by its positive-base terms. It
    // reaches level j0+1 of a higher phase only through up-jumps, and enters
    // that phase's own-base coefficient.
    let mut level_j0_gap: Vec<Option<AffineExpr>> = Vec::with_capacity(n);
    for m in 0..n {
        let lambda_m = b.params[m].lambda;
        let mu_m = b.params[m].mu;
        let alpha_m = b.params[m].alpha;
        let mut row = Vec::with_capacity(m + 1);
        for k in 0..m {
            if r[k] == 0.0 {
                row.push(AffineExpr::zero(nu));
                continue;
            }
            let mut g = AffineExpr::zero(nu);
            for i in k..m {
                let w = inflow_weight(spec, i, m, |d| powi_signed(r[k], -d));
                g.add_scaled(&c[i][k], w);
            }
            let coeff = if r[m] > 0.0 {
                if same(r[k], r[m], tol_base) {
                    return Err(SolveError::Internal(format!(
                        "bases of phases {k} and {m} coincide on the distinct-base path"
                    )));
                }
                r[k] * r[m] / (lambda_m * (r[k] - r[m]) * (1.0 - b.phi_at_alpha[m] * r[k]))
            } else {
                1.0 / (mu_m * (1.0 - r[k]) + alpha_m)
            };
            row.push(g.scaled(coeff));
        }
        let mut own = AffineExpr::unknown(nu, layout.level_j0(m));
        for e in &row {
            own -= e;
        }
        for i in 0..m {
            let up = spec.jump_rate(i, m, 1);
            if up == 0.0 {
                continue;
            }
            if let Some(gap) = &level_j0_gap[i] {
                if r[m] == 0.0 {
                    return Err(SolveError::UnsupportedStructure(format!(
                        "phase {i} feeds level j0+1 of phase {m} through an up-jump, \
                         and both phases have lambda = 0"
                    )));
                }
                own.add_scaled(gap, up / lambda_m);
            }
        }
        let gap = if r[m] == 0.0 {
            Some(own.clone())
        } else {
            let corrected = (0..m).any(|i| spec.jump_rate(i, m, 1) > 0.0 && level_j0_gap[i].is_some());
            corrected.then(|| {
                // π_(m,j0) minus the sum of all coefficients.
                let mut e = AffineExpr::unknown(nu, layout.level_j0(m));
                for t in row.iter().chain(core::iter::once(&own)) {
                    e -= t;
                }
                e
            })
        };
        level_j0_gap.push(gap);
        row.push(own);
        c.push(row);
    }
    Ok(c.into_iter()
        .map(|row| {
            row.into_iter()
                .enumerate()
                .map(|(k, coeff)| SymbolicTerm {
                    coeff,
                    base: r[k],
                    degree: 0,
                })
                .collect()
        })
        .collect())
}

/// Coefficients `c[m][k]` (base `r0`, degree `k`) for phases `0..=last`, all
/// sharing the base `r0`.
fn propagate_equal(spec: &ChainSpec, b: &BaseTerms, last: usize) -> Result<Vec<Vec<AffineExpr>>, SolveError> {
    let layout = UnknownLayout::of(spec);
    let nu = layout.len();
    let r0 = b.r[0];
    let mut c: Vec<Vec<AffineExpr>> = Vec::with_capacity(last + 1);
    for m in 0..=last {
        let lambda = b.params[m].lambda;
        let phi = b.phi_at_alpha[m];
        let omega = b.omega[m].ok_or_else(|| SolveError::Internal(format!("phase {m} has no Ω")))?;
        let x = r0 * phi;
        let mut row = vec![AffineExpr::unknown(nu, layout.level_j0(m))];
        // Jumps with level shift Δ enter with weight r0^{−Δ} here and φ^{Δ+1}
        // below. With either sign flipped the balance equations no longer
        // hold (tests/jump_directions.rs).
        for k in 1..=m {
            let mut e = AffineExpr::zero(nu);
            for i in k - 1..m {
                let w = inflow_weight(spec, i, m, |d| powi_signed(r0, -d));
                e.add_scaled(&c[i][k - 1], omega * w);
            }
            for u in k..m {
                let damp = 1.0 / powi(1.0 - x, (u + 1 - k) as u64);
                for i in u..m {
                    let w = inflow_weight(spec, i, m, |d| powi(phi, (d + 1) as u64));
                    e.add_scaled(&c[i][u], omega * r0 * damp * w);
                }
            }
            for i in k..m {
                e.add_scaled(&c[i][k], -spec.jump_rate(i, m, 1) / lambda);
            }
            row.push(e);
        }
        c.push(row);
    }
    Ok(c)
}

fn propagate_split(spec: &ChainSpec, b: &BaseTerms) -> Result<SymbolicSolution, SolveError> {
    let layout = UnknownLayout::of(spec);
    let nu = layout.len();
    let big_m = spec.max_phase();
    let r0 = b.r[0];
    let r_m = b.r[big_m];
    let c = propagate_equal(spec, b, big_m - 1)?;
    let lambda = b.params[big_m].lambda;
    let omega = b.omega[big_m].ok_or_else(|| SolveError::Internal("final phase has no Ω".into()))?;
    let bracket = |u: usize, k: usize, d: i64| {
        let e = (u + 1 - k) as u64;
        1.0 / powi(1.0 - r0, e) - 1.0 / (powi(r_m, (d + 1) as u64) * powi(1.0 - r0 / r_m, e))
    };
    let mut last: Vec<SymbolicTerm> = Vec::with_capacity(big_m + 1);
    for k in 0..big_m {
        let mut e = AffineExpr::zero(nu);
        for u in k..big_m {
            for i in u..big_m {
                let w = inflow_weight(spec, i, big_m, |d| bracket(u, k, d));
                e.add_scaled(&c[i][u], omega * r0 * w);
            }
        }
        for i in k..big_m {
            e.add_scaled(&c[i][k], -spec.jump_rate(i, big_m, 1) / lambda);
        }
        last.push(SymbolicTerm {
            coeff: e,
            base: r0,
            degree: k as u32,
        });
    }
    let own = AffineExpr::unknown(nu, layout.level_j0(big_m)) - &last[0].coeff;
    last.push(SymbolicTerm {
        coeff: own,
        base: r_m,
        degree: 0,
    });
    let mut out: SymbolicSolution = c
        .into_iter()
        .map(|row| {
            row.into_iter()
                .enumerate()
                .map(|(k, coeff)| SymbolicTerm {
                    coeff,
                    base: r0,
                    degree: k as u32,
                })
                .collect()
        })
        .collect();
    out.push(last);
    Ok(out)
}

/// Probability of `(m, j0 + a)`, `a ≥ 1`, as an affine expression.
fn symbolic_at(terms: &[SymbolicTerm], a: u64, nu: usize) -> AffineExpr {
    let mut e = AffineExpr::zero(nu);
    for t in terms {
        let w = level_binomial(a, t.degree as u64) * powi(t.base, a);
        e.add_scaled(&t.coeff, w);
    }
    e
}

/// Balance and normalization equations over the unknowns, each written as
/// an affine expression that must vanish.
#[derive(Debug, Clone)]
pub struct BoundarySystem {
    pub layout: UnknownLayout,
    /// Balance at `(m, j0)` for each phase, then at each boundary state.
    pub balance: Vec<AffineExpr>,
    pub normalization: AffineExpr,
}

impl BoundarySystem {
    /// Index into `balance` of the equation left out of the square solve.
    pub const DROPPED: usize = 0;

    /// All equations as `(A, b)` with `A x = b`; normalization is the last row.
    pub fn full(&self) -> (DenseMatrix, Vec<f64>) {
        let rows: Vec<&AffineExpr> = self.balance.iter().chain([&self.normalization]).collect();
        let n = self.layout.len();
        let mut a = DenseMatrix::zeros(rows.len(), n);
        let mut rhs = Vec::with_capacity(rows.len());
        for (i, e) in rows.iter().enumerate() {
            for j in 0..n {
                a[(i, j)] = e.coefficients[j];
            }
            rhs.push(-e.constant);
        }
        (a, rhs)
    }

    /// The square system with the `(0, j0)` balance row removed.
    pub fn square(&self) -> (DenseMatrix, Vec<f64>) {
        let (a, mut rhs) = self.full();
        rhs.remove(Self::DROPPED);
        (a.without_row(Self::DROPPED), rhs)
    }
}

pub fn assemble_boundary_system(spec: &ChainSpec, bases: &BaseTerms, terms: &SymbolicSolution) -> BoundarySystem {
    let layout = UnknownLayout::of(spec);
    let nu = layout.len();
    let n = spec.num_phases();
    let bnd = spec.boundary();
    let mut balance = Vec::with_capacity(n + layout.boundary);
    for m in 0..n {
        let out_rate = bases.params[m].lambda
            + spec.jump_rate_at_base_level(m)
            + bnd
                .out_of_repeating
                .iter()
                .filter(|t| t.phase == m)
                .map(|t| t.rate)
                .sum::<f64>();
        let mut e = AffineExpr::unknown(nu, layout.level_j0(m)).scaled(-out_rate);
        e.add_scaled(&symbolic_at(&terms[m], 1, nu), bases.params[m].mu);
        for t in bnd.into_repeating.iter().filter(|t| t.phase == m) {
            e.add_scaled(&AffineExpr::unknown(nu, layout.boundary(t.from)), t.rate);
        }
        for i in 0..m {
            let same_level = spec.jump_rate(i, m, 0);
            if same_level > 0.0 {
                e.add_scaled(&AffineExpr::unknown(nu, layout.level_j0(i)), same_level);
            }
            let down = spec.jump_rate(i, m, -1);
            if down > 0.0 {
                e.add_scaled(&symbolic_at(&terms[i], 1, nu), down);
            }
        }
        balance.push(e);
    }
    for x in 0..layout.boundary {
        let out_rate = bnd
            .into_repeating
            .iter()
            .filter(|t| t.from == x)
            .map(|t| t.rate)
            .chain(bnd.internal.iter().filter(|t| t.from == x).map(|t| t.rate))
            .sum::<f64>();
        let mut e = AffineExpr::unknown(nu, layout.boundary(x)).scaled(-out_rate);
        for t in bnd.out_of_repeating.iter().filter(|t| t.to == x) {
            e.add_scaled(&AffineExpr::unknown(nu, layout.level_j0(t.phase)), t.rate);
        }
        for t in bnd.internal.iter().filter(|t| t.to == x) {
            e.add_scaled(&AffineExpr::unknown(nu, layout.boundary(t.from)), t.rate);
        }
        balance.push(e);
    }
    let mut normalization = AffineExpr::constant(nu, -1.0);
    normalization.coefficients.iter_mut().for_each(|c| *c = 1.0);
    for t in terms.iter().flatten() {
        if t.base > 0.0 {
            let w = t.base / powi(1.0 - t.base, t.degree as u64 + 1);
            normalization.add_scaled(&t.coeff, w);
        }
    }
    BoundarySystem {
        layout,
        balance,
        normalization,
    }
}

/// Numbers describing how the boundary solve went.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveDiagnostics {
    pub condition: f64,
    pub refined: bool,
    pub dropped_row_residual: f64,
    pub unknowns: usize,
}

/// Solved chain: boundary probabilities, level-`j0` probabilities and the
/// closed form above level `j0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    j0: u64,
    boundary_names: Vec<String>,
    boundary_probs: Vec<f64>,
    level_j0_probs: Vec<f64>,
    phase_solutions: Vec<Vec<SolutionTerm>>,
    case: CaseTag,
    bases: BaseTerms,
    warnings: Vec<String>,
    diagnostics: SolveDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("phase {phase} out of range (M = {max})")]
    PhaseOutOfRange { phase: usize, max: usize },
    #[error("level {level} is below j0 = {j0}")]
    LevelBelowBase { level: u64, j0: u64 },
    #[error("boundary state {0} out of range")]
    UnknownState(usize),
}

impl StationaryDistribution {
    pub fn j0(&self) -> u64 {
        self.j0
    }

    pub fn num_phases(&self) -> usize {
        self.level_j0_probs.len()
    }

    pub fn boundary_names(&self) -> &[String] {
        &self.boundary_names
    }

    pub fn boundary_probs(&self) -> &[f64] {
        &self.boundary_probs
    }

    pub fn boundary_prob(&self, name: &str) -> Option<f64> {
        let i = self.boundary_names.iter().position(|s| s == name)?;
        Some(self.boundary_probs[i])
    }

    pub fn level_j0_probs(&self) -> &[f64] {
        &self.level_j0_probs
    }

    pub fn phase_solutions(&self) -> &[Vec<SolutionTerm>] {
        &self.phase_solutions
    }

    pub fn case(&self) -> &CaseTag {
        &self.case
    }

    pub fn bases(&self) -> &BaseTerms {
        &self.bases
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn diagnostics(&self) -> SolveDiagnostics {
        self.diagnostics
    }

    /// `π_(m,j)`. Tiny negative rounding noise is returned as `0`.
    pub fn evaluate(&self, m: usize, j: u64) -> Result<f64, EvalError> {
        if m >= self.num_phases() {
            return Err(EvalError::PhaseOutOfRange {
                phase: m,
                max: self.num_phases() - 1,
            });
        }
        if j < self.j0 {
            return Err(EvalError::LevelBelowBase { level: j, j0: self.j0 });
        }
        Ok(self.raw(m, j).max(0.0))
    }

    fn raw(&self, m: usize, j: u64) -> f64 {
        if j == self.j0 {
            return self.level_j0_probs[m];
        }
        let a = j - self.j0;
        self.phase_solutions[m].iter().map(|t| t.at(a)).sum()
    }

    pub fn probability(&self, state: StateId) -> Result<f64, EvalError> {
        match state {
            StateId::Boundary(x) => self.boundary_probs.get(x).copied().ok_or(EvalError::UnknownState(x)),
            StateId::Repeating { phase, level } => self.evaluate(phase, level),
        }
    }

    /// Probability of phase `m` summed over all levels `≥ j0`, without truncation.
    pub fn phase_mass(&self, m: usize) -> f64 {
        self.level_j0_probs[m] + self.phase_solutions[m].iter().map(SolutionTerm::tail_mass).sum::<f64>()
    }

    pub fn boundary_mass(&self) -> f64 {
        self.boundary_probs.iter().sum()
    }

    /// Boundary mass plus closed-form sums over every phase.
    pub fn total_mass(&self) -> f64 {
        self.boundary_mass() + (0..self.num_phases()).map(|m| self.phase_mass(m)).sum::<f64>()
    }
}

pub fn solve(spec: &ChainSpec) -> Result<StationaryDistribution, SolveError> {
    solve_with(spec, &SolveOptions::default())
}

pub fn solve_with(spec: &ChainSpec, opts: &SolveOptions) -> Result<StationaryDistribution, SolveError> {
    let report = validate_spec(spec);
    if !report.is_ok() {
        return Err(SolveError::InvalidSpec(report.errors));
    }
    let mut warnings = report.warnings;
    let bases = compute_base_terms(spec)?;
    let case = classify_case(&bases, opts.tol_base);
    let terms = propagate_coefficients(spec, &bases, &case, opts.tol_base)?;
    let system = assemble_boundary_system(spec, &bases, &terms);
    let (a, rhs) = system.square();
    let solved = lu_solve_detailed(&a, &rhs).map_err(|e| match e {
        LinalgError::SingularMatrix { .. } => SolveError::SingularSystem {
            condition: f64::INFINITY,
        },
        other => SolveError::Internal(format!("{other}")),
    })?;
    let x = solved.x;
    if solved.condition > 1e10 {
        warnings.push(format!(
            "boundary system is ill-conditioned (condition estimate {:e})",
            solved.condition
        ));
    }
    let dropped = system.balance[BoundarySystem::DROPPED].eval(&x).abs();
    let scale = 1.0_f64.max(x.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    if dropped.is_nan() || dropped > DROPPED_ROW_TOL * scale {
        return Err(SolveError::ResidualTooLarge {
            check: "dropped balance equation",
            residual: dropped,
            tolerance: DROPPED_ROW_TOL,
        });
    }

    let layout = system.layout;
    let mut clamp = |state: StateId, v: f64| -> Result<f64, SolveError> {
        if v >= 0.0 {
            return Ok(v);
        }
        if v < -NEGATIVE_HARD {
            return Err(SolveError::NegativeProbability { state, value: v });
        }
        if v < -NEGATIVE_WARN {
            warnings.push(format!("clamped probability {v:e} at {state} to 0"));
        }
        Ok(0.0)
    };
    let boundary_probs = (0..layout.boundary)
        .map(|i| clamp(StateId::Boundary(i), x[layout.boundary(i)]))
        .collect::<Result<Vec<_>, _>>()?;
    let level_j0_probs = (0..layout.phases)
        .map(|m| {
            clamp(
                StateId::Repeating {
                    phase: m,
                    level: spec.j0(),
                },
                x[layout.level_j0(m)],
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let phase_solutions: Vec<Vec<SolutionTerm>> = terms
        .iter()
        .map(|row| {
            row.iter()
                .map(|t| SolutionTerm {
                    coeff: t.coeff.eval(&x),
                    base: t.base,
                    degree: t.degree,
                })
                .collect()
        })
        .collect();

    let dist = StationaryDistribution {
        j0: spec.j0(),
        boundary_names: spec.boundary().states.clone(),
        boundary_probs,
        level_j0_probs,
        phase_solutions,
        case,
        bases,
        warnings: Vec::new(),
        diagnostics: SolveDiagnostics {
            condition: solved.condition,
            refined: solved.refined,
            dropped_row_residual: dropped,
            unknowns: layout.len(),
        },
    };
    for m in 0..dist.num_phases() {
        for a in 1..=NEGATIVE_SCAN_LEVELS {
            let level = spec.j0() + a;
            let v = dist.raw(m, level);
            clamp(StateId::Repeating { phase: m, level }, v)?;
        }
    }
    let mass_err = (dist.total_mass() - 1.0).abs();
    if mass_err.is_nan() || mass_err > MASS_TOL {
        return Err(SolveError::ResidualTooLarge {
            check: "normalization",
            residual: mass_err,
            tolerance: MASS_TOL,
        });
    }
    Ok(StationaryDistribution { warnings, ..dist })
}

/// Net probability flow into `state` under `dist` (inflow minus outflow).
/// Zero for every state when `dist` is stationary for `spec`.
pub fn balance_residual(spec: &ChainSpec, dist: &StationaryDistribution, state: StateId) -> f64 {
    let j0 = spec.j0();
    let prob = |s: StateId| dist.probability(s).unwrap_or(0.0);
    let out: f64 = spec.transitions(state).iter().map(|&(_, r)| r).sum();
    let mut candidates: Vec<StateId> = (0..spec.num_boundary_states()).map(StateId::Boundary).collect();
    if let StateId::Repeating { level, .. } = state {
        for lv in level.saturating_sub(1).max(j0)..=level + 1 {
            for phase in 0..spec.num_phases() {
                candidates.push(StateId::Repeating { phase, level: lv });
            }
        }
    } else {
        for phase in 0..spec.num_phases() {
            candidates.push(StateId::Repeating { phase, level: j0 });
        }
    }
    let inflow: f64 = candidates
        .iter()
        .filter(|&&s| s != state)
        .map(|&s| {
            let rate: f64 = spec
                .transitions(s)
                .iter()
                .filter(|&&(t, _)| t == state)
                .map(|&(_, r)| r)
                .sum();
            if rate == 0.0 {
                0.0
            } else {
                rate * prob(s)
            }
        })
        .sum();
    inflow - out * prob(state)
}
