//! Machine-readable outputs of the `qbd` tool.

use std::io;

use qbd_core::chain::StateId;
use qbd_core::linalg::DenseMatrix;
use qbd_core::oracle::{
    extract_blocks, iterate_rate_matrix, truncated_stationary, OracleError, TruncatedSolution, TruncationOptions,
    DEFAULT_R_MAX_ITER, DEFAULT_R_TOL,
};
use qbd_core::{compute_metrics, ChainSpec, MetricsReport, StationaryDistribution};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

/// Levels above `j0` written by the CSV export.
pub const CSV_LEVELS: u64 = 50;
/// Levels above `j0` checked by `compare`.
pub const COMPARE_LEVELS: u64 = 60;
/// Bound on entries of R below the diagonal.
pub const BELOW_DIAGONAL_TOL: f64 = 1e-10;
pub const DEFAULT_TAILS: [u64; 3] = [10, 20, 40];

/// Rounds to 15 significant digits.
pub fn sig15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().expect("formatted float parses")
}

/// Name → probability pairs written as a JSON object in their original order.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedProbs(pub Vec<(String, f64)>);

impl Serialize for NamedProbs {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

fn named(names: &[String], probs: impl IntoIterator<Item = f64>) -> NamedProbs {
    NamedProbs(names.iter().cloned().zip(probs.into_iter().map(sig15)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct TermDoc {
    pub phase: usize,
    pub coeff: f64,
    pub base: f64,
    pub degree: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailDoc {
    pub threshold: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsDoc {
    pub total_mass: f64,
    pub boundary_mass: f64,
    pub mean_level: f64,
    pub level_variance: f64,
    pub phase_marginals: Vec<f64>,
    pub tail: Vec<TailDoc>,
    pub boundary_probs: NamedProbs,
}

impl From<&MetricsReport> for MetricsDoc {
    fn from(r: &MetricsReport) -> Self {
        Self {
            total_mass: sig15(r.total_mass),
            boundary_mass: sig15(r.boundary_mass),
            mean_level: sig15(r.mean_level),
            level_variance: sig15(r.level_variance),
            phase_marginals: r.phase_marginals.iter().copied().map(sig15).collect(),
            tail: r
                .tail
                .iter()
                .map(|&(threshold, p)| TailDoc {
                    threshold,
                    probability: sig15(p),
                })
                .collect(),
            boundary_probs: NamedProbs(r.boundary_probs.iter().map(|(k, v)| (k.clone(), sig15(*v))).collect()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionDoc {
    pub case: String,
    pub boundary: NamedProbs,
    pub level_j0: Vec<f64>,
    pub terms: Vec<TermDoc>,
    pub metrics: MetricsDoc,
}

impl SolutionDoc {
    pub fn new(dist: &StationaryDistribution, tails: &[u64]) -> Self {
        let terms = dist
            .phase_solutions()
            .iter()
            .enumerate()
            .flat_map(|(phase, ts)| {
                ts.iter().map(move |t| TermDoc {
                    phase,
                    coeff: sig15(t.coeff),
                    base: sig15(t.base),
                    degree: t.degree,
                })
            })
            .collect();
        Self {
            case: dist.case().name().to_string(),
            boundary: named(dist.boundary_names(), dist.boundary_probs().iter().copied()),
            level_j0: dist.level_j0_probs().iter().copied().map(sig15).collect(),
            terms,
            metrics: MetricsDoc::from(&compute_metrics(dist, tails)),
        }
    }
}

/// `phase,level,probability` rows over `j0..=j0+CSV_LEVELS` for every phase.
pub fn write_csv<W: io::Write>(dist: &StationaryDistribution, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phase", "level", "probability"])?;
    for m in 0..dist.num_phases() {
        for j in dist.j0()..=dist.j0() + CSV_LEVELS {
            let p = dist.evaluate(m, j).expect("phase and level in range");
            w.serialize((m, j, p))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleDoc {
    pub j_max: u64,
    pub converged: bool,
    pub top_mass: f64,
    pub boundary: NamedProbs,
    /// `levels[j − j0][m]`.
    pub levels: Vec<Vec<f64>>,
    /// `None` when the iteration did not converge.
    pub rate_matrix: Option<Vec<Vec<f64>>>,
}

fn rows(r: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..r.rows())
        .map(|i| r.row(i).iter().copied().map(sig15).collect())
        .collect()
}

impl OracleDoc {
    pub fn new(spec: &ChainSpec, truth: &TruncatedSolution, r: Option<&DenseMatrix>) -> Self {
        Self {
            j_max: truth.j_max,
            converged: truth.converged,
            top_mass: truth.top_mass,
            boundary: named(
                &spec.boundary().states,
                (0..spec.num_boundary_states()).map(|x| truth.prob(StateId::Boundary(x))),
            ),
            levels: (spec.j0()..=truth.j_max)
                .map(|j| truth.level(j).into_iter().map(sig15).collect())
                .collect(),
            rate_matrix: r.map(rows),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareDoc {
    pub case: String,
    pub sup_tol: f64,
    pub levels: [u64; 2],
    pub truncation_j_max: u64,
    pub truncation_converged: bool,
    /// Largest `|π_closed − π_truncated|` over boundary states and the level range.
    pub sup_error: f64,
    /// Largest `|R[m][m] − r_m|`.
    pub base_error: f64,
    /// Largest `|R[m][i]|` with `i < m`.
    pub below_diagonal: f64,
    pub pass: bool,
}

/// Checks a solved `dist` against the truncated chain and the rate matrix.
pub fn compare(spec: &ChainSpec, dist: &StationaryDistribution, sup_tol: f64) -> Result<CompareDoc, OracleError> {
    let top = spec.j0() + COMPARE_LEVELS;
    let truth = truncated_stationary(spec, spec.j0() + 2 * COMPARE_LEVELS, &TruncationOptions::default())?;
    let mut sup_error: f64 = 0.0;
    for x in 0..spec.num_boundary_states() {
        let s = StateId::Boundary(x);
        sup_error = sup_error.max((dist.probability(s).expect("state exists") - truth.prob(s)).abs());
    }
    for phase in 0..spec.num_phases() {
        for level in spec.j0()..=top {
            let s = StateId::Repeating { phase, level };
            sup_error = sup_error.max((dist.probability(s).expect("state exists") - truth.prob(s)).abs());
        }
    }
    let r = iterate_rate_matrix(&extract_blocks(spec), DEFAULT_R_TOL, DEFAULT_R_MAX_ITER)?;
    let bases = &dist.bases().r;
    let mut base_error: f64 = 0.0;
    let mut below_diagonal: f64 = 0.0;
    for m in 0..spec.num_phases() {
        base_error = base_error.max((r[(m, m)] - bases[m]).abs());
        for i in 0..m {
            below_diagonal = below_diagonal.max(r[(m, i)].abs());
        }
    }
    let pass = truth.converged && sup_error <= sup_tol && base_error <= sup_tol && below_diagonal <= BELOW_DIAGONAL_TOL;
    Ok(CompareDoc {
        case: dist.case().name().to_string(),
        sup_tol,
        levels: [spec.j0(), top],
        truncation_j_max: truth.j_max,
        truncation_converged: truth.converged,
        sup_error,
        base_error,
        below_diagonal,
        pass,
    })
}
