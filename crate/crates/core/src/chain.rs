//! Chain descriptions, structural checks, and the truncated generator.
//!
//! A chain has a finite set of named boundary states and a repeating grid of
//! states `(m, j)`, `0 ≤ m ≤ M`, `j ≥ j0`. In phase `m` the level moves up at
//! rate `λ_m` and down at rate `μ_m` (down moves only from `j > j0`). Jumps go
//! from phase `i` to a higher phase and shift the level by at most one. The
//! boundary connects to the repeating part only through level `j0`.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::math::is_finite_nonneg;

/// Default cap on the number of states in a truncated generator.
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRates {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseJump {
    pub from: usize,
    pub to: usize,
    pub delta: i64,
    pub rate: f64,
}

/// A transition between two boundary states, by index into `states`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRate {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Boundary state `from` to repeating state `(phase, j0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryRate {
    pub from: usize,
    pub phase: usize,
    pub rate: f64,
}

/// Repeating state `(phase, j0)` to boundary state `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRate {
    pub phase: usize,
    pub to: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySpec {
    pub states: Vec<String>,
    pub internal: Vec<BoundaryRate>,
    pub into_repeating: Vec<EntryRate>,
    pub out_of_repeating: Vec<ExitRate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateId {
    Boundary(usize),
    Repeating { phase: usize, level: u64 },
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateId::Boundary(i) => write!(f, "boundary[{i}]"),
            StateId::Repeating { phase, level } => write!(f, "({phase},{level})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("a chain needs at least one phase")]
    NoPhases,
    #[error("{field}: rate must be finite and nonnegative, got {value}")]
    NegativeRate { field: String, value: f64 },
    #[error("{field}: rate must be finite and positive, got {value}")]
    NonPositiveRate { field: String, value: f64 },
    #[error("{field}: skip-free violated (level change {delta} not in -1..=1)")]
    SkipFree { field: String, delta: i64 },
    #[error("{field}: jump from phase {from} to phase {to} does not increase the phase")]
    NotUnidirectional { field: String, from: usize, to: usize },
    #[error("{field}: phase {phase} out of range (M = {max})")]
    PhaseOutOfRange { field: String, phase: usize, max: usize },
    #[error("{field}: boundary state index {index} out of range ({count} states)")]
    StateOutOfRange { field: String, index: usize, count: usize },
    #[error("{field}: self-loop on boundary state {name:?}")]
    SelfLoop { field: String, name: String },
    #[error("boundary.states: duplicate state name {0:?}")]
    DuplicateState(String),
    #[error("truncation level {j_max} must be at least j0 + 2 = {min}")]
    TruncationTooLow { j_max: u64, min: u64 },
    #[error("truncated chain has {states} states, above the cap of {cap}")]
    StateCapExceeded { states: usize, cap: usize },
}

/// Description of a level-skip-free, phase-unidirectional chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    j0: u64,
    phases: Vec<PhaseRates>,
    jumps: Vec<PhaseJump>,
    boundary: BoundarySpec,
    // Aggregated jump rates, indexed [from * P + to][delta + 1].
    jump_table: Vec<[f64; 3]>,
}

fn check_nonneg(field: impl FnOnce() -> String, value: f64) -> Result<(), SpecError> {
    if is_finite_nonneg(value) {
        Ok(())
    } else {
        Err(SpecError::NegativeRate { field: field(), value })
    }
}

fn check_positive(field: impl FnOnce() -> String, value: f64) -> Result<(), SpecError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(SpecError::NonPositiveRate { field: field(), value })
    }
}

impl ChainSpec {
    pub fn new(
        j0: u64,
        phases: Vec<PhaseRates>,
        jumps: Vec<PhaseJump>,
        boundary: BoundarySpec,
    ) -> Result<Self, SpecError> {
        if phases.is_empty() {
            return Err(SpecError::NoPhases);
        }
        let max = phases.len() - 1;
        for (m, p) in phases.iter().enumerate() {
            check_nonneg(|| format!("phases[{m}].lambda"), p.lambda)?;
            check_nonneg(|| format!("phases[{m}].mu"), p.mu)?;
        }
        let p_count = phases.len();
        let mut jump_table = vec![[0.0; 3]; p_count * p_count];
        for (n, jmp) in jumps.iter().enumerate() {
            for (name, phase) in [("from", jmp.from), ("to", jmp.to)] {
                if phase > max {
                    return Err(SpecError::PhaseOutOfRange {
                        field: format!("jumps[{n}].{name}"),
                        phase,
                        max,
                    });
                }
            }
            if jmp.to <= jmp.from {
                return Err(SpecError::NotUnidirectional {
                    field: format!("jumps[{n}]"),
                    from: jmp.from,
                    to: jmp.to,
                });
            }
            if !(-1..=1).contains(&jmp.delta) {
                return Err(SpecError::SkipFree {
                    field: format!("jumps[{n}].delta"),
                    delta: jmp.delta,
                });
            }
            check_positive(|| format!("jumps[{n}].rate"), jmp.rate)?;
            jump_table[jmp.from * p_count + jmp.to][(jmp.delta + 1) as usize] += jmp.rate;
        }

        let count = boundary.states.len();
        for (i, name) in boundary.states.iter().enumerate() {
            if boundary.states[..i].contains(name) {
                return Err(SpecError::DuplicateState(name.clone()));
            }
        }
        let state_ok = |field: String, index: usize| {
            if index < count {
                Ok(())
            } else {
                Err(SpecError::StateOutOfRange { field, index, count })
            }
        };
        let phase_ok = |field: String, phase: usize| {
            if phase <= max {
                Ok(())
            } else {
                Err(SpecError::PhaseOutOfRange { field, phase, max })
            }
        };
        for (n, t) in boundary.internal.iter().enumerate() {
            state_ok(format!("boundary.internal[{n}].from"), t.from)?;
            state_ok(format!("boundary.internal[{n}].to"), t.to)?;
            if t.from == t.to {
                return Err(SpecError::SelfLoop {
                    field: format!("boundary.internal[{n}]"),
                    name: boundary.states[t.from].clone(),
                });
            }
            check_positive(|| format!("boundary.internal[{n}].rate"), t.rate)?;
        }
        for (n, t) in boundary.into_repeating.iter().enumerate() {
            state_ok(format!("boundary.into_repeating[{n}].from"), t.from)?;
            phase_ok(format!("boundary.into_repeating[{n}].phase"), t.phase)?;
            check_positive(|| format!("boundary.into_repeating[{n}].rate"), t.rate)?;
        }
        for (n, t) in boundary.out_of_repeating.iter().enumerate() {
            phase_ok(format!("boundary.out_of_repeating[{n}].phase"), t.phase)?;
            state_ok(format!("boundary.out_of_repeating[{n}].to"), t.to)?;
            check_positive(|| format!("boundary.out_of_repeating[{n}].rate"), t.rate)?;
        }

        Ok(Self {
            j0,
            phases,
            jumps,
            boundary,
            jump_table,
        })
    }

    pub fn j0(&self) -> u64 {
        self.j0
    }

    /// Highest phase index `M`.
    pub fn max_phase(&self) -> usize {
        self.phases.len() - 1
    }

    pub fn num_phases(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[PhaseRates] {
        &self.phases
    }

    pub fn phase(&self, m: usize) -> PhaseRates {
        self.phases[m]
    }

    pub fn jumps(&self) -> &[PhaseJump] {
        &self.jumps
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn num_boundary_states(&self) -> usize {
        self.boundary.states.len()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.boundary.states.iter().position(|s| s == name)
    }

    /// Total rate of jumps from phase `from` to phase `to` with level change `delta`.
    pub fn jump_rate(&self, from: usize, to: usize, delta: i64) -> f64 {
        if !(-1..=1).contains(&delta) || from >= self.phases.len() || to >= self.phases.len() {
            return 0.0;
        }
        self.jump_table[from * self.phases.len() + to][(delta + 1) as usize]
    }

    /// `α_m`: the total rate out of phase `m` into higher phases.
    pub fn total_jump_rate(&self, m: usize) -> f64 {
        let p = self.phases.len();
        (m + 1..p).map(|i| self.jump_table[m * p + i].iter().sum::<f64>()).sum()
    }

    /// Total rate of jumps out of phase `m` that are available at level `j0`
    /// (level change 0 or +1).
    pub fn jump_rate_at_base_level(&self, m: usize) -> f64 {
        let p = self.phases.len();
        (m + 1..p)
            .map(|i| {
                let t = self.jump_table[m * p + i];
                t[1] + t[2]
            })
            .sum()
    }

    /// All transitions out of `state` as `(target, rate)`, with no truncation.
    pub fn transitions(&self, state: StateId) -> Vec<(StateId, f64)> {
        let mut out = Vec::new();
        let j0 = self.j0;
        match state {
            StateId::Boundary(x) => {
                for t in self.boundary.internal.iter().filter(|t| t.from == x) {
                    out.push((StateId::Boundary(t.to), t.rate));
                }
                for t in self.boundary.into_repeating.iter().filter(|t| t.from == x) {
                    out.push((
                        StateId::Repeating {
                            phase: t.phase,
                            level: j0,
                        },
                        t.rate,
                    ));
                }
            }
            StateId::Repeating { phase: m, level: j } => {
                let rates = self.phases[m];
                if rates.lambda > 0.0 {
                    out.push((StateId::Repeating { phase: m, level: j + 1 }, rates.lambda));
                }
                if j > j0 && rates.mu > 0.0 {
                    out.push((StateId::Repeating { phase: m, level: j - 1 }, rates.mu));
                }
                if j == j0 {
                    for t in self.boundary.out_of_repeating.iter().filter(|t| t.phase == m) {
                        out.push((StateId::Boundary(t.to), t.rate));
                    }
                }
                for i in m + 1..self.phases.len() {
                    for delta in -1..=1_i64 {
                        let r = self.jump_rate(m, i, delta);
                        if r == 0.0 || (delta < 0 && j == j0) {
                            continue;
                        }
                        let level = (j as i64 + delta) as u64;
                        out.push((StateId::Repeating { phase: i, level }, r));
                    }
                }
            }
        }
        out
    }
}

/// Result of [`validate_spec`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks the necessary ergodicity conditions that can be read off the rates
/// and the transition graph.
pub fn validate_spec(spec: &ChainSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let big_m = spec.max_phase();
    for (m, p) in spec.phases.iter().enumerate() {
        let alpha = spec.total_jump_rate(m);
        if m == big_m {
            if p.lambda >= p.mu {
                report.errors.push(format!(
                    "unstable final phase: phase {m} has lambda = {} >= mu = {}",
                    p.lambda, p.mu
                ));
            }
        } else if p.lambda >= p.mu && alpha == 0.0 {
            report.errors.push(format!(
                "phase {m}: lambda = {} >= mu = {} but no jumps leave the phase",
                p.lambda, p.mu
            ));
        } else if p.lambda >= p.mu {
            report.warnings.push(format!(
                "phase {m}: lambda >= mu, stability relies on jumps out of the phase"
            ));
        }
        if p.lambda == 0.0 {
            let fed = (0..m).any(|i| (-1..=1).any(|d| spec.jump_rate(i, m, d) > 0.0));
            if !fed {
                report.errors.push(format!(
                    "phase {m}: lambda = 0 and no lower phase jumps into it, so its upper levels are unreachable"
                ));
            }
        }
    }
    connectivity_errors(spec, &mut report.errors);
    report
}

/// Strong-connectivity check on the window of boundary states plus levels
/// `j0..=j0+2`. Levels above `j0` are translation invariant, so upward moves
/// out of the top level are folded back onto it.
fn connectivity_errors(spec: &ChainSpec, errors: &mut Vec<String>) {
    const WINDOW: u64 = 2;
    let n_b = spec.num_boundary_states();
    let p = spec.num_phases();
    let j0 = spec.j0;
    let n = n_b + p * (WINDOW as usize + 1);
    let index = |s: StateId| match s {
        StateId::Boundary(x) => x,
        StateId::Repeating { phase, level } => {
            let lv = (level - j0).min(WINDOW) as usize;
            n_b + lv * p + phase
        }
    };
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    let mut states = Vec::with_capacity(n);
    states.extend((0..n_b).map(StateId::Boundary));
    for lv in 0..=WINDOW {
        for phase in 0..p {
            states.push(StateId::Repeating { phase, level: j0 + lv });
        }
    }
    for (a, &s) in states.iter().enumerate() {
        for (t, _) in spec.transitions(s) {
            let b = index(t);
            if a != b {
                fwd[a].push(b);
                rev[b].push(a);
            }
        }
    }
    let reach = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        seen
    };
    let from_root = reach(&fwd);
    let to_root = reach(&rev);
    let name = |s: StateId| match s {
        StateId::Boundary(x) => format!("boundary state {:?}", spec.boundary.states[x]),
        StateId::Repeating { phase, level } => format!("state ({phase},{level})"),
    };
    let root = name(states[0]);
    for a in 1..n {
        if !from_root[a] {
            errors.push(format!("{} is unreachable from {root}", name(states[a])));
        } else if !to_root[a] {
            errors.push(format!("{} cannot return to {root} (absorbing class)", name(states[a])));
        }
    }
}

/// Sparse generator of the chain restricted to levels `j0..=j_max`.
///
/// States are ordered boundary first, then level by level with phases in
/// order. Each row holds its off-diagonal entries sorted by column, followed by
/// nothing else; the diagonal is stored separately.
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    pub j_max: u64,
    n_boundary: usize,
    n_phases: usize,
    j0: u64,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub diagonal: Vec<f64>,
}

impl TruncatedGenerator {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

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

    pub fn state_of(&self, index: usize) -> StateId {
        if index < self.n_boundary {
            StateId::Boundary(index)
        } else {
            let k = index - self.n_boundary;
            StateId::Repeating {
                phase: k % self.n_phases,
                level: self.j0 + (k / self.n_phases) as u64,
            }
        }
    }

    /// Largest `|i - j|` over nonzero off-diagonal entries below and above
    /// the diagonal.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut lo, mut hi) = (0, 0);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                if j < i {
                    lo = lo.max(i - j);
                } else {
                    hi = hi.max(j - i);
                }
            }
        }
        (lo, hi)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.diagonal[i] + self.rows[i].iter().map(|&(_, v)| v).sum::<f64>()
    }

    /// Dense copy; meant for small truncations.
    pub fn to_dense(&self) -> crate::linalg::DenseMatrix {
        let n = self.dim();
        let mut q = crate::linalg::DenseMatrix::zeros(n, n);
        for i in 0..n {
            q[(i, i)] = self.diagonal[i];
            for &(j, v) in &self.rows[i] {
                q[(i, j)] += v;
            }
        }
        q
    }
}

pub fn build_truncated_generator(spec: &ChainSpec, j_max: u64) -> Result<TruncatedGenerator, SpecError> {
    build_truncated_generator_with_cap(spec, j_max, DEFAULT_STATE_CAP)
}

pub fn build_truncated_generator_with_cap(
    spec: &ChainSpec,
    j_max: u64,
    cap: usize,
) -> Result<TruncatedGenerator, SpecError> {
    let j0 = spec.j0;
    if j_max < j0 + 2 {
        return Err(SpecError::TruncationTooLow { j_max, min: j0 + 2 });
    }
    let n_b = spec.num_boundary_states();
    let p = spec.num_phases();
    let levels = (j_max - j0 + 1) as u128;
    let states = levels * p as u128 + n_b as u128;
    if states > cap as u128 {
        return Err(SpecError::StateCapExceeded {
            states: usize::try_from(states).unwrap_or(usize::MAX),
            cap,
        });
    }
    let n = states as usize;
    let mut gen = TruncatedGenerator {
        j_max,
        n_boundary: n_b,
        n_phases: p,
        j0,
        rows: Vec::with_capacity(n),
        diagonal: vec![0.0; n],
    };
    for i in 0..n {
        let s = gen.state_of(i);
        let mut row: Vec<(usize, f64)> = spec
            .transitions(s)
            .into_iter()
            .filter_map(|(t, r)| gen.index_of(t).map(|c| (c, r)))
            .filter(|&(c, _)| c != i)
            .collect();
        row.sort_by_key(|&(c, _)| c);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        gen.diagonal[i] = -row.iter().map(|&(_, v)| v).sum::<f64>();
        gen.rows.push(row);
    }
    Ok(gen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn mm1(lambda: f64, mu: f64) -> ChainSpec {
        ChainSpec::new(
            0,
            vec![PhaseRates { lambda, mu }],
            vec![],
            BoundarySpec {
                states: vec!["s".to_string()],
                internal: vec![],
                into_repeating: vec![EntryRate {
                    from: 0,
                    phase: 0,
                    rate: 1.0,
                }],
                out_of_repeating: vec![ExitRate {
                    phase: 0,
                    to: 0,
                    rate: mu,
                }],
            },
        )
        .unwrap()
    }

    #[test]
    fn rejects_malformed_jumps() {
        let phases = vec![PhaseRates { lambda: 1.0, mu: 2.0 }; 2];
        let bad = |delta, from, to| {
            ChainSpec::new(
                0,
                phases.clone(),
                vec![PhaseJump {
                    from,
                    to,
                    delta,
                    rate: 1.0,
                }],
                BoundarySpec::default(),
            )
        };
        let e = bad(2, 0, 1).unwrap_err();
        assert!(e.to_string().contains("skip-free violated"), "{e}");
        assert!(matches!(bad(0, 1, 0), Err(SpecError::NotUnidirectional { .. })));
        assert!(matches!(bad(0, 0, 5), Err(SpecError::PhaseOutOfRange { .. })));
    }

    #[test]
    fn single_phase_unstable() {
        let spec = ChainSpec::new(
            0,
            vec![PhaseRates { lambda: 2.0, mu: 1.0 }],
            vec![],
            BoundarySpec::default(),
        )
        .unwrap();
        let report = validate_spec(&spec);
        assert!(report.errors.iter().any(|e| e.contains("unstable final phase")));
        assert_eq!(spec.total_jump_rate(0), 0.0);
    }

    #[test]
    fn unfed_zero_lambda_phase() {
        let spec = ChainSpec::new(
            0,
            vec![PhaseRates { lambda: 1.0, mu: 2.0 }, PhaseRates { lambda: 0.0, mu: 2.0 }],
            vec![],
            BoundarySpec::default(),
        )
        .unwrap();
        let report = validate_spec(&spec);
        assert!(report.errors.iter().any(|e| e.contains("phase 1: lambda = 0")));
    }

    #[test]
    fn mm1_generator() {
        let spec = mm1(1.0, 2.0);
        assert!(validate_spec(&spec).is_ok());
        let g = build_truncated_generator(&spec, 3).unwrap();
        assert_eq!(g.dim(), 5);
        for i in 0..g.dim() {
            assert!(g.row_sum(i).abs() < 1e-12);
        }
        let s1 = g.index_of(StateId::Repeating { phase: 0, level: 1 }).unwrap();
        let s0 = g.index_of(StateId::Repeating { phase: 0, level: 0 }).unwrap();
        assert_eq!(g.entry(s1, s0), 2.0);
        assert_eq!(g.entry(0, s0), 1.0);
        let top = g.index_of(StateId::Repeating { phase: 0, level: 3 }).unwrap();
        assert_eq!(g.diagonal[top], -2.0);
        assert!(matches!(
            build_truncated_generator(&spec, 1),
            Err(SpecError::TruncationTooLow { .. })
        ));
        assert!(matches!(
            build_truncated_generator_with_cap(&spec, 100, 50),
            Err(SpecError::StateCapExceeded { .. })
        ));
    }

    #[test]
    fn disconnected_boundary_is_reported() {
        let mut b = mm1(1.0, 2.0).boundary().clone();
        b.states.push("orphan".to_string());
        let spec = ChainSpec::new(0, vec![PhaseRates { lambda: 1.0, mu: 2.0 }], vec![], b).unwrap();
        let report = validate_spec(&spec);
        assert!(report.errors.iter().any(|e| e.contains("orphan")), "{report:?}");
    }
}
