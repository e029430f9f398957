//! Example chains used by the tests, the acceptance suite and the CLI's
//! bundled model files.
//!
//! Boundary state names follow the `(m,0)` convention of the three queueing
//! models: level 0 of phase `m` is a boundary state and the repeating portion
//! starts at `j0 = 1`.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::{BoundaryRate, BoundarySpec, ChainSpec, EntryRate, ExitRate, PhaseJump, PhaseRates};
use crate::clearing::ClearingParams;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|m| alloc::format!("({m},0)")).collect()
}

fn jump(from: usize, to: usize, delta: i64, rate: f64) -> PhaseJump {
    PhaseJump { from, to, delta, rate }
}

fn internal(from: usize, to: usize, rate: f64) -> BoundaryRate {
    BoundaryRate { from, to, rate }
}

fn entry(from: usize, phase: usize, rate: f64) -> EntryRate {
    EntryRate { from, phase, rate }
}

fn exit(phase: usize, to: usize, rate: f64) -> ExitRate {
    ExitRate { phase, to, rate }
}

/// Server that sleeps when idle and wakes through an intermediate power state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerStateParams {
    pub lambda: f64,
    pub mu: f64,
    /// Rate of leaving each setup stage at the boundary.
    pub beta: f64,
    /// Setup rate from the off state.
    pub gamma: f64,
    /// Setup rate from the sleep state.
    pub delta: f64,
}

impl Default for PowerStateParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 2.0,
            beta: 1.0,
            gamma: 0.2,
            delta: 0.5,
        }
    }
}

/// Phases: 0 = off, 1 = sleeping, 2 = on. Jobs only get served in phase 2.
pub fn power_states(p: PowerStateParams) -> ChainSpec {
    let phases = vec![
        PhaseRates {
            lambda: p.lambda,
            mu: 0.0,
        },
        PhaseRates {
            lambda: p.lambda,
            mu: 0.0,
        },
        PhaseRates {
            lambda: p.lambda,
            mu: p.mu,
        },
    ];
    let jumps = vec![jump(0, 2, 0, p.gamma), jump(1, 2, 0, p.delta)];
    let boundary = BoundarySpec {
        states: names(3),
        internal: vec![internal(2, 1, p.beta), internal(1, 0, p.beta)],
        into_repeating: (0..3).map(|m| entry(m, m, p.lambda)).collect(),
        out_of_repeating: vec![exit(2, 2, p.mu)],
    };
    ChainSpec::new(1, phases, jumps, boundary).expect("power-state fixture is well formed")
}

/// Server whose speed degrades with fatigue and recovers only when idle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FatigueParams {
    pub lambda: f64,
    pub mu_fresh: f64,
    pub mu_reduced: f64,
    pub mu_slow: f64,
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
}

impl Default for FatigueParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu_fresh: 3.0,
            mu_reduced: 2.0,
            mu_slow: 1.0,
            gamma: 0.3,
            delta: 0.4,
            beta: 1.0,
        }
    }
}

/// Phases 0, 1, 2 = fresh, reduced, slow. Arrivals are turned away in the slow
/// phase, so `λ_2 = 0`.
pub fn fatigue(p: FatigueParams) -> ChainSpec {
    let phases = vec![
        PhaseRates {
            lambda: p.lambda,
            mu: p.mu_fresh,
        },
        PhaseRates {
            lambda: p.lambda,
            mu: p.mu_reduced,
        },
        PhaseRates {
            lambda: 0.0,
            mu: p.mu_slow,
        },
    ];
    let jumps = vec![jump(0, 1, 0, p.gamma), jump(1, 2, 0, p.delta)];
    let boundary = BoundarySpec {
        states: names(3),
        internal: vec![internal(0, 1, p.gamma), internal(1, 2, p.delta), internal(2, 0, p.beta)],
        into_repeating: vec![entry(0, 0, p.lambda), entry(1, 1, p.lambda)],
        out_of_repeating: vec![exit(0, 0, p.mu_fresh), exit(1, 1, p.mu_reduced), exit(2, 2, p.mu_slow)],
    };
    ChainSpec::new(1, phases, jumps, boundary).expect("fatigue fixture is well formed")
}

/// Server that can be infected by a job; infected servers are slower and are
/// rebooted once they idle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirusParams {
    pub lambda_normal: f64,
    pub lambda_virus: f64,
    pub mu: f64,
    pub mu_infected: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl Default for VirusParams {
    fn default() -> Self {
        Self {
            lambda_normal: 0.8,
            lambda_virus: 0.1,
            mu: 2.0,
            mu_infected: 1.0,
            gamma: 0.5,
            beta: 1.0,
        }
    }
}

/// Phases 0 = healthy, 1 = infected, 2 = quarantined. A virus arrival both
/// infects the server and adds a job, which is the diagonal jump `(0→1, +1)`.
pub fn virus(p: VirusParams) -> ChainSpec {
    let lambda = p.lambda_normal + p.lambda_virus;
    let phases = vec![
        PhaseRates {
            lambda: p.lambda_normal,
            mu: p.mu,
        },
        PhaseRates {
            lambda,
            mu: p.mu_infected,
        },
        PhaseRates {
            lambda: 0.0,
            mu: p.mu_infected,
        },
    ];
    let jumps = vec![jump(0, 1, 1, p.lambda_virus), jump(1, 2, 0, p.gamma)];
    let boundary = BoundarySpec {
        states: names(3),
        internal: vec![internal(1, 2, p.gamma), internal(2, 0, p.beta)],
        into_repeating: vec![
            entry(0, 0, p.lambda_normal),
            entry(0, 1, p.lambda_virus),
            entry(1, 1, lambda),
        ],
        out_of_repeating: vec![exit(0, 0, p.mu), exit(1, 1, p.mu_infected), exit(2, 2, p.mu_infected)],
    };
    ChainSpec::new(1, phases, jumps, boundary).expect("virus fixture is well formed")
}

const REPEATED_LAMBDA: f64 = 1.0;
const REPEATED_MU: f64 = 1.5;

/// Jumps of the repeated-base fixtures. Both non-final phases leave at total
/// rate 0.6 and use every level change.
fn repeated_jumps() -> Vec<PhaseJump> {
    vec![
        jump(0, 1, -1, 0.2),
        jump(0, 1, 0, 0.3),
        jump(0, 1, 1, 0.1),
        jump(1, 2, -1, 0.25),
        jump(1, 2, 0, 0.15),
        jump(1, 2, 1, 0.2),
    ]
}

/// Base term shared by phases 0 and 1 of the repeated-base fixtures.
pub fn repeated_base() -> f64 {
    ClearingParams::new(REPEATED_LAMBDA, REPEATED_MU, 0.6)
        .and_then(|p| p.derive())
        .expect("valid rates")
        .r
}

fn repeated(mu_last: f64) -> ChainSpec {
    let phases = vec![
        PhaseRates {
            lambda: REPEATED_LAMBDA,
            mu: REPEATED_MU,
        },
        PhaseRates {
            lambda: REPEATED_LAMBDA,
            mu: REPEATED_MU,
        },
        PhaseRates {
            lambda: REPEATED_LAMBDA,
            mu: mu_last,
        },
    ];
    let boundary = BoundarySpec {
        states: vec!["e".to_string()],
        internal: vec![],
        into_repeating: vec![entry(0, 0, 1.0)],
        out_of_repeating: vec![exit(0, 0, 0.7), exit(1, 0, 0.4), exit(2, 0, 1.1)],
    };
    ChainSpec::new(0, phases, repeated_jumps(), boundary).expect("repeated-base fixture is well formed")
}

/// Three phases with one common base: the last phase's `μ` is tuned so that
/// `λ/μ` equals the base of the two identical lower phases.
pub fn equal_bases() -> ChainSpec {
    repeated(REPEATED_LAMBDA / repeated_base())
}

/// Like [`equal_bases`] with a generic final service rate.
pub fn split_bases() -> ChainSpec {
    repeated(2.3)
}

/// Four phases where phases 0 and 1 share a base and phases 2 and 3 have two
/// other bases. None of the supported patterns applies.
pub fn mixed_multiplicity() -> ChainSpec {
    let phases = vec![
        PhaseRates { lambda: 1.0, mu: 1.5 },
        PhaseRates { lambda: 1.0, mu: 1.5 },
        PhaseRates { lambda: 1.0, mu: 3.0 },
        PhaseRates { lambda: 1.0, mu: 2.0 },
    ];
    let jumps = vec![jump(0, 1, 0, 0.6), jump(1, 2, 0, 0.6), jump(2, 3, 0, 0.5)];
    let boundary = BoundarySpec {
        states: vec!["e".to_string()],
        internal: vec![],
        into_repeating: vec![entry(0, 0, 1.0)],
        out_of_repeating: vec![exit(0, 0, 0.7), exit(1, 0, 0.4), exit(2, 0, 0.5), exit(3, 0, 1.1)],
    };
    ChainSpec::new(0, phases, jumps, boundary).expect("mixed fixture is well formed")
}

/// M/M/1 queue whose empty state is the single boundary state `s`.
pub fn mm1(lambda: f64, mu: f64) -> ChainSpec {
    let boundary = BoundarySpec {
        states: vec!["s".to_string()],
        internal: vec![],
        into_repeating: vec![entry(0, 0, lambda)],
        out_of_repeating: vec![exit(0, 0, mu)],
    };
    ChainSpec::new(1, vec![PhaseRates { lambda, mu }], vec![], boundary).expect("mm1 fixture is well formed")
}

/// Chain with a zero-base middle phase that feeds the last phase through an
/// up-jump, plus a down-jump that skips a phase.
pub fn zero_base_up_jump() -> ChainSpec {
    let phases = vec![
        PhaseRates { lambda: 1.0, mu: 2.0 },
        PhaseRates { lambda: 0.0, mu: 1.5 },
        PhaseRates { lambda: 0.8, mu: 1.6 },
    ];
    let jumps = vec![jump(0, 1, 0, 0.4), jump(1, 2, 1, 0.7), jump(0, 2, -1, 0.2)];
    let boundary = BoundarySpec {
        states: vec!["a".to_string(), "b".to_string()],
        internal: vec![internal(0, 1, 0.5), internal(1, 0, 0.3)],
        into_repeating: vec![entry(0, 0, 1.0), entry(1, 2, 0.4)],
        out_of_repeating: vec![exit(0, 0, 2.0), exit(1, 1, 1.5), exit(2, 1, 1.6)],
    };
    ChainSpec::new(1, phases, jumps, boundary).expect("zero-base fixture is well formed")
}

/// The fixtures the solver supports, by name.
pub fn supported() -> Vec<(&'static str, ChainSpec)> {
    vec![
        ("power_states", power_states(PowerStateParams::default())),
        ("fatigue", fatigue(FatigueParams::default())),
        ("virus", virus(VirusParams::default())),
        ("equal_bases", equal_bases()),
        ("split_bases", split_bases()),
        ("mm1", mm1(1.0, 2.0)),
        ("zero_base_up_jump", zero_base_up_jump()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::validate_spec;

    #[test]
    fn fixtures_validate() {
        for (name, spec) in supported().into_iter().chain([("mixed", mixed_multiplicity())]) {
            let report = validate_spec(&spec);
            assert!(report.is_ok(), "{name}: {report:?}");
        }
    }

    #[test]
    fn jump_rate_totals() {
        let p = PowerStateParams::default();
        let spec = power_states(p);
        assert_eq!(spec.total_jump_rate(0), p.gamma);
        assert_eq!(spec.total_jump_rate(2), 0.0);
        let v = VirusParams::default();
        assert_eq!(virus(v).total_jump_rate(0), v.lambda_virus);
    }
}
