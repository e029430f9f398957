//! Random small chains solved in closed form and by truncation.

use proptest::prelude::*;
use qbd_core::chain::{validate_spec, BoundarySpec, EntryRate, ExitRate, PhaseJump, PhaseRates, StateId};
use qbd_core::oracle::{truncated_stationary, TruncationOptions};
use qbd_core::solver::{balance_residual, solve, SolveError};
use qbd_core::ChainSpec;

#[derive(Debug, Clone)]
struct Raw {
    j0: u64,
    phases: Vec<(bool, f64, f64)>,
    jumps: Vec<(usize, usize, i64, f64)>,
    exits: Vec<f64>,
}

fn raw_chain() -> impl Strategy<Value = Raw> {
    (1usize..=4, 0u64..=2).prop_flat_map(|(n, j0)| {
        let phases = prop::collection::vec((prop::bool::weighted(0.75), 0.2f64..1.5, 0.5f64..3.0), n);
        let jumps = prop::collection::vec((0..n, 0..n, -1i64..=1, 0.05f64..1.0), 0..=2 * n);
        let exits = prop::collection::vec(0.1f64..2.0, n);
        (Just(j0), phases, jumps, exits).prop_map(|(j0, phases, jumps, exits)| Raw {
            j0,
            phases,
            jumps,
            exits,
        })
    })
}

fn build(raw: &Raw) -> Option<ChainSpec> {
    let n = raw.phases.len();
    let phases: Vec<PhaseRates> = raw
        .phases
        .iter()
        .enumerate()
        .map(|(m, &(on, lambda, mu))| PhaseRates {
            lambda: if on || m == 0 { lambda } else { 0.0 },
            mu: if m == n - 1 { mu + lambda } else { mu },
        })
        .collect();
    let jumps: Vec<PhaseJump> = raw
        .jumps
        .iter()
        .filter(|j| j.0 < j.1)
        .map(|&(from, to, delta, rate)| PhaseJump { from, to, delta, rate })
        .collect();
    let boundary = BoundarySpec {
        states: vec!["e".into()],
        internal: vec![],
        into_repeating: vec![EntryRate {
            from: 0,
            phase: 0,
            rate: 1.0,
        }],
        out_of_repeating: raw
            .exits
            .iter()
            .enumerate()
            .map(|(phase, &rate)| ExitRate { phase, to: 0, rate })
            .collect(),
    };
    let spec = ChainSpec::new(raw.j0, phases, jumps, boundary).ok()?;
    validate_spec(&spec).is_ok().then_some(spec)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_matches_truncation(raw in raw_chain()) {
        let Some(spec) = build(&raw) else { return Ok(()) };
        let dist = match solve(&spec) {
            Ok(d) => d,
            Err(SolveError::Unsupported(_)) | Err(SolveError::UnsupportedStructure(_)) => return Ok(()),
            Err(e) => panic!("{e} for {raw:?}"),
        };
        prop_assert!((dist.total_mass() - 1.0).abs() <= 1e-10);
        let truth = truncated_stationary(&spec, spec.j0() + 80, &TruncationOptions::default()).unwrap();
        prop_assume!(truth.converged);
        for phase in 0..spec.num_phases() {
            for level in spec.j0()..=spec.j0() + 40 {
                let s = StateId::Repeating { phase, level };
                let e = (dist.probability(s).unwrap() - truth.prob(s)).abs();
                prop_assert!(e <= 1e-8, "{s}: {e:e}");
                let r = balance_residual(&spec, &dist, s);
                prop_assert!(r.abs() <= 1e-9, "balance at {s}: {r:e}");
            }
        }
        let e = (dist.boundary_probs()[0] - truth.prob(StateId::Boundary(0))).abs();
        prop_assert!(e <= 1e-8);
    }
}

/// A zero-λ phase feeds phase 2 through an up-jump, and phase 2 in turn feeds
/// phase 3 through an up-jump, so the level-j0 correction has to propagate.
#[test]
fn up_jump_corrections_propagate() {
    let phases = vec![
        PhaseRates { lambda: 1.0, mu: 2.0 },
        PhaseRates { lambda: 0.0, mu: 1.5 },
        PhaseRates { lambda: 0.8, mu: 1.6 },
        PhaseRates { lambda: 0.5, mu: 1.9 },
    ];
    let jumps = vec![
        PhaseJump {
            from: 0,
            to: 1,
            delta: 0,
            rate: 0.4,
        },
        PhaseJump {
            from: 1,
            to: 2,
            delta: 1,
            rate: 0.7,
        },
        PhaseJump {
            from: 2,
            to: 3,
            delta: 1,
            rate: 0.3,
        },
        PhaseJump {
            from: 1,
            to: 3,
            delta: 1,
            rate: 0.2,
        },
    ];
    let boundary = BoundarySpec {
        states: vec!["e".into()],
        internal: vec![],
        into_repeating: vec![EntryRate {
            from: 0,
            phase: 0,
            rate: 1.0,
        }],
        out_of_repeating: (0..4)
            .map(|phase| ExitRate {
                phase,
                to: 0,
                rate: 1.0,
            })
            .collect(),
    };
    let spec = ChainSpec::new(1, phases, jumps, boundary).unwrap();
    let dist = solve(&spec).unwrap();
    let truth = truncated_stationary(&spec, 120, &TruncationOptions::default()).unwrap();
    for phase in 0..4 {
        for level in 1..=60 {
            let s = StateId::Repeating { phase, level };
            assert!((dist.probability(s).unwrap() - truth.prob(s)).abs() <= 1e-12, "{s}");
        }
    }
}

#[test]
fn two_zero_base_phases_linked_by_up_jump_are_rejected() {
    let phases = vec![
        PhaseRates { lambda: 1.0, mu: 2.0 },
        PhaseRates { lambda: 0.0, mu: 1.5 },
        PhaseRates { lambda: 0.0, mu: 1.6 },
    ];
    let jumps = vec![
        PhaseJump {
            from: 0,
            to: 1,
            delta: 0,
            rate: 0.4,
        },
        PhaseJump {
            from: 1,
            to: 2,
            delta: 1,
            rate: 0.7,
        },
    ];
    let boundary = BoundarySpec {
        states: vec!["e".into()],
        internal: vec![],
        into_repeating: vec![EntryRate {
            from: 0,
            phase: 0,
            rate: 1.0,
        }],
        out_of_repeating: (0..3)
            .map(|phase| ExitRate {
                phase,
                to: 0,
                rate: 1.0,
            })
            .collect(),
    };
    let spec = ChainSpec::new(1, phases, jumps, boundary).unwrap();
    assert!(matches!(solve(&spec), Err(SolveError::UnsupportedStructure(_))));
}
