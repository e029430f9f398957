//! Exact stationary distributions for level-skip-free, phase-unidirectional
//! quasi-birth-death chains.
//!
//! The repeating portion of such a chain is a grid of states `(m, j)` with
//! phases `0..=M` and levels `j >= j0`. Within a phase the chain behaves like an
//! M/M/1 queue that is "cleared" whenever it jumps to a higher phase. Each
//! phase therefore contributes one scalar base term `r_m`, and the
//! probabilities of phase `m` are a finite combination of powers of those
//! bases. The weights follow from a small linear system over the boundary
//! states and the level-`j0` states.
//!
//! The crate is `no_std` (it needs `alloc`). The JSON model format, report
//! writers and the command-line tool live in the companion `qbd-cli` crate.
//!
//! Module map:
//! - [`chain`]: chain description, validation, truncated generator.
//! - [`clearing`]: closed forms for the M/M/1 queue with clearing.
//! - [`series`]: negative-binomial series and weighted occupancy sums.
//! - [`solver`]: base terms, case classification, coefficient propagation,
//!   boundary system and the resulting [`StationaryDistribution`].
//! - [`linalg`]: small dense and banded LU solvers.
//! - [`oracle`]: independent reference computations (truncation, rate matrix).
//! - [`metrics`]: moments and tails from the closed form.
//! - [`fixtures`]: the bundled example chains.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod affine;
pub mod chain;
pub mod clearing;
pub mod fixtures;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod series;
pub mod solver;

mod math;

pub use chain::{
    BoundaryRate, BoundarySpec, ChainSpec, EntryRate, ExitRate, PhaseJump, PhaseRates, SpecError, StateId,
    ValidationReport,
};
pub use clearing::{ClearingDerived, ClearingError, ClearingParams};
pub use metrics::{compute_metrics, MetricsReport};
pub use solver::{
    solve, solve_with, BaseTerms, CaseTag, SolutionTerm, SolveError, SolveOptions, StationaryDistribution,
};
