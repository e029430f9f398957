use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use qbd_cli::parse_spec;
use qbd_cli::report::{self, CompareDoc, OracleDoc, SolutionDoc, DEFAULT_TAILS};
use qbd_core::chain::validate_spec;
use qbd_core::oracle::{extract_blocks, iterate_rate_matrix, truncated_stationary, TruncationOptions};
use qbd_core::oracle::{DEFAULT_R_MAX_ITER, DEFAULT_R_TOL};
use qbd_core::series::DEFAULT_BASE_TOL;
use qbd_core::{compute_metrics, solve_with, ChainSpec, SolveError, SolveOptions, StationaryDistribution};

#[derive(Parser)]
#[command(
    name = "qbd",
    version,
    about = "Exact stationary distributions of skip-free, phase-unidirectional QBD chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a chain file for structural errors.
    Validate { spec: PathBuf },
    /// Solve in closed form.
    Solve {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        out: Format,
        /// Relative tolerance under which two bases count as equal.
        #[arg(long, default_value_t = DEFAULT_BASE_TOL)]
        tol_base: f64,
    },
    /// Solve a truncated chain numerically and iterate the rate matrix.
    Oracle {
        spec: PathBuf,
        /// Initial truncation level; doubled until the top two levels hold negligible mass.
        #[arg(long)]
        jmax: Option<u64>,
    },
    /// Check the closed form against both oracles.
    Compare {
        spec: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        sup_tol: f64,
        #[arg(long, default_value_t = DEFAULT_BASE_TOL)]
        tol_base: f64,
    },
    /// Moments, marginals and tail probabilities.
    Metrics {
        spec: PathBuf,
        /// Levels t for which P(level ≥ t) is reported.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TAILS)]
        tails: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_BASE_TOL)]
        tol_base: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    /// Unreadable, malformed or invalid input.
    Input(anyhow::Error),
    /// The input is fine but the run did not succeed.
    Run(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::InvalidSpec(_) => Failure::Input(e.into()),
            e => Failure::Run(e.into()),
        }
    }
}

fn load(path: &Path) -> Result<ChainSpec, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Input)?;
    parse_spec(&text).map_err(|e| {
        let at = e.line().map(|l| format!(" (line {l})")).unwrap_or_default();
        Failure::Input(anyhow::anyhow!("{}{at}: {e}", path.display()))
    })
}

fn solve_spec(spec: &ChainSpec, tol_base: f64) -> Result<StationaryDistribution, Failure> {
    let dist = solve_with(spec, &SolveOptions { tol_base })?;
    for w in dist.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(dist)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(io::Error::from)
        .and_then(|()| writeln!(out))
        .context("writing output")
        .map_err(Failure::Run)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { spec } => {
            let spec = load(&spec)?;
            let report = validate_spec(&spec);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if !report.is_ok() {
                for e in &report.errors {
                    eprintln!("error: {e}");
                }
                return Err(Failure::Input(anyhow::anyhow!(
                    "{} validation error(s)",
                    report.errors.len()
                )));
            }
            println!("ok");
        }
        Command::Solve { spec, out, tol_base } => {
            let spec = load(&spec)?;
            let dist = solve_spec(&spec, tol_base)?;
            match out {
                Format::Json => print_json(&SolutionDoc::new(&dist, &DEFAULT_TAILS))?,
                Format::Csv => report::write_csv(&dist, io::stdout().lock())
                    .context("writing CSV")
                    .map_err(Failure::Run)?,
            }
        }
        Command::Oracle { spec, jmax } => {
            let spec = load(&spec)?;
            let report = validate_spec(&spec);
            if !report.is_ok() {
                return Err(Failure::Input(anyhow::anyhow!(
                    "invalid chain: {}",
                    report.errors.join("; ")
                )));
            }
            let j_max = jmax.unwrap_or(spec.j0() + 2 * report::COMPARE_LEVELS);
            let truth = truncated_stationary(&spec, j_max, &TruncationOptions::default())
                .context("truncated solve")
                .map_err(Failure::Run)?;
            if !truth.converged {
                eprintln!(
                    "warning: truncation stopped at the state cap with top-level mass {:e}",
                    truth.top_mass
                );
            }
            let r = iterate_rate_matrix(&extract_blocks(&spec), DEFAULT_R_TOL, DEFAULT_R_MAX_ITER);
            if let Err(e) = &r {
                eprintln!("warning: rate matrix: {e}");
            }
            print_json(&OracleDoc::new(&spec, &truth, r.as_ref().ok()))?;
        }
        Command::Compare {
            spec,
            sup_tol,
            tol_base,
        } => {
            let spec = load(&spec)?;
            let dist = solve_spec(&spec, tol_base)?;
            let doc: CompareDoc = report::compare(&spec, &dist, sup_tol)
                .context("oracle")
                .map_err(Failure::Run)?;
            print_json(&doc)?;
            if !doc.pass {
                return Err(Failure::Run(anyhow::anyhow!(
                    "closed form disagrees with the oracles (sup error {:e}, base error {:e}, below-diagonal {:e})",
                    doc.sup_error,
                    doc.base_error,
                    doc.below_diagonal
                )));
            }
        }
        Command::Metrics { spec, tails, tol_base } => {
            let spec = load(&spec)?;
            let dist = solve_spec(&spec, tol_base)?;
            print_json(&report::MetricsDoc::from(&compute_metrics(&dist, &tails)))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(e) | Failure::Run(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
