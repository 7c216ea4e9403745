//! `wco`: analysis, oracle comparison, invariant subspaces, tree shifts,
//! the Gaussian example, built-in demos and the fuzzer.

mod demo;
mod output;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use thiserror::Error;
use wco_core::analysis::{self, GaussParams};
use wco_core::battery::{run_fuzz, Mutation};
use wco_core::gaussian_example::DEFAULT_BOX;
use wco_core::generate::MAX_ATOMS_LIMIT;
use wco_core::invariant_subspaces::aluthge_domain_gap;
use wco_core::matrix_oracle::to_matrix;
use wco_core::tree_shifts::TreeShift;
use wco_core::{WcoError, WcoSystem};

use crate::demo::DemoName;
use crate::output::{emit, emit_growth, Format};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] WcoError),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Input(String),
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
    #[error("writing output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("writing output: {0}")]
    Csv(#[from] csv::Error),
}

/// What a command asks the process to report.
enum Status {
    Ok,
    /// A fuzz run found a disagreement.
    Failures,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive finite number, got {s}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "wco", version, about = "Weakly centered weighted composition operators on finite measure spaces")]
struct Cli {
    /// Comparison tolerance (relative, > 0).
    #[arg(long, global = true, default_value_t = 1e-9, value_parser = positive)]
    tol: f64,

    /// Print JSON instead of text tables.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for generated systems and sample points.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Largest generated system size.
    #[arg(long, global = true, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..=MAX_ATOMS_LIMIT as u64))]
    max_atoms: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MutationArg {
    None,
    /// Negate h at its largest value before the closed-form checks.
    NegateH,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Densities, weight tables and every property verdict of a system file.
    Analyze { file: PathBuf },
    /// Matrix oracle metrics and closed-form agreement for a system file.
    Oracle {
        file: PathBuf,
        /// Print the operator matrix (row-major [re, im] pairs) and nothing else.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Invariant subspace search and verification for a system file.
    Invariant { file: PathBuf },
    /// Weak-centeredness criteria for a weighted shift on a tree file.
    Tree {
        file: PathBuf,
        /// Skip sibling groups that contain truncated vertices.
        #[arg(long)]
        interior_only: bool,
    },
    /// The Gaussian-density composition operator with φ = αI on ℝⁿ.
    Gauss {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Series coefficients of ρ, constant term first.
        #[arg(long, value_delimiter = ',', default_value = "1,1", allow_hyphen_values = true)]
        coeffs: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Treat the coefficients as the truncation of a non-polynomial series.
        #[arg(long)]
        non_polynomial: bool,
        /// Half width of the sampling box.
        #[arg(long, default_value_t = DEFAULT_BOX, value_parser = positive)]
        half_width: f64,
    },
    /// Growth table of the Aluthge domain gap on the shifted window (CSV).
    Rudy {
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
    /// Build a named example and run its analysis.
    Demo {
        name: DemoName,
        /// Weight on the distinguished vertex of `blackblack`.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        alpha: f64,
    },
    /// Random systems checked closed form against matrix oracle.
    Fuzz {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, value_enum, default_value_t = MutationArg::None)]
        mutation: MutationArg,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.into(), source })
}

fn read_system(path: &Path) -> Result<WcoSystem, CliError> {
    let sys: WcoSystem = read_json(path)?;
    if sys.len() > MAX_ATOMS_LIMIT {
        return Err(CliError::Input(format!("{} atoms exceed the oracle limit of {MAX_ATOMS_LIMIT}", sys.len())));
    }
    Ok(sys)
}

fn run(cli: Cli, out: &mut impl Write) -> Result<Status, CliError> {
    let format = if cli.json { Format::Json } else { Format::Table };
    let tol = cli.tol;
    match cli.command {
        Command::Analyze { file } => emit(out, format, &analysis::analyze(&read_system(&file)?, tol)?)?,
        Command::Oracle { file, dump_matrix } => {
            let sys = read_system(&file)?;
            if dump_matrix {
                serde_json::to_writer(&mut *out, &to_matrix(&sys))?;
                writeln!(out)?;
            } else {
                emit(out, format, &analysis::oracle(&sys, tol)?)?;
            }
        }
        Command::Invariant { file } => emit(out, format, &analysis::invariant(&read_system(&file)?, tol)?)?,
        Command::Tree { file, interior_only } => {
            let shift: TreeShift = read_json(&file)?;
            emit(out, format, &analysis::analyze_tree(&shift, interior_only, tol))?;
        }
        Command::Gauss { alpha, coeffs, dim, samples, non_polynomial, half_width } => {
            let params = GaussParams {
                alpha,
                coefficients: coeffs,
                is_polynomial: !non_polynomial,
                dim,
                samples,
                seed: cli.seed,
                half_width,
            };
            emit(out, format, &analysis::gauss(&params)?)?;
        }
        Command::Rudy { n } => emit_growth(out, format, &aluthge_domain_gap(n)?)?,
        Command::Demo { name, alpha } => emit(out, format, &demo::run(name, alpha, cli.seed, tol)?)?,
        Command::Fuzz { count, mutation } => {
            let mutation = match mutation {
                MutationArg::None => Mutation::None,
                MutationArg::NegateH => Mutation::NegateHAtArgmax,
            };
            let summary = run_fuzz(count, cli.seed, cli.max_atoms as usize, tol, mutation)?;
            emit(out, format, &output::FuzzView(&summary))?;
            if !summary.passed() {
                return Ok(Status::Failures);
            }
        }
    }
    Ok(Status::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failures) => ExitCode::from(1),
        // a closed pipe (e.g. `| head`) is the reader's choice, not an error
        Err(CliError::Output(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(CliError::Json(e)) if e.io_error_kind() == Some(io::ErrorKind::BrokenPipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
