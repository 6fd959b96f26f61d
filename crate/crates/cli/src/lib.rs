//! Experiment harness behind the `pinvit` binary.
//!
//! Exit codes: 0 converged (or all checks held), 1 usage, parse or I/O
//! failure, 2 stopped at `max_steps`, 3 certification violation.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use config::ExperimentConfig;
use report::ExperimentReport;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Core(#[from] pinvit_core::error::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    Failure,
    MaxSteps,
    Violation,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Converged => 0,
            Status::Failure => 1,
            Status::MaxSteps => 2,
            Status::Violation => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pinvit", version, about = "Preconditioned gradient eigensolvers with bound certification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solver and write per-step records.
    Solve(SolveArgs),
    /// Seeded certification sweep over solvers and a γ grid.
    Certify(CertifyArgs),
    /// Worst-case instances approaching the steepest-descent bound.
    Sharpness(SharpnessArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `key = value` file applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Record file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct StopArgs {
    #[arg(long)]
    pub max_steps: Option<String>,
    #[arg(long)]
    pub residual_tol: Option<String>,
    #[arg(long)]
    pub delta_tol: Option<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub stop: StopArgs,
    /// diagonal:1,2,4 | laplacian1d:N[:fem][:h=H] | laplacian2d:NXxNY[:fem][:h=H] | mtx:A.mtx[,B.mtx]
    #[arg(long)]
    pub problem: Option<String>,
    /// invit1, pinvit1, invit2 or psd.
    #[arg(long)]
    pub solver: Option<String>,
    /// synthetic, jacobi, identity or exact.
    #[arg(long)]
    pub precond: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Certify against this γ instead of the preconditioner's measured or
    /// constructed quality.
    #[arg(long)]
    pub declared_gamma: Option<String>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Fixed known-spectrum problem; random diagonal pencils when absent.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    /// Comma-separated γ grid.
    #[arg(long)]
    pub gammas: Option<String>,
    /// Comma-separated solver kinds.
    #[arg(long)]
    pub solvers: Option<String>,
    /// Certify against this γ instead of each preconditioner's own.
    #[arg(long)]
    pub declared_gamma: Option<String>,
}

#[derive(Debug, Args)]
pub struct SharpnessArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Three strictly decreasing μ values.
    #[arg(long)]
    pub mus: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Comma-separated Δ values.
    #[arg(long)]
    pub deltas: Option<String>,
    /// t1 or grid.
    #[arg(long)]
    pub t_mode: Option<String>,
}

fn common_pairs(c: &CommonArgs) -> Vec<(&'static str, &Option<String>)> {
    vec![("seed", &c.seed), ("output", &c.output), ("format", &c.format)]
}

fn stop_pairs(s: &StopArgs) -> Vec<(&'static str, &Option<String>)> {
    vec![
        ("max_steps", &s.max_steps),
        ("residual_tol", &s.residual_tol),
        ("delta_tol", &s.delta_tol),
    ]
}

/// Loads the config file of `common`, then applies the flags over it.
fn resolve(common: &CommonArgs, pairs: Vec<(&'static str, &Option<String>)>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|m| CliError::Usage(format!("--{}: {m}", key.replace('_', "-"))))?;
        }
    }
    Ok(cfg)
}

impl Command {
    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        match self {
            Command::Solve(a) => {
                let mut pairs = common_pairs(&a.common);
                pairs.extend(stop_pairs(&a.stop));
                pairs.extend([
                    ("problem", &a.problem),
                    ("solver", &a.solver),
                    ("precond", &a.precond),
                    ("gamma", &a.gamma),
                    ("declared_gamma", &a.declared_gamma),
                ]);
                resolve(&a.common, pairs)
            }
            Command::Certify(a) => {
                let mut pairs = common_pairs(&a.common);
                pairs.extend(stop_pairs(&a.stop));
                pairs.extend([
                    ("problem", &a.problem),
                    ("trials", &a.trials),
                    ("dim", &a.dim),
                    ("gammas", &a.gammas),
                    ("solvers", &a.solvers),
                    ("declared_gamma", &a.declared_gamma),
                ]);
                resolve(&a.common, pairs)
            }
            Command::Sharpness(a) => {
                let mut pairs = common_pairs(&a.common);
                pairs.extend([
                    ("mus", &a.mus),
                    ("gamma", &a.gamma),
                    ("deltas", &a.deltas),
                    ("t_mode", &a.t_mode),
                ]);
                resolve(&a.common, pairs)
            }
        }
    }
}

fn emit<R: Serialize>(report: &ExperimentReport<R>, cfg: &ExperimentConfig, stderr: &mut dyn Write) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            report.write(cfg.format, BufWriter::new(f))?;
        }
        None => report.write(cfg.format, io::stdout().lock())?,
    }
    writeln!(stderr, "{}", report.summary_line())?;
    for note in &report.summary.notes {
        writeln!(stderr, "note: {note}")?;
    }
    Ok(())
}

/// Runs a parsed command; records go to the configured output, the summary
/// to `stderr`.
pub fn execute(command: &Command, stderr: &mut dyn Write) -> Result<Status, CliError> {
    let cfg = command.config()?;
    match command {
        Command::Solve(_) => {
            let (report, status) = commands::cmd_solve(&cfg)?;
            emit(&report, &cfg, stderr)?;
            Ok(status)
        }
        Command::Certify(_) => {
            let (report, status) = commands::cmd_certify(&cfg)?;
            emit(&report, &cfg, stderr)?;
            Ok(status)
        }
        Command::Sharpness(_) => {
            let (report, status) = commands::cmd_sharpness(&cfg)?;
            emit(&report, &cfg, stderr)?;
            Ok(status)
        }
    }
}

/// Parses `args` and runs; returns the process exit code. Parse errors map
/// to 1 so that 2 keeps its `max_steps` meaning.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Failure.code() } else { 0 };
        }
    };
    let mut stderr = io::stderr().lock();
    match execute(&cli.command, &mut stderr) {
        Ok(status) => status.code(),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            Status::Failure.code()
        }
    }
}
