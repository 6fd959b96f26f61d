//! Experiment configuration as `key = value` lines.
//!
//! Command-line flags and config files share one parser: every flag is
//! applied through [`ExperimentConfig::set`], after the file.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pinvit_core::iterate::SolverKind;
use pinvit_core::problem::ProblemSpec;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondKind {
    /// `I − E` in transformed coordinates with `‖E‖ = γ`, seeded.
    Synthetic,
    Jacobi,
    Identity,
    Exact,
}

impl PrecondKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrecondKind::Synthetic => "synthetic",
            PrecondKind::Jacobi => "jacobi",
            PrecondKind::Identity => "identity",
            PrecondKind::Exact => "exact",
        }
    }
}

impl FromStr for PrecondKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "synthetic" => Ok(PrecondKind::Synthetic),
            "jacobi" => Ok(PrecondKind::Jacobi),
            "identity" => Ok(PrecondKind::Identity),
            "exact" => Ok(PrecondKind::Exact),
            other => Err(format!(
                "unknown preconditioner '{other}', expected synthetic, jacobi, identity or exact"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}', expected csv or json")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// Where the sharpness experiment places the level-set parameter `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TMode {
    T1,
    /// Log-spaced points in `[t₁/10, 10·t₁]`.
    Grid,
}

impl FromStr for TMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "t1" => Ok(TMode::T1),
            "grid" => Ok(TMode::Grid),
            other => Err(format!("unknown t mode '{other}', expected t1 or grid")),
        }
    }
}

impl fmt::Display for TMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TMode::T1 => "t1",
            TMode::Grid => "grid",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Option<ProblemSpec>,
    pub solver: SolverKind,
    pub precond: PrecondKind,
    pub gamma: f64,
    /// Quality to certify against instead of the preconditioner's own.
    pub declared_gamma: Option<f64>,
    pub seed: Option<u64>,
    pub max_steps: usize,
    pub residual_tol: f64,
    pub delta_tol: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub trials: usize,
    /// Dimension of the random diagonal pencils of `certify`.
    pub dim: usize,
    pub gammas: Vec<f64>,
    pub solvers: Vec<SolverKind>,
    pub mus: Vec<f64>,
    pub deltas: Vec<f64>,
    pub t_mode: TMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: None,
            solver: SolverKind::Psd,
            precond: PrecondKind::Synthetic,
            gamma: 0.5,
            declared_gamma: None,
            seed: None,
            max_steps: 500,
            residual_tol: 1e-10,
            delta_tol: None,
            output: None,
            format: OutputFormat::Csv,
            trials: 200,
            dim: 20,
            gammas: vec![0.0, 0.3, 0.6, 0.9],
            solvers: vec![SolverKind::Psd, SolverKind::Pinvit1],
            mus: vec![1.0, 0.5, 0.1],
            deltas: vec![1e-2, 1e-4, 1e-6, 1e-8],
            t_mode: TMode::T1,
        }
    }
}

pub const KEYS: [&str; 18] = [
    "problem",
    "solver",
    "precond",
    "gamma",
    "declared_gamma",
    "seed",
    "max_steps",
    "residual_tol",
    "delta_tol",
    "output",
    "format",
    "trials",
    "dim",
    "gammas",
    "solvers",
    "mus",
    "deltas",
    "t_mode",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value '{value}' for {key}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|t| parse(key, t.trim()))
        .collect()
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "problem" => self.problem = Some(value.parse().map_err(|e| format!("{e}"))?),
            "solver" => self.solver = value.parse().map_err(|e| format!("{e}"))?,
            "precond" => self.precond = value.parse()?,
            "gamma" => self.gamma = parse(key, value)?,
            "declared_gamma" => self.declared_gamma = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "max_steps" => self.max_steps = parse(key, value)?,
            "residual_tol" => self.residual_tol = parse(key, value)?,
            "delta_tol" => self.delta_tol = Some(parse(key, value)?),
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "trials" => self.trials = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "gammas" => self.gammas = parse_list(key, value)?,
            "solvers" => {
                self.solvers = value
                    .split(',')
                    .map(|s| s.parse().map_err(|e| format!("{e}")))
                    .collect::<Result<_, String>>()?
            }
            "mus" => self.mus = parse_list(key, value)?,
            "deltas" => self.deltas = parse_list(key, value)?,
            "t_mode" => self.t_mode = value.parse()?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_kv_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_str(&mut self, text: &str) -> Result<(), CliError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let config_err = |message: String| CliError::Config {
                line: idx + 1,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("expected key = value, got '{line}'")))?;
            self.set(k.trim(), v).map_err(config_err)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_kv_str(&text)
    }

    /// All set keys in [`KEYS`] order, unset optional keys omitted.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for key in KEYS {
            let value = match key {
                "problem" => self.problem.as_ref().map(|p| p.to_string()),
                "solver" => Some(self.solver.to_string()),
                "precond" => Some(self.precond.as_str().to_string()),
                "gamma" => Some(self.gamma.to_string()),
                "declared_gamma" => self.declared_gamma.map(|g| g.to_string()),
                "seed" => self.seed.map(|s| s.to_string()),
                "max_steps" => Some(self.max_steps.to_string()),
                "residual_tol" => Some(self.residual_tol.to_string()),
                "delta_tol" => self.delta_tol.map(|d| d.to_string()),
                "output" => self.output.as_ref().map(|p| p.display().to_string()),
                "format" => Some(self.format.to_string()),
                "trials" => Some(self.trials.to_string()),
                "dim" => Some(self.dim.to_string()),
                "gammas" => Some(join(&self.gammas)),
                "solvers" => Some(join(&self.solvers)),
                "mus" => Some(join(&self.mus)),
                "deltas" => Some(join(&self.deltas)),
                "t_mode" => Some(self.t_mode.to_string()),
                _ => unreachable!("every key is listed"),
            };
            if let Some(v) = value {
                out.push((key, v));
            }
        }
        out
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("{what} is randomized and needs --seed")))
    }
}
