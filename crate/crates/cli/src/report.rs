use std::collections::BTreeMap;
use std::io::Write;

use pinvit_core::bounds::{BoundFactors, Verdict};
use pinvit_core::iterate::IterationRecord;
use serde::Serialize;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::CliError;

/// One solver step; the CSV columns of `solve`.
#[derive(Debug, Clone, Serialize)]
pub struct StepRow {
    pub step: usize,
    pub rho: f64,
    pub mu: f64,
    pub residual_norm: f64,
    pub delta: Option<f64>,
    pub ratio: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub verdict: Option<&'static str>,
}

impl From<&IterationRecord> for StepRow {
    fn from(r: &IterationRecord) -> Self {
        let b = r.bound.as_ref();
        StepRow {
            step: r.step_index,
            rho: r.rho.rho,
            mu: r.rho.mu,
            residual_norm: r.residual_norm,
            delta: r.delta,
            ratio: b.map(|b| b.ratio),
            sigma_sq: b.map(|b| b.sigma_squared),
            verdict: if r.monotonicity_violated {
                Some(Verdict::Violated.as_str())
            } else {
                b.map(|b| b.verdict.as_str())
            },
        }
    }
}

/// One certified run of `certify`.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub solver: &'static str,
    pub gamma: f64,
    pub n: usize,
    pub steps: usize,
    pub termination: &'static str,
    pub certification: &'static str,
    pub holds: usize,
    pub passed_lambda_i: usize,
    pub violated: usize,
    pub uncertified: usize,
    pub max_ratio_over_sigma_sq: Option<f64>,
    pub final_rho: f64,
    pub lambda1: f64,
}

/// One worst-case instance of `sharpness`.
#[derive(Debug, Clone, Serialize)]
pub struct SharpnessRow {
    pub delta: f64,
    pub t: f64,
    pub measured_ratio: f64,
    pub sigma_sq: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VerdictCounts {
    pub holds: usize,
    pub passed_lambda_i: usize,
    pub violated: usize,
    pub uncertified: usize,
}

impl VerdictCounts {
    /// Counts the certified steps of a run, skipping the initial record.
    pub fn of_records(records: &[IterationRecord]) -> Self {
        let mut c = VerdictCounts::default();
        for r in records.iter().skip(1) {
            match (&r.bound, r.monotonicity_violated) {
                (_, true) => c.violated += 1,
                (None, false) => c.uncertified += 1,
                (Some(b), false) => match b.verdict {
                    Verdict::Holds => c.holds += 1,
                    Verdict::PassedLambdaI => c.passed_lambda_i += 1,
                    Verdict::Violated => c.violated += 1,
                },
            }
        }
        c
    }

    pub fn add(&mut self, other: &VerdictCounts) {
        self.holds += other.holds;
        self.passed_lambda_i += other.passed_lambda_i;
        self.violated += other.violated;
        self.uncertified += other.uncertified;
    }
}

/// Largest `ratio/σ²` over steps where the bound was checked and held.
pub fn max_ratio_over_sigma_sq(records: &[IterationRecord]) -> Option<f64> {
    records
        .iter()
        .filter_map(|r| r.bound.as_ref())
        .filter(|b| b.verdict == Verdict::Holds && b.sigma_squared > 0.0)
        .map(|b| b.ratio / b.sigma_squared)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub steps: usize,
    pub final_rho: Option<f64>,
    pub termination: Option<&'static str>,
    pub max_ratio_over_sigma_sq: Option<f64>,
    pub verdicts: VerdictCounts,
    /// `certified`, `skipped`, `partial` or `n/a`.
    pub certification: &'static str,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport<R> {
    pub command: &'static str,
    pub config: BTreeMap<&'static str, String>,
    pub records: Vec<R>,
    pub bound_factors: Vec<BoundFactors>,
    pub summary: Summary,
}

impl<R: Serialize> ExperimentReport<R> {
    pub fn new(command: &'static str, config: &ExperimentConfig, records: Vec<R>) -> Self {
        ExperimentReport {
            command,
            config: config.entries().into_iter().collect(),
            records,
            bound_factors: Vec::new(),
            summary: Summary::default(),
        }
    }

    /// Writes the records as CSV, or the whole report as JSON.
    pub fn write<W: Write>(&self, format: OutputFormat, mut w: W) -> Result<(), CliError> {
        match format {
            OutputFormat::Csv => {
                let mut out = csv::Writer::from_writer(w);
                for r in &self.records {
                    out.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
                }
                out.flush()?;
            }
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut w, self).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        let s = &self.summary;
        let mut line = format!(
            "{}: {} run(s), {} step(s); verdicts holds={} passed_lambda_i={} violated={} uncertified={}; certification {}",
            self.command,
            s.runs,
            s.steps,
            s.verdicts.holds,
            s.verdicts.passed_lambda_i,
            s.verdicts.violated,
            s.verdicts.uncertified,
            s.certification
        );
        if let Some(m) = s.max_ratio_over_sigma_sq {
            line.push_str(&format!("; max ratio/σ² {m:.6}"));
        }
        if let Some(rho) = s.final_rho {
            line.push_str(&format!("; final ρ {rho:.12e}"));
        }
        if let Some(t) = s.termination {
            line.push_str(&format!("; stopped by {t}"));
        }
        line
    }
}
