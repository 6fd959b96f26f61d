use std::collections::BTreeSet;

use nalgebra::DVector;
use pinvit_core::bounds::bound_factors;
use pinvit_core::conelab::{t1, worst_case_instance, WorstCaseSetup};
use pinvit_core::iterate::{run, RunOutcome, SolverKind, StopCriteria, Termination};
use pinvit_core::linalg::random_gaussian_vector;
use pinvit_core::pencil::SymmetricPencil;
use pinvit_core::precond::{
    estimate_quality, jacobi_preconditioner, synthetic_gamma_preconditioner, PrecondQuality,
    Preconditioner, SyntheticMode,
};
use pinvit_core::problem::{generate_problem, random_log_uniform_spectrum, ProblemSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, PrecondKind, TMode};
use crate::report::{
    max_ratio_over_sigma_sq, ExperimentReport, SharpnessRow, StepRow, Summary, TrialRow, VerdictCounts,
};
use crate::{CliError, Status};

/// Quality of the synthetic preconditioner that the overscaled variant
/// starts from.
const OVERSCALE_BASE_GAMMA: f64 = 0.5;
const SHARPNESS_GRID: usize = 25;
/// Relative slack on `measured ≤ σ²` for sharpness rows.
const SHARPNESS_RTOL: f64 = 1e-9;

/// Builds the preconditioner of `cfg` for `pencil`.
///
/// `declared_gamma` replaces the quality used for certification.
/// A synthetic γ ≥ 1 yields a deliberately overscaled `T` with
/// `‖I − TA‖ = γ`: still s.p.d., so steepest descent remains certifiable,
/// but outside the fixed-step hypothesis.
pub fn build_preconditioner(
    cfg: &ExperimentConfig,
    pencil: &SymmetricPencil,
    gamma: f64,
    seed: Option<u64>,
) -> Result<Preconditioner, CliError> {
    let n = pencil.dim();
    let t = match cfg.precond {
        PrecondKind::Synthetic => {
            let seed = seed.ok_or_else(|| {
                CliError::Usage("the synthetic preconditioner is randomized and needs --seed".into())
            })?;
            if !(gamma >= 0.0 && gamma.is_finite()) {
                return Err(CliError::Usage(format!("γ must be nonnegative, got {gamma}")));
            }
            let form = pencil.diagonal_form();
            if gamma < 1.0 {
                synthetic_gamma_preconditioner(form, gamma, seed, SyntheticMode::Random)?
            } else {
                let base = synthetic_gamma_preconditioner(form, OVERSCALE_BASE_GAMMA, seed, SyntheticMode::Random)?;
                let q = estimate_quality(pencil, &base)?;
                let top = q.gamma2.expect("measured constants");
                let t = base.scaled((1.0 + gamma) / top)?;
                let q = estimate_quality(pencil, &t)?;
                t.with_quality(q)
            }
        }
        PrecondKind::Jacobi => jacobi_preconditioner(pencil)?,
        PrecondKind::Identity => {
            let t = Preconditioner::identity(n);
            let q = estimate_quality(pencil, &t)?;
            t.with_quality(q)
        }
        PrecondKind::Exact => Preconditioner::exact_inverse(pencil),
    };
    Ok(match cfg.declared_gamma {
        Some(g) => t.with_quality(PrecondQuality::from_gamma(g)?),
        None => t,
    })
}

fn stop_criteria(cfg: &ExperimentConfig) -> StopCriteria {
    StopCriteria {
        max_steps: cfg.max_steps,
        residual_tol: cfg.residual_tol,
        delta_tol: cfg.delta_tol,
    }
}

fn initial_vector(n: usize, seed: Option<u64>) -> DVector<f64> {
    match seed {
        Some(s) => random_gaussian_vector(n, &mut ChaCha8Rng::seed_from_u64(s)),
        None => DVector::from_element(n, 1.0),
    }
}

fn needs_precond(kind: SolverKind) -> bool {
    !kind.is_exact()
}

fn used_bound_factors(pencil: &SymmetricPencil, out: &RunOutcome) -> Vec<pinvit_core::bounds::BoundFactors> {
    let Some(gamma) = out.certified_gamma else {
        return Vec::new();
    };
    let intervals: BTreeSet<usize> = out
        .records
        .iter()
        .filter_map(|r| r.bound.as_ref().map(|b| b.interval_index))
        .collect();
    intervals
        .into_iter()
        .filter_map(|i| bound_factors(pencil.spectrum(), i, gamma).ok())
        .collect()
}

/// Runs one solver on the configured problem.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<(ExperimentReport<StepRow>, Status), CliError> {
    let spec = cfg
        .problem
        .as_ref()
        .ok_or_else(|| CliError::Usage("solve needs --problem".into()))?;
    let pencil = generate_problem(spec)?;
    let t = if needs_precond(cfg.solver) {
        Some(build_preconditioner(cfg, &pencil, cfg.gamma, cfg.seed)?)
    } else {
        None
    };
    let x0 = initial_vector(pencil.dim(), cfg.seed);
    let out = run(&pencil, t.as_ref(), &x0, cfg.solver, &stop_criteria(cfg))?;

    let rows = out.records.iter().map(StepRow::from).collect();
    let mut report = ExperimentReport::new("solve", cfg, rows);
    report.bound_factors = used_bound_factors(&pencil, &out);
    let verdicts = VerdictCounts::of_records(&out.records);
    let mut notes = Vec::new();
    let certification = if out.certified_gamma.is_some() {
        "certified"
    } else {
        notes.push(format!(
            "certification skipped: the preconditioner quality does not meet the {} hypothesis",
            if cfg.solver == SolverKind::Pinvit1 {
                "‖I − TA‖ < 1"
            } else {
                "spectral equivalence"
            }
        ));
        "skipped"
    };
    report.summary = Summary {
        runs: 1,
        steps: out.records.len() - 1,
        final_rho: Some(out.last().rho.rho),
        termination: Some(out.termination.as_str()),
        max_ratio_over_sigma_sq: max_ratio_over_sigma_sq(&out.records),
        verdicts,
        certification,
        notes,
    };
    let status = if verdicts.violated > 0 {
        Status::Violation
    } else if out.termination == Termination::MaxSteps {
        Status::MaxSteps
    } else {
        Status::Converged
    };
    Ok((report, status))
}

/// Eigenvalues of trial `trial`: the configured problem's, or a fresh
/// log-uniform spectrum in `[1, 10³]`.
fn certify_pencil(cfg: &ExperimentConfig, trial_seed: u64) -> Result<(SymmetricPencil, ChaCha8Rng), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let pencil = match &cfg.problem {
        None => {
            let lambdas = random_log_uniform_spectrum(cfg.dim, 1.0, 1e3, &mut rng);
            SymmetricPencil::from_diagonal(&lambdas)?
        }
        Some(ProblemSpec::MatrixMarket { .. }) => {
            return Err(CliError::Usage(
                "certify needs a problem with a known spectrum (diagonal or Laplacian)".into(),
            ))
        }
        Some(spec) => generate_problem(spec)?,
    };
    Ok((pencil, rng))
}

/// Seeded trials over solvers × γ grid; per-trial seeds are `seed + trial`.
pub fn cmd_certify(cfg: &ExperimentConfig) -> Result<(ExperimentReport<TrialRow>, Status), CliError> {
    let seed = cfg.require_seed("certify")?;
    if cfg.trials == 0 || cfg.gammas.is_empty() || cfg.solvers.is_empty() {
        return Err(CliError::Usage("certify needs trials, gammas and solvers".into()));
    }
    if cfg.problem.is_none() && cfg.dim < 3 {
        return Err(CliError::Usage("certify needs dim ≥ 3".into()));
    }
    let stop = stop_criteria(cfg);
    let jobs: Vec<(usize, SolverKind, f64)> = (0..cfg.trials)
        .flat_map(|trial| {
            cfg.solvers
                .iter()
                .flat_map(move |&k| cfg.gammas.iter().map(move |&g| (trial, k, g)))
        })
        .collect();
    let results: Vec<Result<(TrialRow, VerdictCounts, Option<f64>), CliError>> = jobs
        .par_iter()
        .map(|&(trial, kind, gamma)| {
            let trial_seed = seed.wrapping_add(trial as u64);
            let (pencil, mut rng) = certify_pencil(cfg, trial_seed)?;
            let x0 = random_gaussian_vector(pencil.dim(), &mut rng);
            let t = if needs_precond(kind) {
                Some(build_preconditioner(cfg, &pencil, gamma, Some(trial_seed))?)
            } else {
                None
            };
            let out = run(&pencil, t.as_ref(), &x0, kind, &stop)?;
            let counts = VerdictCounts::of_records(&out.records);
            let m = max_ratio_over_sigma_sq(&out.records);
            let row = TrialRow {
                trial,
                solver: kind.as_str(),
                gamma,
                n: pencil.dim(),
                steps: out.records.len() - 1,
                termination: out.termination.as_str(),
                certification: if out.certified_gamma.is_some() { "certified" } else { "skipped" },
                holds: counts.holds,
                passed_lambda_i: counts.passed_lambda_i,
                violated: counts.violated,
                uncertified: counts.uncertified,
                max_ratio_over_sigma_sq: m,
                final_rho: out.last().rho.rho,
                lambda1: pencil.spectrum().lambdas()[0],
            };
            Ok((row, counts, m))
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut summary = Summary::default();
    let mut skipped = 0;
    for r in results {
        let (row, counts, m) = r?;
        summary.runs += 1;
        summary.steps += row.steps;
        summary.verdicts.add(&counts);
        if let Some(m) = m {
            summary.max_ratio_over_sigma_sq = Some(summary.max_ratio_over_sigma_sq.map_or(m, |a| a.max(m)));
        }
        if row.certification == "skipped" {
            skipped += 1;
        }
        rows.push(row);
    }
    summary.certification = match skipped {
        0 => "certified",
        s if s == summary.runs => "skipped",
        _ => "partial",
    };
    if skipped > 0 {
        summary.notes.push(format!(
            "{skipped} run(s) skipped certification: preconditioner quality mismatch (‖I − TA‖ ≥ 1 for the fixed step)"
        ));
    }
    let status = if summary.verdicts.violated > 0 {
        Status::Violation
    } else {
        Status::Converged
    };
    let mut report = ExperimentReport::new("certify", cfg, rows);
    report.summary = summary;
    Ok((report, status))
}

/// Worst-case instances across the Δ list; γ = 0 reproduces the
/// exact-inverse factor `κ/(2−κ)`.
pub fn cmd_sharpness(cfg: &ExperimentConfig) -> Result<(ExperimentReport<SharpnessRow>, Status), CliError> {
    let mus: [f64; 3] = cfg
        .mus
        .as_slice()
        .try_into()
        .map_err(|_| CliError::Usage(format!("sharpness needs exactly 3 μ values, got {}", cfg.mus.len())))?;
    if !(mus[0] > mus[1] && mus[1] > mus[2] && mus[2] > 0.0) {
        return Err(CliError::Usage(format!("μ values must be strictly decreasing and positive, got {mus:?}")));
    }
    if !(0.0..1.0).contains(&cfg.gamma) {
        return Err(CliError::Usage(format!("sharpness needs γ in [0, 1), got {}", cfg.gamma)));
    }
    if cfg.deltas.is_empty() {
        return Err(CliError::Usage("sharpness needs at least one Δ".into()));
    }
    let kappa = (mus[1] - mus[2]) / (mus[0] - mus[2]);
    let t_star = t1(kappa, cfg.gamma)?;
    let ts: Vec<f64> = match cfg.t_mode {
        TMode::T1 => vec![t_star],
        TMode::Grid => (0..SHARPNESS_GRID)
            .map(|k| t_star * 10f64.powf(-1.0 + 2.0 * k as f64 / (SHARPNESS_GRID - 1) as f64))
            .collect(),
    };
    let mut rows = Vec::new();
    let mut summary = Summary {
        certification: "certified",
        ..Summary::default()
    };
    for &delta in &cfg.deltas {
        for &t in &ts {
            let setup = WorstCaseSetup::new(mus, cfg.gamma, delta, t)?;
            let inst = worst_case_instance(&setup)?;
            let gap = inst.predicted_ratio - inst.measured_ratio;
            if inst.measured_ratio > inst.predicted_ratio * (1.0 + SHARPNESS_RTOL) {
                summary.verdicts.violated += 1;
            } else {
                summary.verdicts.holds += 1;
            }
            let r = inst.measured_ratio / inst.predicted_ratio;
            summary.max_ratio_over_sigma_sq = Some(summary.max_ratio_over_sigma_sq.map_or(r, |a| a.max(r)));
            rows.push(SharpnessRow {
                delta,
                t,
                measured_ratio: inst.measured_ratio,
                sigma_sq: inst.predicted_ratio,
                gap,
                relative_gap: gap / inst.predicted_ratio,
            });
        }
    }
    summary.runs = rows.len();
    if cfg.gamma == 0.0 {
        summary
            .notes
            .push(format!("γ = 0: σ² is the exact-inverse factor (κ/(2−κ))² with κ = {kappa}"));
    }
    let status = if summary.verdicts.violated > 0 {
        Status::Violation
    } else {
        Status::Converged
    };
    let mut report = ExperimentReport::new("sharpness", cfg, rows);
    report.summary = summary;
    Ok((report, status))
}
