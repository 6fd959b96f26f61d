//! The four gradient-type iterations and a stepping driver.
//!
//! Single steps work on any pencil. [`run`] moves to the diagonal form
//! `(I, diag μ)` first, so that Δ and the per-step certification can be read
//! off the eigenbasis weights of the iterate without cancellation.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bounds::{certify_weights, BoundCheck, EigenWeights, MONOTONE_RTOL};
use crate::error::{domain, Error, Result};
use crate::pencil::{rayleigh, rayleigh_ritz, residual, RayleighValue, ResidualForm, SymmetricPencil};
use crate::precond::Preconditioner;

/// A fixed-step iterate counts as an eigenvector once `‖r‖ < CONVERGED_RTOL·‖Ax‖`.
pub const CONVERGED_RTOL: f64 = 1e-13;
/// The search direction is degenerate once `‖Tr‖ < DEGENERATE_RTOL·‖x‖`.
pub const DEGENERATE_RTOL: f64 = 1e-14;
/// Below this `|c_x|` the optimal step length is reported as infinite.
pub const STEP_COORD_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Invit1,
    Pinvit1,
    Invit2,
    Psd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Invit1,
        SolverKind::Pinvit1,
        SolverKind::Invit2,
        SolverKind::Psd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Invit1 => "invit1",
            SolverKind::Pinvit1 => "pinvit1",
            SolverKind::Invit2 => "invit2",
            SolverKind::Psd => "psd",
        }
    }

    /// Whether the kind uses the exact inverse instead of a preconditioner.
    pub fn is_exact(&self) -> bool {
        matches!(self, SolverKind::Invit1 | SolverKind::Invit2)
    }

    /// Whether the kind optimizes the step length by Rayleigh–Ritz.
    pub fn is_steepest_descent(&self) -> bool {
        matches!(self, SolverKind::Invit2 | SolverKind::Psd)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "invit1" => Ok(SolverKind::Invit1),
            "pinvit1" => Ok(SolverKind::Pinvit1),
            "invit2" => Ok(SolverKind::Invit2),
            "psd" | "pinvit2" => Ok(SolverKind::Psd),
            other => Err(domain(format!(
                "unknown solver '{other}', expected invit1, pinvit1, invit2 or psd"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Advanced,
    /// Zero residual; the input is returned unchanged.
    Converged,
    /// The search direction is parallel to `x` or vanishes; the input is
    /// returned unchanged.
    Stationary,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub x: DVector<f64>,
    pub rho: RayleighValue,
    pub status: StepStatus,
}

#[derive(Debug, Clone)]
pub struct PsdStep {
    pub x: DVector<f64>,
    pub rho: RayleighValue,
    /// `ϑ` with `x′ ∝ x − ϑ·Tr`; infinite when `x′` has no `x` component.
    pub theta_opt: f64,
    pub status: StepStatus,
}

fn is_zero_residual(pencil: &SymmetricPencil, x: &DVector<f64>, r: &DVector<f64>) -> bool {
    r.norm() < CONVERGED_RTOL * (pencil.a() * x).norm()
}

fn fixed_step(
    pencil: &SymmetricPencil,
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
) -> Result<Step> {
    let rho = rayleigh(pencil, x)?;
    let r = residual(pencil, x, rho, ResidualForm::Lambda)?;
    if is_zero_residual(pencil, x, &r) {
        return Ok(Step {
            x: x.clone(),
            rho,
            status: StepStatus::Converged,
        });
    }
    let next = x - apply(&r);
    let norm = next.norm();
    if !norm.is_finite() {
        return Err(Error::Numeric(format!("iterate norm is {norm}")));
    }
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let next = next / norm;
    let rho = rayleigh(pencil, &next)?;
    Ok(Step {
        x: next,
        rho,
        status: StepStatus::Advanced,
    })
}

/// `x′ = x − T(Ax − ρ(x)Bx)`, normalized.
pub fn pinvit1_step(pencil: &SymmetricPencil, t: &Preconditioner, x: &DVector<f64>) -> Result<Step> {
    check_precond(pencil, t)?;
    fixed_step(pencil, |r| t.apply(r), x)
}

/// [`pinvit1_step`] with `T = A⁻¹`, applied through the generalized
/// eigenvectors.
pub fn invit1_step(pencil: &SymmetricPencil, x: &DVector<f64>) -> Result<Step> {
    let z = &pencil.diagonal_form().inverse_basis;
    fixed_step(pencil, |r| z * (z.transpose() * r), x)
}

/// Rayleigh–Ritz on `span{x, T(Ax − ρ(x)Bx)}`, keeping the smaller λ-form
/// Ritz value.
pub fn psd_step(pencil: &SymmetricPencil, t: &Preconditioner, x: &DVector<f64>) -> Result<PsdStep> {
    check_precond(pencil, t)?;
    psd_with(pencil, |r| t.apply(r), x)
}

/// [`psd_step`] with `T = A⁻¹`.
pub fn invit2_step(pencil: &SymmetricPencil, x: &DVector<f64>) -> Result<PsdStep> {
    let t = Preconditioner::exact_inverse(pencil);
    psd_step(pencil, &t, x)
}

fn psd_with(
    pencil: &SymmetricPencil,
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
) -> Result<PsdStep> {
    let rho = rayleigh(pencil, x)?;
    let r = residual(pencil, x, rho, ResidualForm::Lambda)?;
    let unchanged = |status| PsdStep {
        x: x.clone(),
        rho,
        theta_opt: 0.0,
        status,
    };
    if is_zero_residual(pencil, x, &r) {
        return Ok(unchanged(StepStatus::Converged));
    }
    let d = apply(&r);
    if !d.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("preconditioned residual is not finite".into()));
    }
    if d.norm() < DEGENERATE_RTOL * x.norm() {
        return Ok(unchanged(StepStatus::Stationary));
    }
    let pairs = match rayleigh_ritz(pencil, &[x.clone(), d]) {
        Ok(p) => p,
        Err(Error::DegenerateSubspace { .. }) => return Ok(unchanged(StepStatus::Stationary)),
        Err(e) => return Err(e),
    };
    let best = &pairs[0];
    let (mut cx, mut cd) = (best.coefficients[0], best.coefficients[1]);
    let mut v = best.vector.clone();
    // first nonzero coordinate in the [x, d] basis is positive
    let flip = if cx.abs() >= STEP_COORD_TOL { cx < 0.0 } else { cd < 0.0 };
    if flip {
        cx = -cx;
        cd = -cd;
        v = -v;
    }
    let theta_opt = if cx.abs() < STEP_COORD_TOL {
        f64::INFINITY
    } else {
        -cd / cx
    };
    let rho_next = rayleigh(pencil, &v)?;
    Ok(PsdStep {
        x: v,
        rho: rho_next,
        theta_opt,
        status: StepStatus::Advanced,
    })
}

fn check_precond(pencil: &SymmetricPencil, t: &Preconditioner) -> Result<()> {
    if t.dim() != pencil.dim() {
        return Err(Error::DimensionMismatch {
            expected: pencil.dim(),
            got: t.dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub max_steps: usize,
    /// Relative to `‖Ax‖`.
    pub residual_tol: f64,
    pub delta_tol: Option<f64>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            max_steps: 500,
            residual_tol: 1e-10,
            delta_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Residual,
    Delta,
    MaxSteps,
    Stationary,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Residual => "residual",
            Termination::Delta => "delta",
            Termination::MaxSteps => "max_steps",
            Termination::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub step_index: usize,
    /// Unit Euclidean norm, original coordinates.
    pub x: Vec<f64>,
    pub rho: RayleighValue,
    /// `‖Ax − ρBx‖`.
    pub residual_norm: f64,
    /// λ-form `Δᵢ,ᵢ₊₁(ρ)` on the interval bracketing `ρ`.
    pub delta: Option<f64>,
    /// Certification of the step that produced this record.
    pub bound: Option<BoundCheck>,
    /// `ρ` rose relative to the previous record for a kind that guarantees
    /// monotone decrease.
    pub monotonicity_violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub kind: SolverKind,
    /// γ used for certification, if the step was certified.
    pub certified_gamma: Option<f64>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl RunOutcome {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("step 0 is always recorded")
    }

    pub fn violations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| {
                r.monotonicity_violated
                    || r.bound
                        .as_ref()
                        .is_some_and(|b| b.verdict == crate::bounds::Verdict::Violated)
            })
            .count()
    }
}

/// The γ certified for `kind` with preconditioner `t`: the scale-free γ for
/// steepest descent, the `‖I − TA‖` bound for the fixed step, 0 for the
/// exact-inverse kinds. `None` when the preconditioner carries no usable
/// quality.
pub fn certification_gamma(kind: SolverKind, t: Option<&Preconditioner>) -> Option<f64> {
    match kind {
        SolverKind::Invit1 | SolverKind::Invit2 => Some(0.0),
        SolverKind::Psd => t?.quality().scaled_gamma().filter(|g| *g < 1.0),
        SolverKind::Pinvit1 => t?.quality().fixed_step_gamma(),
    }
}

/// Iterates `kind` from `x0` until one of `stop` fires.
///
/// `precond` is required for PINVIT(1) and PSD and ignored for the INVIT
/// kinds. Every step is certified against the pencil's spectrum when
/// [`certification_gamma`] yields a value.
pub fn run(
    pencil: &SymmetricPencil,
    precond: Option<&Preconditioner>,
    x0: &DVector<f64>,
    kind: SolverKind,
    stop: &StopCriteria,
) -> Result<RunOutcome> {
    if x0.len() != pencil.dim() {
        return Err(Error::DimensionMismatch {
            expected: pencil.dim(),
            got: x0.len(),
        });
    }
    let form = pencil.diagonal_form();
    let n = pencil.dim();
    let spectrum = form.spectrum();
    let transformed = form.transformed_pencil();
    let t_tilde = if kind.is_exact() {
        Preconditioner::identity(n)
    } else {
        let t = precond.ok_or_else(|| domain(format!("{kind} needs a preconditioner")))?;
        check_precond(pencil, t)?;
        Preconditioner::from_matrix(form.transform_operator(t.matrix()), *t.quality())?
    };
    let gamma = certification_gamma(kind, precond);
    let guarantees_monotone = kind != SolverKind::Pinvit1 || gamma.is_some();

    let mut y = form.to_transformed(x0);
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if !y_norm.is_finite() {
        return Err(Error::Numeric("initial vector is not finite".into()));
    }
    y /= y_norm;

    let record = |step_index: usize, y: &DVector<f64>, bound: Option<BoundCheck>, violated: bool| -> Result<IterationRecord> {
        let x = form.to_original(y);
        let x = &x / x.norm();
        let rho = rayleigh(pencil, &x)?;
        let residual_norm = residual(pencil, &x, rho, ResidualForm::Lambda)?.norm();
        let weights: Vec<f64> = y.iter().map(|v| v * v).collect();
        let w = EigenWeights { weights: &weights };
        let delta = w.bracket(spectrum).map(|i| {
            w.delta_mu(spectrum, i) * spectrum.mus()[i + 1] / spectrum.mus()[i]
        });
        Ok(IterationRecord {
            step_index,
            x: x.iter().copied().collect(),
            rho,
            residual_norm,
            delta,
            bound,
            monotonicity_violated: violated,
        })
    };
    let converged = |rec: &IterationRecord| -> bool {
        let x = DVector::from_column_slice(&rec.x);
        rec.residual_norm < stop.residual_tol * (pencil.a() * x).norm()
    };

    let mut records = vec![record(0, &y, None, false)?];
    let mut termination = Termination::MaxSteps;
    for step in 1..=stop.max_steps {
        let prev = records.last().expect("nonempty");
        if converged(prev) {
            termination = Termination::Residual;
            break;
        }
        if let (Some(tol), Some(d)) = (stop.delta_tol, prev.delta) {
            if d < tol {
                termination = Termination::Delta;
                break;
            }
        }
        let (y_next, status) = match kind {
            SolverKind::Invit1 | SolverKind::Pinvit1 => {
                let s = pinvit1_step(&transformed, &t_tilde, &y)?;
                (s.x, s.status)
            }
            SolverKind::Invit2 | SolverKind::Psd => {
                let s = psd_step(&transformed, &t_tilde, &y)?;
                (s.x, s.status)
            }
        };
        if status != StepStatus::Advanced {
            termination = if status == StepStatus::Converged {
                Termination::Residual
            } else {
                Termination::Stationary
            };
            break;
        }
        if !y_next.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite iterate at step {step}")));
        }
        let w_before: Vec<f64> = y.iter().map(|v| v * v).collect();
        let w_after: Vec<f64> = y_next.iter().map(|v| v * v).collect();
        let bound = match gamma {
            Some(g) => match certify_weights(
                spectrum,
                kind,
                g,
                &EigenWeights { weights: &w_before },
                &EigenWeights { weights: &w_after },
            ) {
                Ok(b) => Some(b),
                // iterate sits at λₙ: no interval to certify
                Err(Error::Interval { .. }) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        let prev_rho = prev.rho.rho;
        let rec = record(step, &y_next, bound, false)?;
        let violated = guarantees_monotone && rec.rho.rho > prev_rho * (1.0 + MONOTONE_RTOL);
        records.push(IterationRecord {
            monotonicity_violated: violated,
            ..rec
        });
        y = y_next;
    }
    // the last pushed record may already satisfy a criterion
    if termination == Termination::MaxSteps {
        let last = records.last().expect("nonempty");
        if converged(last) {
            termination = Termination::Residual;
        } else if let (Some(tol), Some(d)) = (stop.delta_tol, last.delta) {
            if d < tol {
                termination = Termination::Delta;
            }
        }
    }
    Ok(RunOutcome {
        kind,
        certified_gamma: gamma,
        records,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn pinvit1_hand_example() {
        let p = SymmetricPencil::from_diagonal(&[1.0, 2.0]).unwrap();
        let t = Preconditioner::exact_inverse(&p);
        let s = pinvit1_step(&p, &t, &dv(&[1.0, 1.0])).unwrap();
        // x′ ∝ (1.5, 0.75), ρ = (2.25 + 1.125)/(2.25 + 0.5625) = 1.2
        assert!((s.rho.rho - 1.2).abs() < 1e-14);
        assert!((s.x[0] / s.x[1] - 2.0).abs() < 1e-14);
        let i = invit1_step(&p, &dv(&[1.0, 1.0])).unwrap();
        assert!((i.rho.rho - 1.2).abs() < 1e-14);
        assert!((&i.x - &s.x).norm() < 1e-14);
    }

    #[test]
    fn eigenvector_is_fixed_point() {
        let p = SymmetricPencil::from_diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let e1 = dv(&[1.0, 0.0, 0.0]);
        let s = invit1_step(&p, &e1).unwrap();
        assert_eq!(s.status, StepStatus::Converged);
        assert_eq!(s.x, e1);
        let q = psd_step(&p, &Preconditioner::identity(3), &dv(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(q.status, StepStatus::Converged);
    }

    #[test]
    fn psd_exact_in_invariant_subspace() {
        let p = SymmetricPencil::from_diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let s = psd_step(&p, &Preconditioner::identity(3), &dv(&[1.0, 1.0, 0.0])).unwrap();
        assert!((s.rho.rho - 1.0).abs() < 1e-14);
        assert!(s.theta_opt.is_finite());
        // x − ϑ·Tr reproduces the Ritz vector
        let x = dv(&[1.0, 1.0, 0.0]);
        let r = residual(&p, &x, rayleigh(&p, &x).unwrap(), ResidualForm::Lambda).unwrap();
        let w = &x - &r * s.theta_opt;
        assert!((w.normalize() - &s.x).norm() < 1e-12);
    }

    #[test]
    fn psd_scale_invariant() {
        let p = SymmetricPencil::from_diagonal(&[1.0, 3.0, 4.0, 9.0]).unwrap();
        let t = Preconditioner::from_matrix(
            DMatrix::from_diagonal(&dv(&[1.0, 0.5, 0.3, 0.2])),
            Default::default(),
        )
        .unwrap();
        let x = dv(&[1.0, 0.3, -0.2, 0.5]);
        let a = psd_step(&p, &t, &x).unwrap();
        let b = psd_step(&p, &t.scaled(10.0).unwrap(), &x).unwrap();
        assert!((a.rho.rho - b.rho.rho).abs() < 1e-12 * a.rho.rho);
        assert!((&a.x - &b.x).norm() < 1e-12);
        assert!((a.theta_opt - 10.0 * b.theta_opt).abs() < 1e-9 * a.theta_opt.abs());
    }

    #[test]
    fn run_psd_exact_converges() {
        let p = SymmetricPencil::from_diagonal(&[1.0, 2.0, 5.0, 7.0, 11.0]).unwrap();
        let x0 = DVector::from_element(5, 1.0);
        let out = run(&p, None, &x0, SolverKind::Invit2, &StopCriteria::default()).unwrap();
        assert_eq!(out.termination, Termination::Residual);
        assert!((out.last().rho.rho - 1.0).abs() < 1e-10);
        assert_eq!(out.violations(), 0);
        assert!(out.records.iter().skip(1).all(|r| r.bound.is_some()));
    }

    #[test]
    fn run_from_eigenvector_stops_at_once() {
        let p = SymmetricPencil::from_diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let t = Preconditioner::identity(3);
        let out = run(&p, Some(&t), &dv(&[0.0, 1.0, 0.0]), SolverKind::Psd, &StopCriteria::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].rho.rho, 2.0);
    }

    #[test]
    fn kind_parsing() {
        for k in SolverKind::ALL {
            assert_eq!(k.as_str().parse::<SolverKind>().unwrap(), k);
        }
        assert!("lobpcg".parse::<SolverKind>().is_err());
    }
}
