//! Convergence factors of the gradient-type eigensolver hierarchy and
//! per-step certification against a known spectrum.
//!
//! Every estimate has the form `Δ(ρ(x′)) ≤ σ²·Δ(ρ(x))` with
//! `Δᵢ,ᵢ₊₁(ξ) = (ξ − λᵢ)/(λᵢ₊₁ − ξ)`, unless the new iterate has already
//! passed `λᵢ`. Interval indices are 0-based throughout.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::iterate::SolverKind;
use crate::pencil::{RayleighValue, Spectrum};

/// Relative slack on `ratio ≤ σ²` that absorbs rounding.
pub const BOUND_RTOL: f64 = 1e-9;
/// Relative slack on `ρ(x′) ≤ ρ(x)`.
pub const MONOTONE_RTOL: f64 = 1e-12;

fn check_interval(spectrum: &Spectrum, i: usize) -> Result<()> {
    if i + 1 >= spectrum.len() {
        return Err(domain(format!(
            "interval index {i} needs λ[{}], but the spectrum has {} values",
            i + 1,
            spectrum.len()
        )));
    }
    Ok(())
}

/// `(ξ − λᵢ)/(λᵢ₊₁ − ξ)` for `λᵢ ≤ ξ < λᵢ₊₁`.
pub fn delta(spectrum: &Spectrum, i: usize, xi: f64) -> Result<f64> {
    check_interval(spectrum, i)?;
    let (lo, hi) = (spectrum.lambdas()[i], spectrum.lambdas()[i + 1]);
    if !(xi >= lo && xi < hi) {
        return Err(Error::Interval {
            value: xi,
            lower: lo,
            upper: hi,
        });
    }
    Ok((xi - lo) / (hi - xi))
}

/// μ-form `(μᵢ − μ)/(μ − μᵢ₊₁)`; equals the λ-form value times `μᵢ/μᵢ₊₁`.
pub fn delta_mu(mu_i: f64, mu_next: f64, mu: f64) -> f64 {
    (mu_i - mu) / (mu - mu_next)
}

/// `κ = λᵢ(λₙ − λᵢ₊₁)/(λᵢ₊₁(λₙ − λᵢ))`.
pub fn kappa(spectrum: &Spectrum, i: usize) -> Result<f64> {
    check_kappa(spectrum, i)?;
    let l = spectrum.lambdas();
    let n = l.len();
    Ok(l[i] * (l[n - 1] - l[i + 1]) / (l[i + 1] * (l[n - 1] - l[i])))
}

/// `κ = (μᵢ₊₁ − μₙ)/(μᵢ − μₙ)`, algebraically identical to [`kappa`].
pub fn kappa_mu(spectrum: &Spectrum, i: usize) -> Result<f64> {
    check_kappa(spectrum, i)?;
    let m = spectrum.mus();
    let n = m.len();
    Ok((m[i + 1] - m[n - 1]) / (m[i] - m[n - 1]))
}

fn check_kappa(spectrum: &Spectrum, i: usize) -> Result<()> {
    check_interval(spectrum, i)?;
    let l = spectrum.lambdas();
    let n = l.len();
    if i + 2 == n {
        return Err(domain(
            "κ is undefined for the last interval (i+1 = n): the worst case needs a third eigenvalue above λᵢ₊₁",
        ));
    }
    if !(l[i] < l[i + 1] && l[i + 1] < l[n - 1]) {
        return Err(domain(format!(
            "κ needs λᵢ < λᵢ₊₁ < λₙ, got {} , {}, {}",
            l[i],
            l[i + 1],
            l[n - 1]
        )));
    }
    Ok(())
}

/// `(κ + γ(2−κ))/((2−κ) + γκ)`.
pub fn sigma_psd_from_kappa(kappa: f64, gamma: f64) -> f64 {
    (kappa + gamma * (2.0 - kappa)) / ((2.0 - kappa) + gamma * kappa)
}

/// `γ + (1−γ)·λᵢ/λᵢ₊₁`.
pub fn sigma_pinvit1_from_ratio(ratio: f64, gamma: f64) -> f64 {
    gamma + (1.0 - gamma) * ratio
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(domain(format!("γ must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

/// The sharp convergence factor of `kind` on interval `i`. The exact-inverse
/// kinds ignore `gamma`.
pub fn sigma(kind: SolverKind, spectrum: &Spectrum, i: usize, gamma: f64) -> Result<f64> {
    check_interval(spectrum, i)?;
    let gamma = match kind {
        SolverKind::Invit1 | SolverKind::Invit2 => 0.0,
        _ => {
            check_gamma(gamma)?;
            gamma
        }
    };
    let l = spectrum.lambdas();
    Ok(match kind {
        SolverKind::Invit1 | SolverKind::Pinvit1 => sigma_pinvit1_from_ratio(l[i] / l[i + 1], gamma),
        SolverKind::Invit2 | SolverKind::Psd => sigma_psd_from_kappa(kappa(spectrum, i)?, gamma),
    })
}

/// κ for certification. The last interval (and a top eigenvalue repeated up
/// to `λᵢ₊₁`) takes the `κ → 0` limit.
fn certification_kappa(spectrum: &Spectrum, i: usize) -> f64 {
    let l = spectrum.lambdas();
    let n = l.len();
    if i + 2 >= n || l[i + 1] >= l[n - 1] {
        0.0
    } else {
        l[i] * (l[n - 1] - l[i + 1]) / (l[i + 1] * (l[n - 1] - l[i]))
    }
}

fn certification_sigma(kind: SolverKind, spectrum: &Spectrum, i: usize, gamma: f64) -> f64 {
    let l = spectrum.lambdas();
    match kind {
        SolverKind::Invit1 => l[i] / l[i + 1],
        SolverKind::Pinvit1 => sigma_pinvit1_from_ratio(l[i] / l[i + 1], gamma),
        SolverKind::Invit2 => sigma_psd_from_kappa(certification_kappa(spectrum, i), 0.0),
        SolverKind::Psd => sigma_psd_from_kappa(certification_kappa(spectrum, i), gamma),
    }
}

/// All four factors for one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFactors {
    pub interval_index: usize,
    pub kappa: f64,
    pub sigma_invit1: f64,
    pub sigma_pinvit1: f64,
    pub sigma_invit2: f64,
    pub sigma_psd: f64,
}

pub fn bound_factors(spectrum: &Spectrum, i: usize, gamma: f64) -> Result<BoundFactors> {
    check_gamma(gamma)?;
    Ok(BoundFactors {
        interval_index: i,
        kappa: kappa(spectrum, i)?,
        sigma_invit1: sigma(SolverKind::Invit1, spectrum, i, gamma)?,
        sigma_pinvit1: sigma(SolverKind::Pinvit1, spectrum, i, gamma)?,
        sigma_invit2: sigma(SolverKind::Invit2, spectrum, i, gamma)?,
        sigma_psd: sigma(SolverKind::Psd, spectrum, i, gamma)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    PassedLambdaI,
    Violated,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::PassedLambdaI => "passed_lambda_i",
            Verdict::Violated => "violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub interval_index: usize,
    pub delta_before: f64,
    /// Nonpositive when the new iterate has passed `λᵢ`.
    pub delta_after: f64,
    /// `delta_after/delta_before`; NaN when `delta_before = 0`.
    pub ratio: f64,
    pub sigma_squared: f64,
    pub verdict: Verdict,
    pub slack: f64,
    pub diagnostic: Option<String>,
}

fn judge(
    i: usize,
    delta_before: f64,
    delta_after: f64,
    sigma_squared: f64,
    monotone: bool,
) -> BoundCheck {
    let ratio = delta_after / delta_before;
    let (verdict, diagnostic) = if !monotone {
        (
            Verdict::Violated,
            Some("Rayleigh quotient increased (monotonicity violation)".to_string()),
        )
    } else if delta_after <= 0.0 {
        (Verdict::PassedLambdaI, None)
    } else if ratio > sigma_squared * (1.0 + BOUND_RTOL) {
        (
            Verdict::Violated,
            Some(format!("Δ ratio {ratio:e} exceeds σ² = {sigma_squared:e}")),
        )
    } else {
        (Verdict::Holds, None)
    };
    BoundCheck {
        interval_index: i,
        delta_before,
        delta_after,
        ratio,
        sigma_squared,
        verdict,
        slack: sigma_squared - ratio,
        diagnostic,
    }
}

/// Checks one step `ρ_before → ρ_after` against the factor of `kind`.
///
/// `gamma` is the scale-free quality for the steepest-descent kinds and the
/// bound on `‖I − TA‖` for the fixed-step kinds.
pub fn certify_step(
    spectrum: &Spectrum,
    kind: SolverKind,
    gamma: f64,
    before: RayleighValue,
    after: RayleighValue,
) -> Result<BoundCheck> {
    check_gamma(gamma)?;
    let i = spectrum.bracket(before.rho).ok_or_else(|| {
        let l = spectrum.lambdas();
        Error::Interval {
            value: before.rho,
            lower: l[0],
            upper: l[l.len() - 1],
        }
    })?;
    let l = spectrum.lambdas();
    let delta_before = (before.rho - l[i]) / (l[i + 1] - before.rho);
    let delta_after = (after.rho - l[i]) / (l[i + 1] - after.rho);
    let monotone = after.rho <= before.rho * (1.0 + MONOTONE_RTOL);
    let s = certification_sigma(kind, spectrum, i, gamma);
    Ok(judge(i, delta_before, delta_after, s * s, monotone))
}

/// Squared components of an iterate in the eigenbasis (`A = I`,
/// `B = diag(μ)`), from which Δ is evaluated without forming `ρ − λᵢ` by
/// subtraction.
#[derive(Debug, Clone)]
pub struct EigenWeights<'a> {
    pub weights: &'a [f64],
}

impl EigenWeights<'_> {
    /// `Σ (μ_m − μ_k) w_k`, proportional to `μ_m − μ(y)`.
    fn shifted(&self, mus: &[f64], m: usize) -> f64 {
        self.weights
            .iter()
            .zip(mus)
            .map(|(w, mu)| (mus[m] - mu) * w)
            .sum()
    }

    fn mu(&self, mus: &[f64]) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().zip(mus).map(|(w, m)| w * m).sum::<f64>() / total
    }

    /// Left-closed bracket `λᵢ ≤ ρ < λᵢ₊₁` from the weights.
    pub fn bracket(&self, spectrum: &Spectrum) -> Option<usize> {
        let mus = spectrum.mus();
        let n = mus.len();
        // largest i with μᵢ ≥ μ(y)
        let i = (0..n).rev().find(|&m| self.shifted(mus, m) >= 0.0)?;
        (i + 1 < n).then_some(i)
    }

    /// μ-form `Δ = (μᵢ − μ)/(μ − μᵢ₊₁)` from the weights.
    pub fn delta_mu(&self, spectrum: &Spectrum, i: usize) -> f64 {
        let mus = spectrum.mus();
        let num = self.shifted(mus, i);
        let den = -self.shifted(mus, i + 1);
        num / den
    }
}

/// [`certify_step`] evaluated from eigenbasis weights of the two iterates.
pub fn certify_weights(
    spectrum: &Spectrum,
    kind: SolverKind,
    gamma: f64,
    before: &EigenWeights<'_>,
    after: &EigenWeights<'_>,
) -> Result<BoundCheck> {
    check_gamma(gamma)?;
    let mus = spectrum.mus();
    if before.weights.len() != mus.len() || after.weights.len() != mus.len() {
        return Err(Error::DimensionMismatch {
            expected: mus.len(),
            got: before.weights.len().min(after.weights.len()),
        });
    }
    let i = before.bracket(spectrum).ok_or_else(|| {
        let l = spectrum.lambdas();
        Error::Interval {
            value: 1.0 / before.mu(mus),
            lower: l[0],
            upper: l[l.len() - 1],
        }
    })?;
    let delta_before = before.delta_mu(spectrum, i);
    let delta_after = after.delta_mu(spectrum, i);
    let (mu_b, mu_a) = (before.mu(mus), after.mu(mus));
    let monotone = 1.0 / mu_a <= (1.0 / mu_b) * (1.0 + MONOTONE_RTOL);
    let s = certification_sigma(kind, spectrum, i, gamma);
    // μ- and λ-form Δ differ by the constant μᵢ/μᵢ₊₁; report λ-form values
    let scale = mus[i + 1] / mus[i];
    let mut check = judge(i, delta_before, delta_after, s * s, monotone);
    check.delta_before *= scale;
    check.delta_after *= scale;
    Ok(check)
}
