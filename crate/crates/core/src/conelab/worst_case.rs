//! The level-set family on which PSD attains its sharp bound, in the 3D
//! invariant subspace `span{e_j, e_k, e_l}` with `μ_j > μ_k > μ_l`.
//!
//! For a target `Δ = (μ_j − μ)/(μ − μ_k)` the iterate is
//! `x = (1, α₀, β₀)` with `α₀ = a/√(1+t²)`, `β₀ = bt/√(1+t²)`, on the
//! ellipse `(x_k/a)² + (x_l/b)² = 1` cut from the level set by `x_j = 1`.

use nalgebra::Vector3;
use serde::Serialize;

use super::{shifted_gap, worst_direction, ConeSpec};
use crate::bounds::sigma_psd_from_kappa;
use crate::error::{domain, Result};

/// Relative size of a denominator below which `c_l` is treated as infinite.
const CL_LIMIT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCaseSetup {
    pub mus: [f64; 3],
    /// In `[0, 1]`; the cone is degenerate at 1 and the ellipse quantities
    /// are undefined at 0.
    pub gamma: f64,
    pub delta: f64,
    pub t: f64,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
    pub alpha0: f64,
    pub beta0: f64,
    /// `√(1−γ²)/γ`; infinite at `γ = 0`.
    pub big_gamma: f64,
    pub kappa: f64,
}

impl WorstCaseSetup {
    pub fn new(mus: [f64; 3], gamma: f64, delta: f64, t: f64) -> Result<Self> {
        let [mj, mk, ml] = mus;
        if !(mj > mk && mk > ml && ml > 0.0 && mj.is_finite()) {
            return Err(domain(format!("need μ_j > μ_k > μ_l > 0, got {mus:?}")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(domain(format!("γ must lie in [0, 1], got {gamma}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(domain(format!("Δ must be positive, got {delta}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(domain(format!("t must be positive, got {t}")));
        }
        let mu = (mj + delta * mk) / (1.0 + delta);
        // μ_j − μ = Δ(μ_j − μ_k)/(1+Δ), μ − μ_k = (μ_j − μ_k)/(1+Δ)
        let gap = mj - mk;
        let u = delta * gap / (1.0 + delta);
        let w = gap / (1.0 + delta) + (mk - ml);
        let a = delta.sqrt();
        let b = (u / w).sqrt();
        let s = (1.0 + t * t).sqrt();
        let big_gamma = if gamma == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - gamma * gamma).sqrt() / gamma
        };
        Ok(WorstCaseSetup {
            mus,
            gamma,
            delta,
            t,
            mu,
            a,
            b,
            alpha0: a / s,
            beta0: b * t / s,
            big_gamma,
            kappa: (mk - ml) / (mj - ml),
        })
    }

    /// The setup at the minimizing level-set parameter `t₁`.
    pub fn at_t1(mus: [f64; 3], gamma: f64, delta: f64) -> Result<Self> {
        let [mj, mk, ml] = mus;
        let kappa = (mk - ml) / (mj - ml);
        Self::new(mus, gamma, delta, t1(kappa, gamma)?)
    }

    /// `(1, α₀, β₀)`, not normalized.
    pub fn x(&self) -> Vector3<f64> {
        Vector3::new(1.0, self.alpha0, self.beta0)
    }

    /// `σ²` of the steepest-descent bound for this `(κ, γ)`.
    pub fn predicted_ratio(&self) -> f64 {
        let s = sigma_psd_from_kappa(self.kappa, self.gamma);
        s * s
    }
}

/// `t₁ = √(1−κ)(1−γ)/√(1−γ²)`, the level-set parameter of the global
/// minimum of `f(0, t)`.
pub fn t1(kappa: f64, gamma: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(domain(format!("κ must lie in (0, 1), got {kappa}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(domain(format!("γ must lie in [0, 1), got {gamma}")));
    }
    Ok((1.0 - kappa).sqrt() * (1.0 - gamma) / (1.0 - gamma * gamma).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCaseInstance {
    /// Unit iterate.
    pub x: Vector3<f64>,
    /// Worst admissible search direction for `x`.
    pub d: Vector3<f64>,
    /// `μ′`, the larger Ritz value of `span{x, d}`.
    pub mu_next: f64,
    /// `σ²` of the bound.
    pub predicted_ratio: f64,
    /// `Δ(μ′)/Δ(μ)`.
    pub measured_ratio: f64,
}

/// Builds `x` from `(Δ, t)`, the worst direction `d`, and measures the
/// step's contraction.
///
/// `μ_j − μ′` is obtained as the eigenvalue of the 2×2 projection of
/// `B − μ_j I` nearest zero, via `det/λ_min`, so that `Δ(μ′)` keeps full
/// relative accuracy when `μ′` is close to `μ_j`.
pub fn worst_case_instance(setup: &WorstCaseSetup) -> Result<WorstCaseInstance> {
    if setup.gamma >= 1.0 {
        return Err(domain("the cone is degenerate at γ = 1"));
    }
    let cone = ConeSpec::new(setup.mus, setup.x(), setup.gamma)?;
    let d = worst_direction(&cone)?;
    let x = *cone.x();
    let [mj, mk, _] = setup.mus;

    // unit part of d orthogonal to x: (1−γ²)r + γ√(1−γ²) x×r, without
    // subtracting μ(x)x from d
    let g = setup.gamma;
    let r = cone.residual();
    let perp = r * (1.0 - g * g) + x.cross(r) * (g * (1.0 - g * g).sqrt());
    let dbar = perp / perp.norm();

    let shift = Vector3::new(0.0, setup.mus[1] - mj, setup.mus[2] - mj);
    let sq = |u: &Vector3<f64>, v: &Vector3<f64>| (0..3).map(|k| shift[k] * u[k] * v[k]).sum::<f64>();
    let (m11, m12, m22) = (sq(&x, &x), sq(&x, &dbar), sq(&dbar, &dbar));
    let mean = 0.5 * (m11 + m22);
    let lambda_min = mean - (0.5 * (m11 - m22)).hypot(m12);
    let det = m11 * m22 - m12 * m12;
    let s = det / lambda_min; // μ′ − μ_j ≤ 0
    let delta_next = -s / (mj - mk + s);

    let w = [x[0] * x[0], x[1] * x[1], x[2] * x[2]];
    let delta_now = shifted_gap(&setup.mus, &w, 0) / -shifted_gap(&setup.mus, &w, 1);
    Ok(WorstCaseInstance {
        x,
        d,
        mu_next: mj + s,
        predicted_ratio: setup.predicted_ratio(),
        measured_ratio: delta_next / delta_now,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipseQuantities {
    pub c_k: f64,
    /// `f64::INFINITY` when the limit applies.
    pub c_l: f64,
    /// `ã²/a²`, the squared semi-axis ratio of the ellipse tangent to the
    /// line through `S₁ = (1, c_k, 0)` and `S₂ = (1, 0, c_l)`.
    pub axis_ratio: f64,
    pub c_l_infinite: bool,
}

/// Intersection coordinates of `span{x, d}` with the `e_k` and `e_l` lines
/// of the plane `x_j = 1`, and the resulting bound on `Δ(μ′)/Δ(μ)`.
pub fn ellipse_quantities(setup: &WorstCaseSetup) -> Result<EllipseQuantities> {
    if setup.gamma == 0.0 {
        return Err(domain(
            "ellipse quantities need γ > 0; use the exact-inverse factor κ/(2−κ) at γ = 0",
        ));
    }
    let [mj, mk, ml] = setup.mus;
    let mu = setup.mu;
    let (a0, b0, gg) = (setup.alpha0, setup.beta0, setup.big_gamma);
    let xn = (1.0 + a0 * a0 + b0 * b0).sqrt();
    let w = [1.0 / (xn * xn), a0 * a0 / (xn * xn), b0 * b0 / (xn * xn)];
    let (u, v, wl) = (
        shifted_gap(&setup.mus, &w, 0),
        -shifted_gap(&setup.mus, &w, 1),
        -shifted_gap(&setup.mus, &w, 2),
    );
    debug_assert!((mj - mu - u).abs() <= 1e-12 * mj);
    let num = xn * u + gg * a0 * b0 * (mk - ml);
    let den_k = xn * a0 * v + gg * b0 * (mj - ml);
    let den_l = xn * b0 * wl + gg * a0 * (mk - mj);
    let c_k = num / den_k;
    let (a, b) = (setup.a, setup.b);
    if den_l.abs() < CL_LIMIT_RTOL * num.abs() {
        return Ok(EllipseQuantities {
            c_k,
            c_l: f64::INFINITY,
            axis_ratio: c_k * c_k / (a * a),
            c_l_infinite: true,
        });
    }
    let c_l = num / den_l;
    let (ck2, cl2) = (c_k * c_k, c_l * c_l);
    Ok(EllipseQuantities {
        c_k,
        c_l,
        axis_ratio: ck2 * cl2 / (b * b * ck2 + a * a * cl2),
        c_l_infinite: false,
    })
}

/// `f(Δ, t, κ, Γ) = a²/ã²`, the reciprocal of the axis ratio written in the
/// level-set variables. Increasing in `Δ`; its minimum over `t` at `Δ = 0` is
/// `1/σ²`.
pub fn f_function(delta: f64, t: f64, kappa: f64, big_gamma: f64) -> f64 {
    let (d, k, g) = (delta, kappa, big_gamma);
    let t2 = t * t;
    let sk = (1.0 - k).sqrt();
    let root = (1.0 + t2 + k * d).sqrt();
    let tt = t * (1.0 / (1.0 + t2)).sqrt();
    let sd = (1.0 + d).sqrt();
    let num = (1.0 + d) * (g * g * (1.0 - k).powi(2) + k * (1.0 - k) + g * g * t2)
        + (1.0 - k).powi(2)
        + t2 * (1.0 - k)
        + 2.0 * k * g * tt * root * sk * sd;
    let den = sk * root + k * g * tt * sd;
    num / (den * den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_sharpness_constants() {
        let s = WorstCaseSetup::at_t1([1.0, 0.5, 0.1], 0.5, 1e-8).unwrap();
        assert!((s.kappa - 4.0 / 9.0).abs() < 1e-15);
        assert!((s.predicted_ratio() - 0.47265625).abs() < 1e-15);
        let expect_t1 = (5.0f64 / 9.0).sqrt() * 0.5 / 0.75f64.sqrt();
        assert!((s.t - expect_t1).abs() < 1e-15);
    }

    #[test]
    fn setup_reproduces_target_level() {
        let s = WorstCaseSetup::new([2.0, 1.0, 0.25], 0.3, 0.01, 0.7).unwrap();
        let x = s.x();
        let mu = (2.0 * x[0] * x[0] + x[1] * x[1] + 0.25 * x[2] * x[2]) / x.norm_squared();
        assert!((mu - s.mu).abs() < 1e-12 * s.mu);
        // x lies on the ellipse
        assert!(((x[1] / s.a).powi(2) + (x[2] / s.b).powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_gamma_limit_of_ck() {
        let s = WorstCaseSetup::new([1.0, 0.5, 0.1], 1.0, 0.2, 0.4).unwrap();
        let e = ellipse_quantities(&s).unwrap();
        assert!((e.c_k - s.a * s.a / s.alpha0).abs() < 1e-14);
    }

    #[test]
    fn f_at_t1_is_reciprocal_sigma_squared() {
        for (k, g) in [(4.0 / 9.0, 0.5), (0.2, 0.8), (0.9, 0.1)] {
            let gg = (1.0f64 - g * g).sqrt() / g;
            let f = f_function(0.0, t1(k, g).unwrap(), k, gg);
            let s = sigma_psd_from_kappa(k, g);
            assert!((f * s * s - 1.0).abs() < 1e-13, "κ={k} γ={g}");
        }
    }

    #[test]
    fn rejects_bad_setups() {
        assert!(WorstCaseSetup::new([1.0, 1.0, 0.1], 0.5, 0.1, 0.5).is_err());
        assert!(WorstCaseSetup::new([1.0, 0.5, 0.1], 0.5, 0.0, 0.5).is_err());
        assert!(WorstCaseSetup::new([1.0, 0.5, 0.1], 0.5, 0.1, 0.0).is_err());
        assert!(WorstCaseSetup::new([1.0, 0.5, 0.1], 1.5, 0.1, 0.5).is_err());
    }
}
