//! Geometry of the preconditioned search in the μ-form coordinates
//! `A = I`, `B = diag(μ)` of a three-dimensional invariant subspace.
//!
//! For a unit iterate `x` with residual `r = Bx − μ(x)x`, every
//! preconditioner with `‖I − T‖ ≤ γ` maps `x` into the ball of radius
//! `γ‖r‖` around `Bx`. The rays from the vertex `μ(x)x` through that ball
//! form a circular cone with `sin φ = γ`; PSD picks the best point on the
//! line `span{x, d}` for each admissible direction `d`.

mod concentration;
mod worst_case;

pub use concentration::{three_d_concentration_check, ConcentrationReport};
pub use worst_case::{
    ellipse_quantities, f_function, t1, worst_case_instance, EllipseQuantities, WorstCaseInstance,
    WorstCaseSetup,
};

use nalgebra::{DVector, Vector3};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::linalg::larger_eigenvalue_2x2;
use crate::pencil::{rayleigh_ritz, SymmetricPencil};

/// `x × r` counts as zero below this multiple of `‖x‖‖r‖`.
const PARALLEL_RTOL: f64 = 1e-12;

/// `Σ_k (μ_m − μ_k) w_k / Σ w_k`, i.e. `μ_m − μ(x)` for weights `w = x²`,
/// without the cancellation of forming `μ(x)` first.
pub(crate) fn shifted_gap(mus: &[f64], weights: &[f64], m: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .zip(mus)
        .map(|(w, mu)| (mus[m] - mu) * w)
        .sum::<f64>()
        / total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSpec {
    mus: [f64; 3],
    x: Vector3<f64>,
    mu_x: f64,
    r: Vector3<f64>,
    gamma: f64,
}

impl ConeSpec {
    /// `x` is normalized to unit length; any signs are allowed here.
    pub fn new(mus: [f64; 3], x: Vector3<f64>, gamma: f64) -> Result<Self> {
        if mus.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(domain(format!("μ values must be positive, got {mus:?}")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(domain(format!("γ must lie in [0, 1), got {gamma}")));
        }
        let norm = x.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        if !norm.is_finite() {
            return Err(Error::Numeric("x is not finite".into()));
        }
        let x = x / norm;
        let w = [x[0] * x[0], x[1] * x[1], x[2] * x[2]];
        let mu_x = (0..3).map(|k| mus[k] * w[k]).sum();
        let r = Vector3::from_fn(|k, _| shifted_gap(&mus, &w, k) * x[k]);
        Ok(ConeSpec {
            mus,
            x,
            mu_x,
            r,
            gamma,
        })
    }

    pub fn mus(&self) -> [f64; 3] {
        self.mus
    }

    pub fn x(&self) -> &Vector3<f64> {
        &self.x
    }

    pub fn mu_x(&self) -> f64 {
        self.mu_x
    }

    /// `Bx − μ(x)x`.
    pub fn residual(&self) -> &Vector3<f64> {
        &self.r
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn apply_b(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.mus[0] * v[0], self.mus[1] * v[1], self.mus[2] * v[2])
    }

    /// Center `Bx` of the ball of possible iterates.
    pub fn center(&self) -> Vector3<f64> {
        self.apply_b(&self.x)
    }

    pub fn radius(&self) -> f64 {
        self.gamma * self.r.norm()
    }

    /// Half opening angle `φ = arcsin γ` of the cone.
    pub fn opening_angle(&self) -> f64 {
        self.gamma.asin()
    }

    /// Whether `d` lies in the ball `‖Bx − d‖ ≤ γ‖r‖` (up to `tol`).
    pub fn in_ball(&self, d: &Vector3<f64>, tol: f64) -> bool {
        (self.center() - d).norm() <= self.radius() + tol
    }

    fn check_nondegenerate(&self) -> Result<f64> {
        let rn = self.r.norm();
        if rn == 0.0 {
            return Err(Error::Stationary);
        }
        if self.x.cross(&self.r).norm() < PARALLEL_RTOL * rn {
            return Err(Error::Degenerate2d);
        }
        Ok(rn)
    }

    pub fn cross_section(&self) -> Result<CrossSection> {
        let rn = self.check_nondegenerate()?;
        let g = self.gamma;
        let s = (1.0 - g * g).sqrt();
        Ok(CrossSection {
            center: self.x * self.mu_x + self.r * (1.0 - g * g),
            radius: g * s * rn,
            axis: self.r / rn,
            v: self.x.cross(&self.r) / rn,
        })
    }

    /// The 2×2 projection of `B` onto `span{x, d}` as `(μ(x), (d̄,Bx), μ(d̄))`
    /// with `d̄` the unit part of `d` orthogonal to `x`.
    pub fn projection(&self, d: &Vector3<f64>) -> Result<[f64; 3]> {
        let perp = d - self.x * self.x.dot(d);
        let pn = perp.norm();
        if pn < PARALLEL_RTOL * d.norm() || pn == 0.0 {
            return Err(Error::DegenerateSubspace {
                requested: 2,
                rank: 1,
            });
        }
        let dbar = perp / pn;
        Ok(self.projection_unit(&dbar))
    }

    fn projection_unit(&self, dbar: &Vector3<f64>) -> [f64; 3] {
        let bd = self.apply_b(dbar);
        [self.mu_x, dbar.dot(&self.center()), dbar.dot(&bd)]
    }

    /// Larger μ-form Ritz value of `span{x, d}` by the explicit 2×2 formula.
    pub fn larger_ritz(&self, d: &Vector3<f64>) -> Result<f64> {
        let [a, b, c] = self.projection(d)?;
        Ok(larger_eigenvalue_2x2(a, b, c))
    }
}

/// The disc in which the cone meets the plane through `μ(x)x + (1−γ²)r`
/// orthogonal to `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection {
    pub center: Vector3<f64>,
    /// `γ√(1−γ²)‖r‖`.
    pub radius: f64,
    /// `r/‖r‖`.
    pub axis: Vector3<f64>,
    /// `(x × r)/(‖x‖‖r‖)`.
    pub v: Vector3<f64>,
}

/// `d₁/₂ = μ(x)x + (1−γ²)r ± γ√(1−γ²)‖r‖·v`, where the cone boundary meets
/// the plane `span{x, r}` shifted along `v`.
pub fn extremal_directions(cone: &ConeSpec) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let cs = cone.cross_section()?;
    Ok((cs.center + cs.v * cs.radius, cs.center - cs.v * cs.radius))
}

/// The direction of poorest PSD convergence over the cone, valid for a
/// componentwise nonnegative `x` and strictly decreasing `μ`.
pub fn worst_direction(cone: &ConeSpec) -> Result<Vector3<f64>> {
    if cone.x.iter().any(|&v| v < 0.0) {
        return Err(domain(
            "worst_direction needs a componentwise nonnegative x; apply householder_reduce first",
        ));
    }
    let m = cone.mus;
    if !(m[0] > m[1] && m[1] > m[2]) {
        return Err(domain(format!("worst_direction needs μ₁ > μ₂ > μ₃, got {m:?}")));
    }
    cone.check_nondegenerate()?;
    let g = cone.gamma;
    // x is unit, so (x × r)/‖x‖ = x × r
    Ok(cone.x * cone.mu_x + cone.r * (1.0 - g * g) + cone.x.cross(&cone.r) * (g * (1.0 - g * g).sqrt()))
}

/// `θ₂` on `span{x, d(t)}` with `d(t) = t·d₁ + (1−t)·d₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentRitz {
    pub t: f64,
    /// From the 2×2 formula.
    pub closed_form: f64,
    /// From a general Rayleigh–Ritz projection.
    pub projected: f64,
}

pub fn ritz_on_segment(cone: &ConeSpec, t: f64) -> Result<SegmentRitz> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("segment parameter must lie in [0, 1], got {t}")));
    }
    let (d1, d2) = extremal_directions(cone)?;
    let d = d1 * t + d2 * (1.0 - t);
    let closed_form = cone.larger_ritz(&d)?;
    let pencil = SymmetricPencil::mu_form(&cone.mus)?;
    let to_dv = |v: &Vector3<f64>| DVector::from_column_slice(v.as_slice());
    let pairs = rayleigh_ritz(&pencil, &[to_dv(&cone.x), to_dv(&d)])?;
    Ok(SegmentRitz {
        t,
        closed_form,
        projected: pairs[0].value.mu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeMin {
    pub value: f64,
    pub direction: Vector3<f64>,
}

const RADIAL_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Smallest larger-Ritz value over sampled points of the cross-section disc:
/// `n_samples/4` equispaced angles on `[0, 2π)` (an even count, so both
/// `d₁` and `d₂` are hit) at each radial fraction 0.25, 0.5, 0.75, 1.
pub fn brute_force_cone_min(cone: &ConeSpec, n_samples: usize) -> Result<ConeMin> {
    if n_samples < 100 {
        return Err(domain(format!("need at least 100 samples, got {n_samples}")));
    }
    let cs = cone.cross_section()?;
    let n_angles = (n_samples / RADIAL_FRACTIONS.len()).next_multiple_of(2);
    let mut best = ConeMin {
        value: f64::INFINITY,
        direction: cs.center,
    };
    for m in 0..n_angles {
        let alpha = std::f64::consts::TAU * m as f64 / n_angles as f64;
        let dir = cs.v * alpha.cos() + cone.x * alpha.sin();
        for s in RADIAL_FRACTIONS {
            let d = cs.center + dir * (s * cs.radius);
            let value = cone.larger_ritz(&d)?;
            if value < best.value {
                best = ConeMin {
                    value,
                    direction: d,
                };
            }
        }
    }
    Ok(best)
}

/// Flips signs so every component is nonnegative. Returns the reflected
/// vector and the applied signs (`±1`).
pub fn householder_reduce(x: &DVector<f64>) -> (DVector<f64>, Vec<f64>) {
    let signs: Vec<f64> = x.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let reduced = DVector::from_iterator(x.len(), x.iter().zip(&signs).map(|(v, s)| v * s));
    (reduced, signs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone(mus: [f64; 3], x: [f64; 3], g: f64) -> ConeSpec {
        ConeSpec::new(mus, Vector3::from(x), g).unwrap()
    }

    #[test]
    fn cone_invariants() {
        let c = cone([1.0, 0.5, 0.25], [1.0, 1.0, 1.0], 0.5);
        assert!(c.residual().dot(c.x()).abs() < 1e-15);
        assert_eq!(c.radius(), 0.5 * c.residual().norm());
        assert!((c.opening_angle().sin() - 0.5).abs() < 1e-15);
        let cs = c.cross_section().unwrap();
        assert!((cs.v.norm() - 1.0).abs() < 1e-15);
        assert!(cs.v.dot(c.x()).abs() < 1e-15 && cs.v.dot(c.residual()).abs() < 1e-15);
    }

    #[test]
    fn off_diagonal_identity_example() {
        let c = cone([1.0, 0.5, 0.25], [1.0, 1.0, 1.0], 0.5);
        let (d1, d2) = extremal_directions(&c).unwrap();
        let expect = (0.75f64).sqrt() * c.residual().norm();
        for d in [d1, d2] {
            let [_, off, _] = c.projection(&d).unwrap();
            assert!((off - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn half_angle_example() {
        let g = std::f64::consts::FRAC_1_SQRT_2;
        let c = cone([1.0, 0.5, 0.25], [0.3, 0.5, 0.9], g);
        let rn = c.residual().norm();
        let (d1, _) = extremal_directions(&c).unwrap();
        assert!(((d1 - c.x() * c.mu_x()).norm() - rn / 2f64.sqrt()).abs() < 1e-14);
        assert!((c.cross_section().unwrap().radius - rn / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_gamma_collapses_to_bx() {
        let c = cone([1.0, 0.5, 0.25], [0.2, 0.7, 0.4], 0.0);
        let (d1, d2) = extremal_directions(&c).unwrap();
        assert!((d1 - c.center()).norm() < 1e-15);
        assert!((d2 - c.center()).norm() < 1e-15);
        assert!((worst_direction(&c).unwrap() - c.center()).norm() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        let c = cone([1.0, 0.5, 0.25], [1.0, 0.0, 0.0], 0.5);
        assert_eq!(c.cross_section(), Err(Error::Stationary));
        assert!(worst_direction(&cone([1.0, 0.5, 0.25], [1.0, -1.0, 1.0], 0.3)).is_err());
        assert!(brute_force_cone_min(&cone([1.0, 0.5, 0.25], [1.0, 1.0, 1.0], 0.3), 50).is_err());
    }

    #[test]
    fn reduce_signs() {
        let (y, s) = householder_reduce(&DVector::from_column_slice(&[1.0, -1.0, 1.0]));
        assert_eq!(y.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(s, vec![1.0, -1.0, 1.0]);
    }
}
