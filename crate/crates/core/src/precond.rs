//! Preconditioners `T` and their quality constants.
//!
//! Quality is tracked two ways. The spectral-equivalence constants
//! `γ₁ ≤ eig(TA) ≤ γ₂` always exist for s.p.d. `T`; the scale-free
//! `γ = (γ₂−γ₁)/(γ₁+γ₂)` is what steepest descent sees. The fixed-step
//! iteration needs `T` itself to satisfy `‖I − TA‖ ≤ γ < 1`, which depends on
//! the scaling of `T`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{self, cholesky_lower, random_orthogonal, sym_eigen};
use crate::pencil::{DiagonalForm, SymmetricPencil};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrecondQuality {
    /// `(γ₂−γ₁)/(γ₁+γ₂)` or a declared bound on it, in `[0, 1)`.
    pub gamma: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

impl PrecondQuality {
    pub fn from_constants(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(gamma1 > 0.0 && gamma1 <= gamma2 && gamma2.is_finite()) {
            return Err(domain(format!(
                "spectral equivalence constants need 0 < γ₁ ≤ γ₂, got ({gamma1}, {gamma2})"
            )));
        }
        Ok(PrecondQuality {
            gamma: Some((gamma2 - gamma1) / (gamma1 + gamma2)),
            gamma1: Some(gamma1),
            gamma2: Some(gamma2),
        })
    }

    /// Quality of a preconditioner with `‖I − TA‖ ≤ γ`.
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(PrecondQuality {
            gamma: Some(gamma),
            gamma1: Some(1.0 - gamma),
            gamma2: Some(1.0 + gamma),
        })
    }

    /// The γ entering the steepest-descent factor; scale invariant.
    pub fn scaled_gamma(&self) -> Option<f64> {
        match (self.gamma1, self.gamma2) {
            (Some(g1), Some(g2)) => Some((g2 - g1) / (g1 + g2)),
            _ => self.gamma,
        }
    }

    /// `max(1−γ₁, γ₂−1)`, the bound on `‖I − TA‖`, when it is below one.
    pub fn fixed_step_gamma(&self) -> Option<f64> {
        let (g1, g2) = (self.gamma1?, self.gamma2?);
        let g = (1.0 - g1).max(g2 - 1.0).max(0.0);
        (g < 1.0).then_some(g)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(domain(format!("γ must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

/// A symmetric positive definite operator `r ↦ Tr` in original coordinates.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    matrix: DMatrix<f64>,
    quality: PrecondQuality,
}

impl Preconditioner {
    pub fn from_matrix(matrix: DMatrix<f64>, quality: PrecondQuality) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        check_symmetric_probe(&matrix)?;
        let matrix = linalg::symmetrize(&matrix);
        if cholesky_lower(&matrix).is_none() {
            return Err(Error::NotPositiveDefinite { which: "T" });
        }
        Ok(Preconditioner { matrix, quality })
    }

    pub fn identity(n: usize) -> Self {
        Preconditioner {
            matrix: DMatrix::identity(n, n),
            quality: PrecondQuality::default(),
        }
    }

    /// `T = A⁻¹`, so `γ₁ = γ₂ = 1`.
    pub fn exact_inverse(pencil: &SymmetricPencil) -> Self {
        Preconditioner {
            matrix: pencil.diagonal_form().exact_inverse(),
            quality: PrecondQuality::from_constants(1.0, 1.0).expect("valid constants"),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        &self.matrix * r
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn quality(&self) -> &PrecondQuality {
        &self.quality
    }

    pub fn with_quality(mut self, quality: PrecondQuality) -> Self {
        self.quality = quality;
        self
    }

    /// `c·T`. The spectral-equivalence constants scale with `c`; the
    /// scale-free γ is unchanged.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(domain(format!("scale factor must be positive, got {c}")));
        }
        let q = self.quality;
        let quality = match (q.gamma1, q.gamma2) {
            (Some(g1), Some(g2)) => PrecondQuality {
                gamma: q.gamma,
                gamma1: Some(c * g1),
                gamma2: Some(c * g2),
            },
            _ => PrecondQuality {
                gamma: q.gamma,
                gamma1: None,
                gamma2: None,
            },
        };
        Ok(Preconditioner {
            matrix: &self.matrix * c,
            quality,
        })
    }
}

fn check_symmetric_probe(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..4 {
        let u = linalg::random_gaussian_vector(n, &mut rng);
        let v = linalg::random_gaussian_vector(n, &mut rng);
        let uv = u.dot(&(m * &v));
        let vu = v.dot(&(m * &u));
        let scale = u.norm() * v.norm() * m.norm();
        if (uv - vu).abs() > 1e-10 * scale {
            return Err(Error::NotSymmetric {
                which: "T",
                row: 0,
                col: 0,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticMode {
    /// `E = Q·diag(η)·Qᵀ` with seeded random orthogonal `Q`, `|ηᵢ| ≤ γ` and
    /// one `|ηᵢ| = γ`.
    Random,
    Identity,
    /// `T` maps the transformed residual `residual` onto a multiple of
    /// `target`, which must lie on the boundary of the admissible cone
    /// (`‖residual − target‖ = γ‖residual‖`, as the worst-case search
    /// direction does). Both vectors in transformed coordinates.
    WorstAligned {
        residual: DVector<f64>,
        target: DVector<f64>,
    },
}

/// Builds `T = I − E` in the transformed coordinates of `form`, with
/// `‖E‖ ≤ γ`, and conjugates it back to original coordinates.
pub fn synthetic_gamma_preconditioner(
    form: &DiagonalForm,
    gamma: f64,
    seed: u64,
    mode: SyntheticMode,
) -> Result<Preconditioner> {
    check_gamma(gamma)?;
    let n = form.dim();
    let transformed = synthetic_transformed(n, gamma, seed, &mode)?;
    Ok(Preconditioner {
        matrix: form.operator_to_original(&transformed),
        quality: PrecondQuality::from_gamma(gamma)?,
    })
}

/// `I − E` in the transformed coordinates only.
pub fn synthetic_transformed(
    n: usize,
    gamma: f64,
    seed: u64,
    mode: &SyntheticMode,
) -> Result<DMatrix<f64>> {
    check_gamma(gamma)?;
    let id = DMatrix::<f64>::identity(n, n);
    match mode {
        SyntheticMode::Identity => Ok(id),
        SyntheticMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_orthogonal(n, &mut rng);
            let mut eta = DVector::from_fn(n, |_, _| gamma * (2.0 * rng.random::<f64>() - 1.0));
            if n > 0 {
                eta[0] = if rng.random::<bool>() { gamma } else { -gamma };
            }
            let e = &q * DMatrix::from_diagonal(&eta) * q.transpose();
            Ok(linalg::symmetrize(&(id - e)))
        }
        SyntheticMode::WorstAligned { residual, target } => {
            if residual.len() != n || target.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: residual.len().min(target.len()),
                });
            }
            let rn = residual.norm();
            if rn == 0.0 {
                return Err(Error::Stationary);
            }
            // E r = r − target with ‖E‖ = γ: E = γ·(reflection taking r̂ to ê)
            let e_vec = residual - target;
            let en = e_vec.norm();
            if (en - gamma * rn).abs() > 1e-10 * rn {
                return Err(domain(format!(
                    "target is not on the cone boundary: ‖r − target‖/‖r‖ = {} but γ = {gamma}",
                    en / rn
                )));
            }
            if en == 0.0 {
                return Ok(id);
            }
            let r_hat = residual / rn;
            let e_hat = e_vec / en;
            let w = &r_hat - &e_hat;
            let reflection = if w.norm() < 1e-15 {
                id.clone()
            } else {
                let w = &w / w.norm();
                &id - (&w * w.transpose()) * 2.0
            };
            Ok(linalg::symmetrize(&(id - reflection * gamma)))
        }
    }
}

/// `T = diag(A)⁻¹`, with quality constants measured by [`estimate_quality`].
pub fn jacobi_preconditioner(pencil: &SymmetricPencil) -> Result<Preconditioner> {
    let d = pencil.a().diagonal();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(domain(format!("diagonal entry A[{i},{i}] is not positive")));
    }
    let t = Preconditioner {
        matrix: DMatrix::from_diagonal(&d.map(|v| 1.0 / v)),
        quality: PrecondQuality::default(),
    };
    let quality = estimate_quality(pencil, &t)?;
    Ok(t.with_quality(quality))
}

/// Extreme eigenvalues of `TA` by a dense eigensolve of the transformed
/// operator.
pub fn estimate_quality(pencil: &SymmetricPencil, t: &Preconditioner) -> Result<PrecondQuality> {
    if t.dim() != pencil.dim() {
        return Err(Error::DimensionMismatch {
            expected: pencil.dim(),
            got: t.dim(),
        });
    }
    let tt = pencil.diagonal_form().transform_operator(t.matrix());
    let eig = sym_eigen(&tt);
    let n = eig.values.len();
    PrecondQuality::from_constants(eig.values[0], eig.values[n - 1])
}

/// `(2/(γ₁+γ₂))·T`, after which `‖I − TA‖ ≤ (γ₂−γ₁)/(γ₁+γ₂)`.
pub fn rescale(t: &Preconditioner, quality: &PrecondQuality) -> Result<Preconditioner> {
    let (g1, g2) = match (quality.gamma1, quality.gamma2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(domain("rescaling needs both spectral equivalence constants")),
    };
    let c = 2.0 / (g1 + g2);
    let scaled = t.scaled(c)?;
    let q = PrecondQuality::from_constants(c * g1, c * g2)?;
    Ok(scaled.with_quality(q))
}

/// Exact `‖I − T̃‖` in transformed coordinates, which equals the spectral
/// radius of `I − TA`.
pub fn error_propagation_norm(pencil: &SymmetricPencil, t: &Preconditioner) -> f64 {
    let tt = pencil.diagonal_form().transform_operator(t.matrix());
    let eig = sym_eigen(&tt);
    eig.values
        .iter()
        .map(|v| (1.0 - v).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm_estimate;
    use crate::pencil::diagonalize;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        linalg::symmetrize(&(&g * g.transpose() + DMatrix::identity(n, n) * 0.5))
    }

    #[test]
    fn gamma_zero_is_identity_in_transformed_coordinates() {
        let p = SymmetricPencil::new(spd(4, 1), spd(4, 2)).unwrap();
        let f = diagonalize(&p).unwrap();
        let t = synthetic_gamma_preconditioner(&f, 0.0, 9, SyntheticMode::Random).unwrap();
        let tt = f.transform_operator(t.matrix());
        assert!((tt - DMatrix::<f64>::identity(4, 4)).norm() < 1e-10);
        assert_eq!(t.quality().gamma, Some(0.0));
    }

    #[test]
    fn random_synthetic_respects_gamma() {
        for seed in 0..10 {
            let t = synthetic_transformed(8, 0.5, seed, &SyntheticMode::Random).unwrap();
            let e = DMatrix::<f64>::identity(8, 8) - t;
            let measured = spectral_norm_estimate(&e, 200, 1e-10);
            assert!(measured <= 0.5 + 1e-12, "seed {seed}: {measured}");
            // the bound is attained by construction
            let exact = sym_eigen(&e).values.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!((exact - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_out_of_range_is_rejected() {
        let p = SymmetricPencil::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let f = diagonalize(&p).unwrap();
        for g in [-0.1, 1.0, 1.5] {
            assert!(matches!(
                synthetic_gamma_preconditioner(&f, g, 0, SyntheticMode::Random),
                Err(Error::Domain(_))
            ));
        }
    }

    #[test]
    fn worst_aligned_maps_residual_to_target() {
        // target on the cone boundary: r − target has norm γ‖r‖
        let r: DVector<f64> = DVector::from_vec(vec![0.3, -0.2, 0.4]);
        let gamma: f64 = 0.6;
        let u: DVector<f64> = DVector::from_vec(vec![0.2, 0.5, 0.1]);
        let u = &u - &r * (u.dot(&r) / r.norm_squared());
        let u = u.normalize();
        let target = &r * (1.0 - gamma * gamma) + &u * (gamma * (1.0 - gamma * gamma).sqrt() * r.norm());
        let t = synthetic_transformed(
            3,
            gamma,
            0,
            &SyntheticMode::WorstAligned {
                residual: r.clone(),
                target: target.clone(),
            },
        )
        .unwrap();
        let tr = &t * &r;
        assert!((tr - &target).norm() < 1e-14);
        let e = DMatrix::<f64>::identity(3, 3) - &t;
        assert!(spectral_norm_estimate(&e, 200, 1e-12) <= gamma + 1e-12);
    }

    #[test]
    fn jacobi_examples() {
        let p = SymmetricPencil::from_diagonal(&[2.0, 5.0, 7.0]).unwrap();
        let t = jacobi_preconditioner(&p).unwrap();
        assert!((t.matrix()[(1, 1)] - 0.2).abs() < 1e-16);
        assert!(t.quality().gamma.unwrap().abs() < 1e-10);

        let id = SymmetricPencil::standard(DMatrix::identity(3, 3)).unwrap();
        let ti = jacobi_preconditioner(&id).unwrap();
        assert_eq!(ti.matrix(), &DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn estimate_quality_examples() {
        let a = spd(5, 4);
        let p = SymmetricPencil::standard(a).unwrap();
        let exact = Preconditioner::exact_inverse(&p);
        let q = estimate_quality(&p, &exact).unwrap();
        assert!((q.gamma1.unwrap() - 1.0).abs() < 1e-10);
        assert!((q.gamma2.unwrap() - 1.0).abs() < 1e-10);
        assert!(q.gamma.unwrap().abs() < 1e-10);

        let twice = exact.scaled(2.0).unwrap();
        let q2 = estimate_quality(&p, &twice).unwrap();
        assert!((q2.gamma1.unwrap() - 2.0).abs() < 1e-9);
        assert!((q2.gamma2.unwrap() - 2.0).abs() < 1e-9);
        assert!(q2.gamma.unwrap().abs() < 1e-10);

        // A = I, T = I − E with ‖E‖ = 0.3 attained at both ends
        let e = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -0.3, 0.1]));
        let id = SymmetricPencil::standard(DMatrix::identity(3, 3)).unwrap();
        let t = Preconditioner::from_matrix(DMatrix::identity(3, 3) - e, PrecondQuality::default())
            .unwrap();
        let q3 = estimate_quality(&id, &t).unwrap();
        assert!((q3.gamma1.unwrap() - 0.7).abs() < 1e-14);
        assert!((q3.gamma2.unwrap() - 1.3).abs() < 1e-14);
        assert!((q3.gamma.unwrap() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn rescale_examples() {
        let p = SymmetricPencil::standard(DMatrix::identity(2, 2)).unwrap();
        let t = Preconditioner::from_matrix(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0])),
            PrecondQuality::default(),
        )
        .unwrap();
        let q = estimate_quality(&p, &t).unwrap();
        assert_eq!((q.gamma1, q.gamma2), (Some(1.0), Some(3.0)));
        let s = rescale(&t, &q).unwrap();
        assert!((s.matrix()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s.quality().gamma.unwrap() - 0.5).abs() < 1e-15);
        assert!((s.quality().fixed_step_gamma().unwrap() - 0.5).abs() < 1e-15);

        let again = rescale(&s, s.quality()).unwrap();
        assert!((again.matrix() - s.matrix()).norm() < 1e-12);

        let flat = PrecondQuality::from_constants(4.0, 4.0).unwrap();
        assert_eq!(rescale(&t, &flat).unwrap().quality().gamma, Some(0.0));
        assert!(rescale(&t, &PrecondQuality::default()).is_err());
    }

    #[test]
    fn quality_views() {
        let q = PrecondQuality::from_constants(0.5, 2.5).unwrap();
        assert!((q.scaled_gamma().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(q.fixed_step_gamma(), None);
        let r = PrecondQuality::from_gamma(0.3).unwrap();
        assert!((r.fixed_step_gamma().unwrap() - 0.3).abs() < 1e-15);
    }
}
