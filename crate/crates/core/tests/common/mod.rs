#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pinvit_core::linalg::{random_gaussian_vector, random_orthogonal, symmetrize};
use pinvit_core::pencil::SymmetricPencil;
use rand::Rng;

/// `Q·diag(eigs)·Qᵀ` with a random orthogonal `Q`.
pub fn spd_with_eigs<R: Rng>(eigs: &[f64], rng: &mut R) -> DMatrix<f64> {
    let q = random_orthogonal(eigs.len(), rng);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
    symmetrize(&(&q * d * q.transpose()))
}

/// Dense s.p.d. pencil with `A` and `B` conditioned at most `cond_a` and
/// `cond_b`.
pub fn random_pencil<R: Rng>(n: usize, cond_a: f64, cond_b: f64, rng: &mut R) -> SymmetricPencil {
    let ea: Vec<f64> = (0..n).map(|_| 1.0 + (cond_a - 1.0) * rng.random::<f64>()).collect();
    let eb: Vec<f64> = (0..n).map(|_| 1.0 + (cond_b - 1.0) * rng.random::<f64>()).collect();
    let a = spd_with_eigs(&ea, rng);
    let b = spd_with_eigs(&eb, rng);
    SymmetricPencil::new(a, b).expect("s.p.d. by construction")
}

pub fn random_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    random_gaussian_vector(n, rng)
}

/// Relative difference of two numbers.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
