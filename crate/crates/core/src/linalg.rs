//! Dense helpers shared by the solvers: cyclic Jacobi for small symmetric
//! eigenproblems, modified Gram–Schmidt with rank detection, power iteration,
//! and seeded random orthogonal matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Sweeps stop once the off-diagonal Frobenius norm drops below this multiple
/// of the full Frobenius norm.
pub const JACOBI_OFF_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// A vector is declared linearly dependent on its predecessors when its norm
/// after orthogonalization falls below this fraction of its original norm.
pub const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, column `k` belongs to `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Only the lower and upper triangles' average is used, so tiny asymmetries
/// from rounding are harmless.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    assert!(m.is_square(), "sym_eigen needs a square matrix");
    let n = m.nrows();
    let mut a = symmetrize(m);
    let mut v = DMatrix::<f64>::identity(n, n);

    let norm = a.norm();
    let threshold = JACOBI_OFF_TOL * norm;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    SymEigen { values, vectors }
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Larger eigenvalue of the symmetric 2×2 matrix `[[a, b], [b, c]]`.
pub fn larger_eigenvalue_2x2(a: f64, b: f64, c: f64) -> f64 {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    mean + half_diff.hypot(b)
}

/// Result of orthonormalizing a list of vectors: `V = Q R` with `R` upper
/// triangular.
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
pub fn orthonormalize(vectors: &[DVector<f64>]) -> Result<Orthonormalized> {
    let k = vectors.len();
    if k == 0 {
        return Err(Error::DegenerateSubspace {
            requested: 0,
            rank: 0,
        });
    }
    let n = vectors[0].len();
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }

    let mut q: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut r = DMatrix::zeros(k, k);
    let mut rank = 0;
    for (j, v) in vectors.iter().enumerate() {
        let pre = v.norm();
        let mut w = v.clone();
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&w);
                r[(i, j)] += c;
                w.axpy(-c, qi, 1.0);
            }
        }
        let post = w.norm();
        if pre == 0.0 || !post.is_finite() || post < DEPENDENCE_TOL * pre {
            continue;
        }
        rank += 1;
        if rank == j + 1 {
            r[(j, j)] = post;
            q.push(w / post);
        }
    }
    if rank < k {
        return Err(Error::DegenerateSubspace { requested: k, rank });
    }
    Ok(Orthonormalized {
        q: DMatrix::from_columns(&q),
        r,
    })
}

/// Power-iteration estimate of the spectral norm of a symmetric matrix.
///
/// The estimate never exceeds the true norm.
pub fn spectral_norm_estimate(m: &DMatrix<f64>, max_iter: usize, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7 + 0.3).sin());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let converged = (norm - estimate).abs() <= tol * norm;
        estimate = norm;
        v = w / norm;
        if converged {
            break;
        }
    }
    estimate
}

/// Random orthogonal matrix from orthonormalizing a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let cols: Vec<DVector<f64>> = (0..n)
            .map(|_| DVector::from_fn(n, |_, _| rng.sample(StandardNormal)))
            .collect();
        if let Ok(o) = orthonormalize(&cols) {
            return o.q;
        }
    }
}

pub fn random_gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Lower Cholesky factor, or `None` when the matrix is not positive definite.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone()).map(|c| c.l())
}
