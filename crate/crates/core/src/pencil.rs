//! Symmetric positive definite pencils `(A, B)`, Rayleigh quotients in the
//! λ-form `(x,Ax)/(x,Bx)` and the reciprocal μ-form, residuals, the
//! congruence to `A = I, B = diag(μ)`, and Rayleigh–Ritz projection.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{self, cholesky_lower, orthonormalize, sym_eigen};

/// The pair `(A, B)` of the generalized eigenproblem `Ax = λBx`.
///
/// Both matrices are stored exactly symmetric and are verified positive
/// definite on construction. The generalized eigen-decomposition is computed
/// lazily and cached.
#[derive(Debug, Clone)]
pub struct SymmetricPencil {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    diagonal: OnceLock<DiagonalForm>,
}

impl SymmetricPencil {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        check_spd(&a, "A")?;
        check_spd(&b, "B")?;
        if a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.nrows(),
            });
        }
        Ok(SymmetricPencil {
            a,
            b,
            diagonal: OnceLock::new(),
        })
    }

    /// The standard problem `Ax = λx`.
    pub fn standard(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, DMatrix::identity(n, n))
    }

    /// `A = diag(lambdas)`, `B = I`.
    pub fn from_diagonal(lambdas: &[f64]) -> Result<Self> {
        Self::standard(DMatrix::from_diagonal(&DVector::from_column_slice(lambdas)))
    }

    /// The μ-form pencil `A = I`, `B = diag(mus)`.
    pub fn mu_form(mus: &[f64]) -> Result<Self> {
        let n = mus.len();
        Self::new(
            DMatrix::identity(n, n),
            DMatrix::from_diagonal(&DVector::from_column_slice(mus)),
        )
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Cached congruence to diagonal μ-form.
    pub fn diagonal_form(&self) -> &DiagonalForm {
        self.diagonal
            .get_or_init(|| diagonalize_checked(&self.a, &self.b).expect("pencil verified s.p.d."))
    }

    /// Generalized eigenvalues from a dense eigensolve, cached with the
    /// diagonal form.
    pub fn spectrum(&self) -> &Spectrum {
        &self.diagonal_form().spectrum
    }

    fn check_vector(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

fn check_spd(m: &DMatrix<f64>, which: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let n = m.nrows();
    if n == 0 {
        return Err(domain("pencil dimension must be positive"));
    }
    for j in 0..n {
        for i in (j + 1)..n {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::NotSymmetric {
                    which,
                    row: i,
                    col: j,
                });
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("matrix {which} has non-finite entries")));
    }
    if cholesky_lower(m).is_none() {
        return Err(Error::NotPositiveDefinite { which });
    }
    Ok(())
}

/// Ordered eigenvalues `λ₁ ≤ … ≤ λₙ` with index-aligned reciprocals
/// `μᵢ = 1/λᵢ` (so the μ list is nonincreasing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    lambdas: Vec<f64>,
    mus: Vec<f64>,
}

impl Spectrum {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(domain("spectrum must not be empty"));
        }
        if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(domain("eigenvalues must be positive and finite"));
        }
        if lambdas.windows(2).any(|w| w[0] > w[1]) {
            return Err(domain("eigenvalues must be listed in nondecreasing order"));
        }
        let mus = lambdas.iter().map(|l| 1.0 / l).collect();
        Ok(Spectrum { lambdas, mus })
    }

    pub fn from_unsorted(mut lambdas: Vec<f64>) -> Result<Self> {
        lambdas.sort_by(f64::total_cmp);
        Self::new(lambdas)
    }

    pub fn from_mus(mut mus: Vec<f64>) -> Result<Self> {
        mus.sort_by(|a, b| b.total_cmp(a));
        Self::new(mus.iter().map(|m| 1.0 / m).collect())
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    /// Index `i` (0-based) with `λᵢ ≤ ξ < λᵢ₊₁`, left-closed. `None` when
    /// `ξ < λ₁` or `ξ ≥ λₙ`.
    pub fn bracket(&self, xi: f64) -> Option<usize> {
        let n = self.lambdas.len();
        if n < 2 || !(xi >= self.lambdas[0]) || xi >= self.lambdas[n - 1] {
            return None;
        }
        // number of eigenvalues <= xi, minus one
        let count = self.lambdas.partition_point(|&l| l <= xi);
        Some(count - 1)
    }
}

/// A Rayleigh quotient value carried in both forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighValue {
    pub rho: f64,
    pub mu: f64,
}

impl RayleighValue {
    pub fn from_rho(rho: f64) -> Self {
        RayleighValue { rho, mu: 1.0 / rho }
    }

    pub fn from_mu(mu: f64) -> Self {
        RayleighValue { rho: 1.0 / mu, mu }
    }
}

/// `ρ(x) = (x,Ax)/(x,Bx)` and `μ(x) = 1/ρ(x)`.
pub fn rayleigh(pencil: &SymmetricPencil, x: &DVector<f64>) -> Result<RayleighValue> {
    pencil.check_vector(x)?;
    let xa = x.dot(&(pencil.a() * x));
    let xb = x.dot(&(pencil.b() * x));
    if x.iter().all(|&v| v == 0.0) || xb == 0.0 || xa == 0.0 {
        return Err(Error::ZeroVector);
    }
    let rho = xa / xb;
    if !rho.is_finite() {
        return Err(Error::Numeric(format!("Rayleigh quotient is {rho}")));
    }
    Ok(RayleighValue { rho, mu: xb / xa })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualForm {
    /// `Ax − ρ(x)Bx`
    Lambda,
    /// `Bx − μ(x)Ax`, which is `Bx − μ(x)x` once `A = I`.
    Mu,
}

pub fn residual(
    pencil: &SymmetricPencil,
    x: &DVector<f64>,
    value: RayleighValue,
    form: ResidualForm,
) -> Result<DVector<f64>> {
    pencil.check_vector(x)?;
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVector);
    }
    let ax = pencil.a() * x;
    let bx = pencil.b() * x;
    Ok(match form {
        ResidualForm::Lambda => ax - bx * value.rho,
        ResidualForm::Mu => bx - ax * value.mu,
    })
}

/// Congruence `y = basis · x` under which `A = I` and
/// `B = diag(μ₁ ≥ … ≥ μₙ)`.
///
/// With `A = CCᵀ` and `C⁻¹BC⁻ᵀ = QΛQᵀ`, `basis = QᵀCᵀ` and
/// `inverse_basis = C⁻ᵀQ`. The columns of `inverse_basis` are the
/// generalized eigenvectors, `A`-orthonormal.
#[derive(Debug, Clone)]
pub struct DiagonalForm {
    pub mu_diag: Vec<f64>,
    pub basis: DMatrix<f64>,
    pub inverse_basis: DMatrix<f64>,
    spectrum: Spectrum,
}

impl DiagonalForm {
    pub fn dim(&self) -> usize {
        self.mu_diag.len()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn to_transformed(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.basis * x
    }

    pub fn to_original(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.inverse_basis * y
    }

    /// Operator `T` acting on original-coordinate residuals, expressed in the
    /// transformed coordinates: `basis · T · basisᵀ`.
    pub fn transform_operator(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.basis * t * self.basis.transpose()))
    }

    /// Inverse of [`transform_operator`](Self::transform_operator).
    pub fn operator_to_original(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.inverse_basis * t * self.inverse_basis.transpose()))
    }

    /// `A⁻¹`, assembled from the generalized eigenvectors.
    pub fn exact_inverse(&self) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.inverse_basis * self.inverse_basis.transpose()))
    }

    /// The pencil `(I, diag(μ))`.
    pub fn transformed_pencil(&self) -> SymmetricPencil {
        SymmetricPencil::mu_form(&self.mu_diag).expect("positive μ values")
    }
}

pub fn diagonalize(pencil: &SymmetricPencil) -> Result<DiagonalForm> {
    Ok(pencil.diagonal_form().clone())
}

fn diagonalize_checked(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DiagonalForm> {
    let n = a.nrows();
    let c = cholesky_lower(a).ok_or(Error::NotPositiveDefinite { which: "A" })?;
    let c_inv = c
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite { which: "A" })?;
    let m = &c_inv * b * c_inv.transpose();
    let eig = sym_eigen(&m);
    // descending μ
    let order: Vec<usize> = (0..n).rev().collect();
    let mu_diag: Vec<f64> = order.iter().map(|&k| eig.values[k]).collect();
    if mu_diag.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::NotPositiveDefinite { which: "B" });
    }
    let mut q = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        q.set_column(dst, &eig.vectors.column(src));
    }
    let basis = q.transpose() * c.transpose();
    let inverse_basis = c_inv.transpose() * &q;
    let spectrum = Spectrum::new(mu_diag.iter().map(|m| 1.0 / m).collect())?;
    Ok(DiagonalForm {
        mu_diag,
        basis,
        inverse_basis,
        spectrum,
    })
}

/// Ritz pair of a pencil with respect to a trial subspace.
#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: RayleighValue,
    /// Unit Euclidean norm.
    pub vector: DVector<f64>,
    /// The Ritz vector expressed in the caller's (non-orthonormal) basis.
    pub coefficients: DVector<f64>,
}

/// Rayleigh–Ritz on `span(basis_vectors)`.
///
/// Pairs are sorted by increasing λ-form Ritz value (equivalently
/// decreasing μ-form value).
pub fn rayleigh_ritz(
    pencil: &SymmetricPencil,
    basis_vectors: &[DVector<f64>],
) -> Result<Vec<RitzPair>> {
    for v in basis_vectors {
        pencil.check_vector(v)?;
    }
    let o = orthonormalize(basis_vectors)?;
    let k = o.q.ncols();
    let a_hat = linalg::symmetrize(&(o.q.transpose() * pencil.a() * &o.q));
    let b_hat = linalg::symmetrize(&(o.q.transpose() * pencil.b() * &o.q));
    let l = cholesky_lower(&a_hat).ok_or(Error::Numeric(
        "projected A lost positive definiteness".into(),
    ))?;
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::Numeric("singular projected A".into()))?;
    let m = &l_inv * b_hat * l_inv.transpose();
    let eig = sym_eigen(&m);
    let r_inv = o
        .r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::DegenerateSubspace {
            requested: k,
            rank: k - 1,
        })?;

    // eigenvalues ascending in μ; emit descending μ = ascending λ
    let mut pairs = Vec::with_capacity(k);
    for idx in (0..k).rev() {
        let mu = eig.values[idx];
        let z = l_inv.transpose() * eig.vectors.column(idx);
        let w = &o.q * &z;
        let norm = w.norm();
        pairs.push(RitzPair {
            value: RayleighValue::from_mu(mu),
            vector: w / norm,
            coefficients: (&r_inv * z) / norm,
        });
    }
    Ok(pairs)
}
