//! Python module `pinvit`: pencils, preconditioners, the four iterations,
//! the certified driver, the bound factors and the worst-case instances.
//!
//! Vectors are Python sequences of floats and matrices are sequences of
//! rows. Core errors surface as `ValueError`.

use nalgebra::{DMatrix, DVector};
use pinvit_core::bounds;
use pinvit_core::conelab::{worst_case_instance, WorstCaseSetup};
use pinvit_core::error::Error;
use pinvit_core::iterate::{self, SolverKind, StopCriteria};
use pinvit_core::pencil::{self, Spectrum, SymmetricPencil};
use pinvit_core::precond::{self, SyntheticMode};
use pinvit_core::problem::{generate_problem, MassKind, ProblemSpec};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Row-major nested lists to a dense matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(format!("row {i} has {} entries, expected {m}", r.len()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parse_kind(kind: &str) -> PyResult<SolverKind> {
    kind.parse().map_err(py_err)
}

/// Symmetric positive definite pencil `(A, B)`.
#[pyclass(name = "Pencil", module = "pinvit", frozen)]
pub struct PyPencil {
    inner: SymmetricPencil,
}

#[pymethods]
impl PyPencil {
    /// `Pencil(a, b=None)`; `b` defaults to the identity.
    #[new]
    #[pyo3(signature = (a, b=None))]
    fn new(a: Vec<Vec<f64>>, b: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let a = matrix_from_rows(&a).map_err(PyValueError::new_err)?;
        let inner = match b {
            Some(b) => {
                let b = matrix_from_rows(&b).map_err(PyValueError::new_err)?;
                SymmetricPencil::new(a, b)
            }
            None => SymmetricPencil::standard(a),
        }
        .map_err(py_err)?;
        Ok(PyPencil { inner })
    }

    /// `(diag(λ), I)`.
    #[staticmethod]
    fn diagonal(lambdas: Vec<f64>) -> PyResult<Self> {
        Ok(PyPencil {
            inner: SymmetricPencil::from_diagonal(&lambdas).map_err(py_err)?,
        })
    }

    /// Finite-difference (or, with `fem=True`, linear-element) 1D Laplacian.
    #[staticmethod]
    #[pyo3(signature = (n, h=1.0, fem=false))]
    fn laplacian1d(n: usize, h: f64, fem: bool) -> PyResult<Self> {
        let mass = if fem { MassKind::Consistent } else { MassKind::Identity };
        let inner = generate_problem(&ProblemSpec::Laplacian1d { n, h, mass }).map_err(py_err)?;
        Ok(PyPencil { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn a(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.a())
    }

    fn b(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.b())
    }

    /// Generalized eigenvalues, ascending.
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.spectrum().lambdas().to_vec()
    }

    /// Generalized eigenvectors as columns, `A`-orthonormal, ordered by
    /// ascending eigenvalue.
    fn eigenvectors(&self) -> Vec<Vec<f64>> {
        // columns follow descending μ, i.e. ascending λ
        matrix_to_rows(&self.inner.diagonal_form().inverse_basis)
    }

    /// `ρ(x) = (x, Ax)/(x, Bx)`.
    fn rayleigh(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(pencil::rayleigh(&self.inner, &DVector::from_vec(x)).map_err(py_err)?.rho)
    }

    fn __repr__(&self) -> String {
        format!("Pencil(dim={})", self.inner.dim())
    }
}

/// Symmetric positive definite preconditioner `T` with its quality.
#[pyclass(name = "Preconditioner", module = "pinvit", frozen)]
pub struct PyPreconditioner {
    inner: precond::Preconditioner,
}

#[pymethods]
impl PyPreconditioner {
    /// An explicit s.p.d. matrix; quality is measured against `pencil`.
    #[new]
    fn new(pencil: &PyPencil, matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = matrix_from_rows(&matrix).map_err(PyValueError::new_err)?;
        let t = precond::Preconditioner::from_matrix(m, Default::default()).map_err(py_err)?;
        let q = precond::estimate_quality(&pencil.inner, &t).map_err(py_err)?;
        Ok(PyPreconditioner { inner: t.with_quality(q) })
    }

    /// Seeded `T` with `‖I − TA‖ = γ`.
    #[staticmethod]
    fn synthetic(pencil: &PyPencil, gamma: f64, seed: u64) -> PyResult<Self> {
        let t = precond::synthetic_gamma_preconditioner(pencil.inner.diagonal_form(), gamma, seed, SyntheticMode::Random)
            .map_err(py_err)?;
        Ok(PyPreconditioner { inner: t })
    }

    #[staticmethod]
    fn jacobi(pencil: &PyPencil) -> PyResult<Self> {
        Ok(PyPreconditioner {
            inner: precond::jacobi_preconditioner(&pencil.inner).map_err(py_err)?,
        })
    }

    /// `T = A⁻¹`.
    #[staticmethod]
    fn exact(pencil: &PyPencil) -> Self {
        PyPreconditioner {
            inner: precond::Preconditioner::exact_inverse(&pencil.inner),
        }
    }

    /// Scale-free `(γ₂−γ₁)/(γ₁+γ₂)`, if known.
    #[getter]
    fn gamma(&self) -> Option<f64> {
        self.inner.quality().scaled_gamma()
    }

    /// `‖I − TA‖` bound for the fixed step, if below one.
    #[getter]
    fn fixed_step_gamma(&self) -> Option<f64> {
        self.inner.quality().fixed_step_gamma()
    }

    fn apply(&self, r: Vec<f64>) -> PyResult<Vec<f64>> {
        if r.len() != self.inner.dim() {
            return Err(py_err(Error::DimensionMismatch {
                expected: self.inner.dim(),
                got: r.len(),
            }));
        }
        Ok(self.inner.apply(&DVector::from_vec(r)).iter().copied().collect())
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.matrix())
    }
}

/// Per-step records of a certified run.
#[pyclass(name = "RunResult", module = "pinvit", get_all, frozen)]
pub struct PyRunResult {
    pub kind: String,
    pub termination: String,
    pub certified_gamma: Option<f64>,
    pub rho: Vec<f64>,
    pub residual_norm: Vec<f64>,
    pub delta: Vec<Option<f64>>,
    pub ratio: Vec<Option<f64>>,
    pub sigma_sq: Vec<Option<f64>>,
    pub verdict: Vec<Option<String>>,
    /// Final iterate, unit norm.
    pub x: Vec<f64>,
    pub violations: usize,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn steps(&self) -> usize {
        self.rho.len() - 1
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(kind={}, steps={}, rho={:e}, termination={}, violations={})",
            self.kind,
            self.rho.len() - 1,
            self.rho.last().copied().unwrap_or(f64::NAN),
            self.termination,
            self.violations
        )
    }
}

fn vec(x: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(x)
}

fn out(x: &DVector<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

/// `x′ = x − T(Ax − ρBx)`; returns `(x′, ρ(x′))`.
#[pyfunction]
fn pinvit1_step(pencil: &PyPencil, t: &PyPreconditioner, x: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
    let s = iterate::pinvit1_step(&pencil.inner, &t.inner, &vec(x)).map_err(py_err)?;
    Ok((out(&s.x), s.rho.rho))
}

#[pyfunction]
fn invit1_step(pencil: &PyPencil, x: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
    let s = iterate::invit1_step(&pencil.inner, &vec(x)).map_err(py_err)?;
    Ok((out(&s.x), s.rho.rho))
}

/// Rayleigh–Ritz on `span{x, T(Ax − ρBx)}`; returns `(x′, ρ(x′), ϑ)`.
#[pyfunction]
fn psd_step(pencil: &PyPencil, t: &PyPreconditioner, x: Vec<f64>) -> PyResult<(Vec<f64>, f64, f64)> {
    let s = iterate::psd_step(&pencil.inner, &t.inner, &vec(x)).map_err(py_err)?;
    Ok((out(&s.x), s.rho.rho, s.theta_opt))
}

#[pyfunction]
fn invit2_step(pencil: &PyPencil, x: Vec<f64>) -> PyResult<(Vec<f64>, f64, f64)> {
    let s = iterate::invit2_step(&pencil.inner, &vec(x)).map_err(py_err)?;
    Ok((out(&s.x), s.rho.rho, s.theta_opt))
}

/// Iterates `kind` from `x0` and certifies every step.
#[pyfunction]
#[pyo3(signature = (pencil, kind, x0, precond=None, max_steps=500, residual_tol=1e-10, delta_tol=None))]
fn solve(
    py: Python<'_>,
    pencil: &PyPencil,
    kind: &str,
    x0: Vec<f64>,
    precond: Option<&PyPreconditioner>,
    max_steps: usize,
    residual_tol: f64,
    delta_tol: Option<f64>,
) -> PyResult<PyRunResult> {
    let kind = parse_kind(kind)?;
    let stop = StopCriteria {
        max_steps,
        residual_tol,
        delta_tol,
    };
    let x0 = vec(x0);
    let t = precond.map(|p| &p.inner);
    let run = py
        .detach(|| iterate::run(&pencil.inner, t, &x0, kind, &stop))
        .map_err(py_err)?;
    let rec = &run.records;
    Ok(PyRunResult {
        kind: kind.to_string(),
        termination: run.termination.as_str().to_string(),
        certified_gamma: run.certified_gamma,
        rho: rec.iter().map(|r| r.rho.rho).collect(),
        residual_norm: rec.iter().map(|r| r.residual_norm).collect(),
        delta: rec.iter().map(|r| r.delta).collect(),
        ratio: rec.iter().map(|r| r.bound.as_ref().map(|b| b.ratio)).collect(),
        sigma_sq: rec.iter().map(|r| r.bound.as_ref().map(|b| b.sigma_squared)).collect(),
        verdict: rec
            .iter()
            .map(|r| r.bound.as_ref().map(|b| b.verdict.as_str().to_string()))
            .collect(),
        x: run.last().x.clone(),
        violations: run.violations(),
    })
}

/// Convergence factor σ of `kind` on the interval `[λᵢ, λᵢ₊₁)` (0-based).
#[pyfunction]
#[pyo3(signature = (kind, eigenvalues, i, gamma=0.0))]
fn sigma(kind: &str, eigenvalues: Vec<f64>, i: usize, gamma: f64) -> PyResult<f64> {
    let spectrum = Spectrum::from_unsorted(eigenvalues).map_err(py_err)?;
    bounds::sigma(parse_kind(kind)?, &spectrum, i, gamma).map_err(py_err)
}

/// `κ = λᵢ(λₙ−λᵢ₊₁)/(λᵢ₊₁(λₙ−λᵢ))`.
#[pyfunction]
fn kappa(eigenvalues: Vec<f64>, i: usize) -> PyResult<f64> {
    let spectrum = Spectrum::from_unsorted(eigenvalues).map_err(py_err)?;
    bounds::kappa(&spectrum, i).map_err(py_err)
}

/// `Δ = (ξ−λᵢ)/(λᵢ₊₁−ξ)`.
#[pyfunction]
fn delta(eigenvalues: Vec<f64>, i: usize, xi: f64) -> PyResult<f64> {
    let spectrum = Spectrum::from_unsorted(eigenvalues).map_err(py_err)?;
    bounds::delta(&spectrum, i, xi).map_err(py_err)
}

/// Worst-case steepest-descent step in `diag(μ_j, μ_k, μ_l)`; returns
/// `(measured Δ ratio, σ², μ′)`. `t` defaults to the minimizing `t₁`.
#[pyfunction]
#[pyo3(signature = (mus, gamma, delta, t=None))]
fn worst_case(mus: [f64; 3], gamma: f64, delta: f64, t: Option<f64>) -> PyResult<(f64, f64, f64)> {
    let setup = match t {
        Some(t) => WorstCaseSetup::new(mus, gamma, delta, t),
        None => WorstCaseSetup::at_t1(mus, gamma, delta),
    }
    .map_err(py_err)?;
    let inst = worst_case_instance(&setup).map_err(py_err)?;
    Ok((inst.measured_ratio, inst.predicted_ratio, inst.mu_next))
}

#[pymodule]
fn pinvit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPencil>()?;
    m.add_class::<PyPreconditioner>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(pinvit1_step, m)?)?;
    m.add_function(wrap_pyfunction!(invit1_step, m)?)?;
    m.add_function(wrap_pyfunction!(psd_step, m)?)?;
    m.add_function(wrap_pyfunction!(invit2_step, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sigma, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case, m)?)?;
    Ok(())
}
