//! Test-problem generation: diagonal pencils, finite-difference and
//! FEM-style Laplacians, and Matrix Market ingestion.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mtx;
use crate::pencil::SymmetricPencil;

/// Mass matrix paired with a Laplacian stiffness matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassKind {
    /// Finite differences: `A = tridiag(−1, 2, −1)/h²`, `B = I`.
    Identity,
    /// Linear elements: `A = tridiag(−1, 2, −1)/h`, `B = (h/6)·tridiag(1, 4, 1)`.
    /// In 2D the bilinear tensor-product pair `K⊗M + M⊗K`, `M⊗M`.
    Consistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemSpec {
    Diagonal(Vec<f64>),
    Laplacian1d { n: usize, h: f64, mass: MassKind },
    Laplacian2d { nx: usize, ny: usize, h: f64, mass: MassKind },
    MatrixMarket { a: PathBuf, b: Option<PathBuf> },
}

pub fn generate_problem(spec: &ProblemSpec) -> Result<SymmetricPencil> {
    match spec {
        ProblemSpec::Diagonal(lambdas) => {
            if lambdas.len() < 3 {
                return Err(domain("a diagonal problem needs at least 3 eigenvalues"));
            }
            SymmetricPencil::from_diagonal(lambdas)
        }
        &ProblemSpec::Laplacian1d { n, h, mass } => {
            check_grid(n, h)?;
            let (a, b) = laplacian_1d(n, h, mass);
            SymmetricPencil::new(a, b)
        }
        &ProblemSpec::Laplacian2d { nx, ny, h, mass } => {
            check_grid(nx, h)?;
            check_grid(ny, h)?;
            let (a, b) = laplacian_2d(nx, ny, h, mass);
            SymmetricPencil::new(a, b)
        }
        ProblemSpec::MatrixMarket { a, b } => {
            let am = mtx::read_matrix_market_file(a)?;
            match b {
                Some(bp) => SymmetricPencil::new(am, mtx::read_matrix_market_file(bp)?),
                None => SymmetricPencil::standard(am),
            }
        }
    }
}

fn check_grid(n: usize, h: f64) -> Result<()> {
    if n < 2 {
        return Err(domain(format!("grid size must be at least 2, got {n}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(domain(format!("mesh width must be positive, got {h}")));
    }
    Ok(())
}

fn tridiag(n: usize, diag: f64, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    })
}

fn laplacian_1d(n: usize, h: f64, mass: MassKind) -> (DMatrix<f64>, DMatrix<f64>) {
    match mass {
        MassKind::Identity => (tridiag(n, 2.0, -1.0) / (h * h), DMatrix::identity(n, n)),
        MassKind::Consistent => (
            tridiag(n, 2.0, -1.0) / h,
            tridiag(n, 4.0, 1.0) * (h / 6.0),
        ),
    }
}

fn laplacian_2d(nx: usize, ny: usize, h: f64, mass: MassKind) -> (DMatrix<f64>, DMatrix<f64>) {
    let (kx, mx) = laplacian_1d(nx, h, mass);
    let (ky, my) = laplacian_1d(ny, h, mass);
    let a = ky.kronecker(&mx) + my.kronecker(&kx);
    let b = my.kronecker(&mx);
    (a, b)
}

/// Closed-form eigenvalues (ascending) of the 1D Laplacian pencils.
pub fn laplacian_1d_eigenvalues(n: usize, h: f64, mass: MassKind) -> Vec<f64> {
    let mut v: Vec<f64> = (1..=n)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::PI / (n as f64 + 1.0);
            match mass {
                MassKind::Identity => 4.0 * (0.5 * theta).sin().powi(2) / (h * h),
                MassKind::Consistent => 6.0 * (1.0 - theta.cos()) / (h * h * (2.0 + theta.cos())),
            }
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Spectrum of `n` values drawn log-uniformly from `[lo, hi]`, sorted.
pub fn random_log_uniform_spectrum<R: Rng + ?Sized>(
    n: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n)
        .map(|_| (llo + (lhi - llo) * rng.random::<f64>()).exp())
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

impl FromStr for MassKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "fd" => Ok(MassKind::Identity),
            "fem" | "consistent" => Ok(MassKind::Consistent),
            other => Err(domain(format!("unknown mass matrix '{other}'"))),
        }
    }
}

/// Parses `diagonal:1,2,4`, `laplacian1d:N[:fem][:h=H]`,
/// `laplacian2d:NXxNY[:fem][:h=H]` and `mtx:A.mtx[,B.mtx]`.
impl FromStr for ProblemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| domain(format!("problem '{s}' must look like kind:params")))?;
        let bad = |what: &str| domain(format!("invalid {what} in problem '{s}'"));
        match kind {
            "diagonal" => {
                let lambdas = rest
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| bad("eigenvalue")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ProblemSpec::Diagonal(lambdas))
            }
            "laplacian1d" | "laplacian2d" => {
                let mut parts = rest.split(':');
                let size = parts.next().unwrap_or_default();
                let mut h = 1.0;
                let mut mass = MassKind::Identity;
                for opt in parts {
                    if let Some(v) = opt.strip_prefix("h=") {
                        h = v.parse().map_err(|_| bad("mesh width"))?;
                    } else {
                        mass = opt.parse()?;
                    }
                }
                if kind == "laplacian1d" {
                    let n = size.parse().map_err(|_| bad("grid size"))?;
                    Ok(ProblemSpec::Laplacian1d { n, h, mass })
                } else {
                    let (x, y) = size.split_once('x').ok_or_else(|| bad("grid NXxNY"))?;
                    Ok(ProblemSpec::Laplacian2d {
                        nx: x.parse().map_err(|_| bad("grid size"))?,
                        ny: y.parse().map_err(|_| bad("grid size"))?,
                        h,
                        mass,
                    })
                }
            }
            "mtx" => {
                let mut paths = rest.split(',');
                let a = PathBuf::from(paths.next().unwrap_or_default());
                let b = paths.next().map(PathBuf::from);
                Ok(ProblemSpec::MatrixMarket { a, b })
            }
            other => Err(domain(format!("unknown problem kind '{other}'"))),
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mass_suffix = |m: &MassKind| match m {
            MassKind::Identity => "",
            MassKind::Consistent => ":fem",
        };
        match self {
            ProblemSpec::Diagonal(l) => {
                let parts: Vec<String> = l.iter().map(|v| v.to_string()).collect();
                write!(f, "diagonal:{}", parts.join(","))
            }
            ProblemSpec::Laplacian1d { n, h, mass } => {
                write!(f, "laplacian1d:{n}{}:h={h}", mass_suffix(mass))
            }
            ProblemSpec::Laplacian2d { nx, ny, h, mass } => {
                write!(f, "laplacian2d:{nx}x{ny}{}:h={h}", mass_suffix(mass))
            }
            ProblemSpec::MatrixMarket { a, b } => match b {
                Some(b) => write!(f, "mtx:{},{}", a.display(), b.display()),
                None => write!(f, "mtx:{}", a.display()),
            },
        }
    }
}
