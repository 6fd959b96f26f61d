//! Randomized check that the poorest PSD convergence on a Rayleigh-quotient
//! level set is attained in a three-dimensional invariant subspace.
//!
//! Outer level: Nelder–Mead over the level set `μ(x) = μ₀` from random
//! restarts. Inner level: the smallest larger-Ritz value of `span{x, u}` over
//! admissible directions `u = cos φ′·r̂ + sin φ′·w`, `w ⟂ {x, r}`,
//! `φ′ ≤ arcsin γ`. The result is compared against the 3D worst case of
//! every eigen-triple, computed with the closed-form worst direction.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{shifted_gap, worst_direction, ConeSpec};
use crate::error::{domain, Error, Result};
use crate::linalg::larger_eigenvalue_2x2;
use crate::pencil::Spectrum;

/// A component is significant above this fraction of the largest one.
pub const SIGNIFICANT_RTOL: f64 = 1e-6;
/// Allowed amount by which the search may undercut the 3D worst value.
pub const SEARCH_TOL: f64 = 1e-6;

const INNER_GRID: usize = 48;
const INNER_FRACTIONS: [f64; 2] = [0.5, 1.0];
const OUTER_MAX_ITERS: u64 = 600;
const TRIPLE_GRID: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub gamma: f64,
    pub mu0: f64,
    /// `μ_{i+1} < μ₀ < μ_i`, 0-based.
    pub interval_index: usize,
    pub restarts: usize,
    /// Smallest `μ′` found by the search.
    pub best_value: f64,
    /// The minimizing unit iterate, signs reduced to nonnegative.
    pub best_x: Vec<f64>,
    pub significant_components: usize,
    /// Smallest 3D worst value over all triples `μ_j > μ₀ > μ_l`.
    pub three_d_value: f64,
    pub three_d_triple: [usize; 3],
    /// 3D worst value on the triple `(i, i+1, n)`.
    pub interval_triple_value: f64,
    /// `best_value − three_d_value`; negative beyond [`SEARCH_TOL`] would
    /// contradict the 3D reduction.
    pub margin: f64,
}

impl ConcentrationReport {
    pub fn consistent(&self) -> bool {
        self.margin >= -SEARCH_TOL
    }

    pub fn concentrated(&self) -> bool {
        self.significant_components <= 3
    }
}

struct Problem<'a> {
    mus: &'a [f64],
    mu0: f64,
    sin_phi: f64,
}

impl Problem<'_> {
    /// Scales the components above and below `μ₀` separately so that
    /// `Σ(μ_k − μ₀)x_k² = 0`, then normalizes.
    fn to_level_set(&self, z: &[f64]) -> Option<Vec<f64>> {
        let (mut p, mut q) = (0.0, 0.0);
        for (zk, mk) in z.iter().zip(self.mus) {
            let g = mk - self.mu0;
            if g > 0.0 {
                p += g * zk * zk;
            } else {
                q -= g * zk * zk;
            }
        }
        if !(p > 0.0 && q > 0.0) {
            return None;
        }
        let (sp, sq) = (p.sqrt(), q.sqrt());
        let mut x: Vec<f64> = z
            .iter()
            .zip(self.mus)
            .map(|(zk, mk)| if *mk > self.mu0 { zk / sp } else { zk / sq })
            .collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v = v.abs() / norm);
        Some(x)
    }

    /// Smallest larger-Ritz value over admissible directions for unit `x`.
    fn inner(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let w: Vec<f64> = x.iter().map(|v| v * v).collect();
        let mu_x: f64 = w.iter().zip(self.mus).map(|(a, b)| a * b).sum();
        let r: Vec<f64> = (0..n).map(|k| shifted_gap(self.mus, &w, k) * x[k]).collect();
        let rn = norm(&r);
        if rn == 0.0 {
            return mu_x;
        }
        let r_hat: Vec<f64> = r.iter().map(|v| v / rn).collect();
        let complement = orthogonal_complement(&[x.to_vec(), r_hat.clone()], n);

        let theta = |u: &[f64]| {
            let b: f64 = u.iter().zip(&r).map(|(a, c)| a * c).sum();
            let c: f64 = u.iter().zip(self.mus).map(|(a, m)| m * a * a).sum();
            larger_eigenvalue_2x2(mu_x, b, c)
        };
        let direction = |frac: f64, wv: &[f64]| -> Vec<f64> {
            let s = frac * self.sin_phi;
            let c = (1.0 - s * s).sqrt();
            (0..n).map(|k| c * r_hat[k] + s * wv[k]).collect()
        };
        let combine = |coef: &[f64]| -> Vec<f64> {
            let mut v = vec![0.0; n];
            for (ci, b) in coef.iter().zip(&complement) {
                for k in 0..n {
                    v[k] += ci * b[k];
                }
            }
            let nv = norm(&v);
            v.iter().map(|a| a / nv).collect()
        };

        let mut best = theta(&r_hat);
        match complement.len() {
            0 => {}
            1 => {
                for sgn in [1.0, -1.0] {
                    for f in INNER_FRACTIONS {
                        best = best.min(theta(&direction(f, &combine(&[sgn]))));
                    }
                }
            }
            2 => {
                let on_circle = |f: f64, beta: f64| theta(&direction(f, &combine(&[beta.cos(), beta.sin()])));
                let step = std::f64::consts::TAU / INNER_GRID as f64;
                let mut arg = (1.0, 0.0);
                for f in INNER_FRACTIONS {
                    for m in 0..INNER_GRID {
                        let beta = step * m as f64;
                        let v = on_circle(f, beta);
                        if v < best {
                            best = v;
                            arg = (f, beta);
                        }
                    }
                }
                let refined = golden_min(|b| on_circle(arg.0, b), arg.1 - step, arg.1 + step);
                best = best.min(refined);
            }
            _ => {
                let m = complement.len();
                let mut start = vec![0.0; m];
                start[0] = 1.0;
                let f_dir = |coef: &[f64]| {
                    INNER_FRACTIONS
                        .iter()
                        .map(|&f| theta(&direction(f, &combine(coef))))
                        .fold(f64::INFINITY, f64::min)
                };
                // Fibonacci-style spread on the sphere, then local descent
                for p in sphere_points(m, 256) {
                    let v = f_dir(&p);
                    if v < best {
                        best = v;
                        start = p;
                    }
                }
                if let Some(v) = nelder_mead(&f_dir, &start, 0.1, 300) {
                    best = best.min(v.0);
                }
            }
        }
        best
    }

    fn objective(&self, z: &[f64]) -> f64 {
        match self.to_level_set(z) {
            Some(x) => self.inner(&x),
            None => f64::MAX,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Orthonormal basis of the complement of `span(vs)` by Gram–Schmidt on the
/// coordinate vectors.
fn orthogonal_complement(vs: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    let candidates = vs.iter().cloned().chain((0..n).map(|k| {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        e
    }));
    for (idx, mut v) in candidates.enumerate() {
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= p * c);
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            let u: Vec<f64> = v.iter().map(|a| a / nv).collect();
            if idx >= vs.len() {
                out.push(u.clone());
            }
            basis.push(u);
        }
        if basis.len() == n {
            break;
        }
    }
    out
}

fn sphere_points(m: usize, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ef);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let nv = norm(&v);
            v.iter().map(|a| a / nv).collect()
        })
        .collect()
}

struct Scalar<F>(F);

impl<F: Fn(f64) -> f64> CostFunction for Scalar<F> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, p: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.0)(*p))
    }
}

struct Multi<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Multi<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.0)(p))
    }
}

fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let fallback = f(0.5 * (lo + hi));
    let Ok(solver) = GoldenSectionSearch::new(lo, hi).and_then(|s| s.with_tolerance(1e-10)) else {
        return fallback;
    };
    Executor::new(Scalar(&f), solver)
        .configure(|s| s.param(0.5 * (lo + hi)).max_iters(120))
        .run()
        .map(|res| res.state().get_best_cost())
        .unwrap_or(fallback)
        .min(fallback)
}

fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], scale: f64, max_iters: u64) -> Option<(f64, Vec<f64>)> {
    let mut simplex = vec![start.to_vec()];
    for k in 0..start.len() {
        let mut p = start.to_vec();
        p[k] += scale;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).ok()?;
    let res = Executor::new(Multi(&f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .ok()?;
    let state = res.state();
    Some((state.get_best_cost(), state.get_best_param()?.clone()))
}

/// Worst 3D value on the eigen-triple `(j, k, l)` (descending μ) at level
/// `μ₀`: minimum over the level-set curve of the larger Ritz value along
/// the closed-form worst direction.
pub(crate) fn triple_worst_value(mus3: [f64; 3], gamma: f64, mu0: f64) -> Result<f64> {
    let [mj, mk, ml] = mus3;
    if !(mj > mu0 && mu0 > ml && mu0 != mk) {
        return Err(domain("μ₀ must lie strictly between μ_j and μ_l and differ from μ_k"));
    }
    let point = |psi: f64| -> Vector3<f64> {
        let (c, s) = (psi.cos(), psi.sin());
        if mu0 < mk {
            Vector3::new(c / (mj - mu0).sqrt(), s / (mk - mu0).sqrt(), 1.0 / (mu0 - ml).sqrt())
        } else {
            Vector3::new(1.0 / (mj - mu0).sqrt(), c / (mu0 - mk).sqrt(), s / (mu0 - ml).sqrt())
        }
    };
    let value = |psi: f64| -> f64 {
        let eval = || -> Result<f64> {
            let cone = ConeSpec::new(mus3, point(psi), gamma)?;
            let d = worst_direction(&cone)?;
            cone.larger_ritz(&d)
        };
        eval().unwrap_or(f64::INFINITY)
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let step = half_pi / TRIPLE_GRID as f64;
    let (mut best, mut arg) = (f64::INFINITY, 0.0);
    for m in 0..=TRIPLE_GRID {
        let psi = step * m as f64;
        let v = value(psi);
        if v < best {
            best = v;
            arg = psi;
        }
    }
    let lo = (arg - step).max(0.0);
    let hi = (arg + step).min(half_pi);
    Ok(best.min(golden_min(value, lo, hi)))
}

/// Runs the randomized two-level search on `diag(μ)` at level `μ₀`.
pub fn three_d_concentration_check(
    spectrum: &Spectrum,
    gamma: f64,
    mu0: f64,
    n_outer: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    let mus = spectrum.mus();
    let n = mus.len();
    if !(3..=6).contains(&n) {
        return Err(domain(format!("the concentration check runs for 3 ≤ n ≤ 6, got {n}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(domain(format!("γ must lie in [0, 1), got {gamma}")));
    }
    if n_outer == 0 {
        return Err(domain("need at least one restart"));
    }
    let i = (0..n - 1)
        .find(|&i| mus[i] > mu0 && mu0 > mus[i + 1])
        .ok_or_else(|| domain(format!("μ₀ = {mu0} is not strictly inside an eigenvalue interval")))?;

    let problem = Problem {
        mus,
        mu0,
        sin_phi: gamma,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..n_outer {
        let z0: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let found = nelder_mead(|z| problem.objective(z), &z0, 0.5, OUTER_MAX_ITERS)
            .ok_or_else(|| Error::Numeric("Nelder–Mead failed".into()))?;
        if best.as_ref().is_none_or(|b| found.0 < b.0) {
            best = Some(found);
        }
    }
    let (best_value, z) = best.expect("n_outer ≥ 1");
    let best_x = problem
        .to_level_set(&z)
        .ok_or_else(|| Error::Numeric("optimizer left the level set".into()))?;
    let max_c = best_x.iter().fold(0.0f64, |a, b| a.max(*b));
    let significant_components = best_x.iter().filter(|v| **v > SIGNIFICANT_RTOL * max_c).count();

    let mut three_d_value = f64::INFINITY;
    let mut three_d_triple = [0, 0, 0];
    for j in 0..n {
        for k in j + 1..n {
            for l in k + 1..n {
                if !(mus[j] > mu0 && mu0 > mus[l]) || mus[k] == mu0 {
                    continue;
                }
                let v = triple_worst_value([mus[j], mus[k], mus[l]], gamma, mu0)?;
                if v < three_d_value {
                    three_d_value = v;
                    three_d_triple = [j, k, l];
                }
            }
        }
    }
    let interval_triple_value = if i + 2 < n {
        triple_worst_value([mus[i], mus[i + 1], mus[n - 1]], gamma, mu0)?
    } else {
        f64::NAN
    };
    Ok(ConcentrationReport {
        n,
        gamma,
        mu0,
        interval_index: i,
        restarts: n_outer,
        best_value,
        best_x,
        significant_components,
        three_d_value,
        three_d_triple,
        interval_triple_value,
        margin: best_value - three_d_value,
    })
}
