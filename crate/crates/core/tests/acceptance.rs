//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Runs without the libtest harness so the summary is always printed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use pinvit_core::bounds::Verdict;
use pinvit_core::conelab::{
    brute_force_cone_min, extremal_directions, householder_reduce, ritz_on_segment,
    three_d_concentration_check, worst_case_instance, worst_direction, ConeSpec, WorstCaseSetup,
};
use pinvit_core::iterate::{pinvit1_step, psd_step, run, SolverKind, StopCriteria};
use pinvit_core::pencil::{rayleigh, SymmetricPencil};
use pinvit_core::precond::{synthetic_gamma_preconditioner, Preconditioner, SyntheticMode};
use pinvit_core::problem::random_log_uniform_spectrum;
use pinvit_core::pencil::Spectrum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_pencil, random_vector, rel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const GAMMAS: [f64; 4] = [0.0, 0.3, 0.6, 0.9];

/// Certified sweep over 200 seeded diagonal pencils (n = 20, spectra
/// log-uniform in [1, 10³]).
fn certified_sweep(kind: SolverKind) -> (usize, usize, usize, usize) {
    let stop = StopCriteria {
        max_steps: 500,
        residual_tol: 1e-10,
        delta_tol: Some(1e-10),
    };
    let (mut steps, mut violations, mut passed, mut uncertified) = (0, 0, 0, 0);
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + trial);
        let gamma = GAMMAS[trial as usize % 4];
        let lambdas = random_log_uniform_spectrum(20, 1.0, 1e3, &mut rng);
        let pencil = SymmetricPencil::from_diagonal(&lambdas).unwrap();
        let t = synthetic_gamma_preconditioner(pencil.diagonal_form(), gamma, trial, SyntheticMode::Random)
            .unwrap();
        let x0 = random_vector(20, &mut rng);
        let out = run(&pencil, Some(&t), &x0, kind, &stop).unwrap();
        for r in &out.records[1..] {
            steps += 1;
            match &r.bound {
                Some(b) if b.verdict == Verdict::Violated => violations += 1,
                Some(b) if b.verdict == Verdict::PassedLambdaI => passed += 1,
                Some(_) => {}
                None => uncertified += 1,
            }
            if r.monotonicity_violated {
                violations += 1;
            }
        }
    }
    (steps, violations, passed, uncertified)
}

fn criterion_1() -> Outcome {
    let (steps, violations, passed, uncertified) = certified_sweep(SolverKind::Psd);
    outcome(
        violations == 0 && uncertified == 0 && steps > 0,
        format!("{steps} PSD steps, {violations} violations, {passed} passed λᵢ, {uncertified} uncertified"),
    )
}

fn criterion_2() -> Outcome {
    let (steps, violations, passed, uncertified) = certified_sweep(SolverKind::Pinvit1);
    outcome(
        violations == 0 && uncertified == 0 && steps > 0,
        format!("{steps} PINVIT(1) steps, {violations} violations, {passed} passed λᵢ, {uncertified} uncertified"),
    )
}

fn criterion_3() -> Outcome {
    // hand value: κ = 4/9, γ = 1/2 gives σ = (4/9 + 7/9)/(14/9 + 2/9) = 11/16
    let hand = (11.0f64 / 16.0).powi(2);
    let mut ok = (hand - 0.47265625).abs() == 0.0;
    let mut worst_gap = 0.0f64;
    let mut lines = Vec::new();
    for mus in [[1.0, 0.5, 0.1], [2.0, 1.0, 0.25]] {
        for gamma in [0.5, 0.2, 0.8] {
            let setup = WorstCaseSetup::at_t1(mus, gamma, 1e-8).unwrap();
            let inst = worst_case_instance(&setup).unwrap();
            let gap = (inst.measured_ratio - inst.predicted_ratio).abs() / inst.predicted_ratio;
            worst_gap = worst_gap.max(gap);
            ok &= gap < 1e-3 && inst.measured_ratio <= inst.predicted_ratio * (1.0 + 1e-12);
            if mus == [1.0, 0.5, 0.1] && gamma == 0.5 {
                ok &= (inst.predicted_ratio - hand).abs() < 1e-15;
            }
            lines.push(format!("μ={mus:?},γ={gamma}: {:.9}/{:.9}", inst.measured_ratio, inst.predicted_ratio));
        }
    }
    outcome(ok, format!("max relative gap {worst_gap:.2e}; {}", lines.join("; ")))
}

fn criterion_4() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + trial);
        let n = 10;
        let pencil = random_pencil(n, 50.0, 5.0, &mut rng);
        let gamma = 0.95 * rng.random::<f64>();
        let t = synthetic_gamma_preconditioner(pencil.diagonal_form(), gamma, trial, SyntheticMode::Random)
            .unwrap();
        let x = random_vector(n, &mut rng);
        let a = psd_step(&pencil, &t, &x).unwrap();
        let b = pinvit1_step(&pencil, &t, &x).unwrap();
        worst = worst.max(a.rho.rho - b.rho.rho);
    }
    outcome(
        worst <= 1e-12,
        format!("max ρ_PSD − ρ_PINVIT1 over 100 triples = {worst:.3e}"),
    )
}

/// Strictly decreasing μ with gaps of at least 0.05.
fn random_descending_mus<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let mut m = [0.0; 3];
        for v in &mut m {
            *v = 0.05 + rng.random::<f64>();
        }
        m.sort_by(|a, b| b.total_cmp(a));
        if m[0] - m[1] >= 0.05 && m[1] - m[2] >= 0.05 {
            return m;
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Level {
    Any,
    /// `μ₂ < μ(x) < μ₁`, the setting of the endpoint and worst-direction
    /// lemmas.
    Upper,
    Lower,
}

fn random_cone<R: Rng>(rng: &mut R, nonneg: bool, level: Level) -> ConeSpec {
    loop {
        let mus = random_descending_mus(rng);
        let x = Vector3::from_fn(|_, _| {
            let v = 0.05 + rng.random::<f64>();
            if nonneg || rng.random::<bool>() {
                v
            } else {
                -v
            }
        });
        let gamma = 0.05 + 0.9 * rng.random::<f64>();
        let cone = ConeSpec::new(mus, x, gamma).unwrap();
        let upper = cone.mu_x() > mus[1];
        match level {
            Level::Any => return cone,
            Level::Upper if upper => return cone,
            Level::Lower if !upper => return cone,
            _ => {}
        }
    }
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(30_000 + trial);
        let cone = random_cone(&mut rng, true, Level::Upper);
        let d = worst_direction(&cone).unwrap();
        let closed = cone.larger_ritz(&d).unwrap();
        let brute = brute_force_cone_min(&cone, 10_000).unwrap();
        worst = worst.max((closed - brute.value).abs());
    }
    outcome(worst <= 1e-8, format!("max |θ₂(worst) − brute-force min| = {worst:.3e}"))
}

/// Minimum of the larger Ritz value over a 1001-point grid on the segment
/// `d₂ → d₁`, with the grid index, and the worst 2×2 vs projection mismatch.
fn segment_grid_min(cone: &ConeSpec) -> (f64, usize, f64) {
    let mut best = (f64::INFINITY, 0usize);
    let mut agree = 0.0f64;
    for m in 0..=1000usize {
        let s = ritz_on_segment(cone, m as f64 / 1000.0).unwrap();
        agree = agree.max(rel(s.closed_form, s.projected));
        if s.closed_form < best.0 {
            best = (s.closed_form, m);
        }
    }
    (best.0, best.1, agree)
}

fn criterion_6() -> Outcome {
    let mut interior = 0;
    let mut agree = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + trial);
        let cone = random_cone(&mut rng, true, Level::Upper);
        let (_, at, a) = segment_grid_min(&cone);
        agree = agree.max(a);
        if at != 0 && at != 1000 {
            interior += 1;
        }
    }
    // Below μ₂ an interior minimum may occur only where the Ritz vector is
    // the eigenvector of μ₂, so the segment never drops below μ₂.
    let mut below = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(45_000 + trial);
        let cone = random_cone(&mut rng, true, Level::Lower);
        let (value, at, a) = segment_grid_min(&cone);
        agree = agree.max(a);
        if at != 0 && at != 1000 && value < cone.mus()[1] * (1.0 - 1e-12) {
            below += 1;
        }
    }
    outcome(
        interior == 0 && below == 0 && agree <= 1e-12,
        format!(
            "{interior}/100 interior minima for μ₂ < μ(x); {below}/100 below μ₂ for μ(x) < μ₂; 2×2 vs Rayleigh–Ritz max rel diff {agree:.2e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let (mut off, mut norm_id, mut sign) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + trial);
        let cone = random_cone(&mut rng, trial % 2 == 0, Level::Any);
        let (x, r, mu) = (*cone.x(), *cone.residual(), cone.mu_x());
        let g = cone.gamma();
        let (d1, d2) = extremal_directions(&cone).unwrap();
        let bx = cone.center();
        let expect_off = (1.0 - g * g).sqrt() * r.norm();
        for d in [d1, d2] {
            let dbar = (d - x * mu) / (d - x * mu).norm();
            off = off.max(rel(dbar.dot(&bx), expect_off));
            norm_id = norm_id.max(rel((d - x * mu).norm_squared(), (1.0 - g * g) * r.norm_squared()));
        }
        let m = cone.mus();
        let lhs = r.dot(&cone.apply_b(&x.cross(&r)));
        let rhs = -x[0] * x[1] * x[2] * (m[0] - m[1]) * (m[0] - m[2]) * (m[1] - m[2]);
        sign = sign.max(rel(lhs, rhs));
    }
    outcome(
        off <= 1e-12 && norm_id <= 1e-12 && sign <= 1e-12,
        format!("max rel errors: off-diagonal {off:.2e}, norm identity {norm_id:.2e}, sign identity {sign:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let stop = StopCriteria {
        max_steps: 300,
        residual_tol: 1e-10,
        delta_tol: Some(1e-10),
    };
    let (mut steps, mut bad, mut worst_ratio) = (0, 0, 0.0f64);
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(60_000 + trial);
        let pencil = random_pencil(12, 100.0, 4.0, &mut rng);
        let t = Preconditioner::exact_inverse(&pencil);
        let x0 = random_vector(12, &mut rng);
        for kind in [SolverKind::Psd, SolverKind::Invit2] {
            let out = run(&pencil, Some(&t), &x0, kind, &stop).unwrap();
            bad += usize::from(out.certified_gamma != Some(0.0));
            let spectrum = pencil.spectrum();
            for r in &out.records[1..] {
                steps += 1;
                let Some(b) = &r.bound else {
                    bad += 1;
                    continue;
                };
                // independent factor: (κ/(2−κ))² on the step's interval
                let l = spectrum.lambdas();
                let (i, n) = (b.interval_index, l.len());
                let kappa = if i + 2 < n {
                    l[i] * (l[n - 1] - l[i + 1]) / (l[i + 1] * (l[n - 1] - l[i]))
                } else {
                    0.0
                };
                let factor = (kappa / (2.0 - kappa)).powi(2);
                bad += usize::from(rel(b.sigma_squared, factor) > 1e-12);
                if b.verdict == Verdict::Holds {
                    worst_ratio = worst_ratio.max(b.ratio / factor);
                }
                bad += usize::from(b.verdict == Verdict::Violated || r.monotonicity_violated);
            }
        }
    }
    outcome(
        bad == 0,
        format!("{steps} exact-inverse steps, {bad} failures, max ratio/(κ/(2−κ))² = {worst_ratio:.6}"),
    )
}

fn criterion_9() -> Outcome {
    let mut scale_err = 0.0f64;
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(70_000 + trial);
        let pencil = random_pencil(8, 20.0, 3.0, &mut rng);
        let gamma = 0.9 * rng.random::<f64>();
        let t = synthetic_gamma_preconditioner(pencil.diagonal_form(), gamma, trial, SyntheticMode::Random)
            .unwrap();
        let x = random_vector(8, &mut rng);
        let base = psd_step(&pencil, &t, &x).unwrap();
        for c in [0.1, 10.0] {
            let s = psd_step(&pencil, &t.scaled(c).unwrap(), &x).unwrap();
            scale_err = scale_err.max(rel(s.rho.rho, base.rho.rho));
            scale_err = scale_err.max((&s.x - &base.x).norm().min((&s.x + &base.x).norm()));
        }
    }
    let mut flip_err = 0.0f64;
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(80_000 + trial);
        let cone = random_cone(&mut rng, false, Level::Any);
        let xs = DVector::from_column_slice(cone.x().as_slice());
        let (reduced, _) = householder_reduce(&xs);
        let flipped = ConeSpec::new(cone.mus(), Vector3::from_column_slice(reduced.as_slice()), cone.gamma())
            .unwrap();
        let a = brute_force_cone_min(&cone, 4000).unwrap();
        let b = brute_force_cone_min(&flipped, 4000).unwrap();
        flip_err = flip_err.max((a.value - b.value).abs());
        flip_err = flip_err.max((cone.mu_x() - flipped.mu_x()).abs());
    }
    outcome(
        scale_err <= 1e-12 && flip_err <= 1e-10,
        format!("T → cT max deviation {scale_err:.2e}; sign-flip cone-min deviation {flip_err:.2e}"),
    )
}

fn criterion_10() -> Outcome {
    let spectrum = Spectrum::from_mus(vec![1.0, 0.6, 0.3, 0.1]).unwrap();
    let rep = three_d_concentration_check(&spectrum, 0.5, 0.8, 200, 90_000).unwrap();
    println!("    concentration report: {}", report_line(&rep));
    let mut rng = ChaCha8Rng::seed_from_u64(90_001);
    let mut mus: Vec<f64> = (0..4).map(|_| 0.05 + rng.random::<f64>()).collect();
    mus.sort_by(|a, b| b.total_cmp(a));
    let mu0 = 0.5 * (mus[1] + mus[2]);
    let spectrum2 = Spectrum::from_mus(mus).unwrap();
    let rep2 = three_d_concentration_check(&spectrum2, 0.3, mu0, 200, 90_002).unwrap();
    println!("    concentration report: {}", report_line(&rep2));
    outcome(
        rep.consistent() && rep2.consistent(),
        format!(
            "significant components {} and {}; margins {:.2e} and {:.2e} (report-only for concentration)",
            rep.significant_components, rep2.significant_components, rep.margin, rep2.margin
        ),
    )
}

fn report_line(r: &pinvit_core::conelab::ConcentrationReport) -> String {
    format!(
        "n={} γ={} μ₀={:.4} best={:.12} 3D={:.12} triple={:?} (i,i+1,n)={:.12} x={:?} significant={}",
        r.n,
        r.gamma,
        r.mu0,
        r.best_value,
        r.three_d_value,
        r.three_d_triple,
        r.interval_triple_value,
        r.best_x.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
        r.significant_components
    )
}

fn criterion_11() -> Outcome {
    let mut worst = 0.0f64;
    let mut rq = 0.0f64;
    for n in 2..=12usize {
        for rep in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100_000 + 100 * n as u64 + rep);
            let pencil = random_pencil(n, 1e3, 1e2, &mut rng);
            let form = pencil.diagonal_form();
            // independent route: B = LLᵀ, eigenvalues of L⁻¹AL⁻ᵀ by nalgebra
            let l = pencil.b().clone().cholesky().unwrap().l();
            let li = l.try_inverse().unwrap();
            let m: DMatrix<f64> = &li * pencil.a() * li.transpose();
            let m = (&m + m.transpose()) * 0.5;
            let mut reference: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (a, b) in form.spectrum().lambdas().iter().zip(&reference) {
                worst = worst.max(rel(*a, *b));
            }
            // congruence maps the pencil onto (I, diag μ)
            let z = &form.inverse_basis;
            let za = z.transpose() * pencil.a() * z;
            let zb = z.transpose() * pencil.b() * z;
            let id = DMatrix::<f64>::identity(n, n);
            let mu = DMatrix::from_diagonal(&DVector::from_column_slice(&form.mu_diag));
            worst = worst.max((za - id).amax()).max((zb - mu).amax() / form.mu_diag[0]);
            let x = random_vector(n, &mut rng);
            let y = form.to_transformed(&x);
            let rt = form.transformed_pencil();
            rq = rq.max(rel(rayleigh(&pencil, &x).unwrap().rho, rayleigh(&rt, &y).unwrap().rho));
            rq = rq.max((form.to_original(&y) - &x).norm() / x.norm());
        }
    }
    outcome(
        worst <= 1e-10 && rq <= 1e-10,
        format!("max rel eigenvalue/congruence error {worst:.2e}; Rayleigh/round-trip error {rq:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 11] = [
        ("PSD bound validity", criterion_1, Some(Duration::from_secs(10))),
        ("PINVIT(1) bound validity", criterion_2, None),
        ("sharpness at Δ=1e-8, t=t₁", criterion_3, Some(Duration::from_secs(1))),
        ("hierarchy dominance", criterion_4, None),
        ("worst-direction oracle", criterion_5, None),
        ("endpoint extremality", criterion_6, None),
        ("algebraic identities", criterion_7, None),
        ("γ=0 reduction", criterion_8, None),
        ("scale and reflection invariance", criterion_9, None),
        ("3D concentration", criterion_10, None),
        ("transform correctness", criterion_11, None),
    ];
    let mut failures = 0;
    for (k, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_budget = budget.is_none_or(|b| elapsed <= b);
        let pass = out.pass && in_budget;
        failures += usize::from(!pass);
        println!(
            "criterion {:>2} {:<32} {}  [{:.3}s{}] {}",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_budget { "" } else { " over budget" },
            out.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
