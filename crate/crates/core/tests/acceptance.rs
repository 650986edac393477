//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use lyapsync::experiments::{
    default_suite, run_bound_comparison, run_concentration, run_pullback, run_sync, ExperimentPlan, InitialSampler,
};
use lyapsync::field::{Field, GridSpec};
use lyapsync::integrator::SimConfig;
use lyapsync::lyapunov::{lambda_plus, top_lyapunov, LyapunovOptions};
use lyapsync::potential::{builtin_catalog, double_well, quadratic, sombrero, tilted_double_well, two_sphere};
use lyapsync::selftest::run_selftest;
use lyapsync::theory::{
    self, bound_main2, constants_main2, ellis_rosen_first_order, gaussian_moments, theta_nondegenerate, weights,
    Functional, Kappa0Reading,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn grid(n: usize) -> GridSpec {
    GridSpec::new(n).unwrap()
}

fn generic_tangent(n: usize, g: GridSpec) -> Field {
    Field::from_fn(n, g, |c, x| 1.0 + 0.5 * (2.0 * PI * (x + 0.1 * c as f64)).cos())
}

fn closed_form_constants() -> Outcome {
    let spec = sombrero(3);
    let (c_max, kappa0) = constants_main2(&spec, 0.5, Kappa0Reading::Maximum).unwrap();
    let b = bound_main2(&spec, 8.0, 0.5, Kappa0Reading::Maximum, theory::M_TRUNC_DEFAULT).unwrap();
    let err = [c_max - 0.5, kappa0 - 4.0, b.main_term + 1.0, b.error_term - 0.125, b.total + 0.875]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    outcome(
        err <= 1e-12,
        format!(
            "C_max = {c_max}, kappa0 = {kappa0}, bound = ({:.3}, {:+.3}, {:.3}), max error {err:.1e}",
            b.main_term, b.error_term, b.total
        ),
    )
}

fn determinant_weights() -> Outcome {
    let mut unit_err: f64 = 0.0;
    for n in 1..=3 {
        for kappa in [1.0, 8.0] {
            let t = theta_nondegenerate(&quadratic(n, 1.0), &vec![0.0; n], kappa, 10_000).unwrap();
            unit_err = unit_err.max((t.value - 1.0).abs());
        }
    }
    let mut drift: f64 = 0.0;
    for spec in builtin_catalog() {
        for kappa in [1.0, 8.0] {
            let (a, _) = theory::thetas_and_weights(&spec, kappa, 10_000).unwrap();
            let (b, _) = theory::thetas_and_weights(&spec, kappa, 20_000).unwrap();
            for (x, y) in a.iter().zip(&b) {
                drift = drift.max((x.value - y.value).abs() / y.value);
            }
        }
    }
    outcome(
        unit_err <= 1e-10 && drift <= 1e-8,
        format!("|theta - 1| = {unit_err:.1e} at identity Hessian, doubling M changes theta by {drift:.1e}"),
    )
}

fn gaussian_moment_values() -> Outcome {
    let spec = sombrero(3);
    let kappas = [1.0, 2.0, 4.0, 8.0, 16.0];
    let moments: Vec<_> = kappas.iter().map(|&k| gaussian_moments(&spec, 1.0, k, 10_000).unwrap()).collect();
    let exact = moments.iter().all(|m| m.var_tangent == 0.5 && m.fourth_tangent == 0.75);
    let monotone = moments.windows(2).all(|w| w[1].perp_sum < w[0].perp_sum);
    let bounded = moments
        .iter()
        .zip(&kappas)
        .all(|(m, k)| m.perp_sum <= (1.0 / (4.0 * PI * PI * k)) * (PI * PI / 3.0));
    let sums: Vec<String> = moments.iter().map(|m| format!("{:.5}", m.perp_sum)).collect();
    outcome(
        exact && monotone && bounded,
        format!("var = 1/2 and fourth = 3/4: {exact}; perp_sum over kappa in 1..16 = [{}]", sums.join(", ")),
    )
}

fn ellis_rosen_cross_check() -> Outcome {
    let spec = sombrero(3);
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, kappa) in [4.0, 8.0, 16.0].into_iter().enumerate() {
        let est = ellis_rosen_first_order(&spec, 1.0, kappa, Functional::F2, 128, 100_000, 40 + i as u64).unwrap();
        let z = (est.monte_carlo - est.analytic).abs() / est.stderr;
        ok &= z < 3.0;
        parts.push(format!("kappa {kappa}: {:.4} vs MC {:.4} (z = {z:.2})", est.analytic, est.monte_carlo));
    }
    outcome(ok, parts.join("; "))
}

fn exact_linear_lyapunov() -> Outcome {
    let g = grid(128);
    let mut cfg = SimConfig::new(quadratic(1, 1.0), g);
    cfg.kappa = 1.0;
    cfg.epsilon = 0.1;
    cfg.horizon = 200.0;
    cfg.seed = 5;
    let opts = LyapunovOptions { lambda_plus_every: None, ..Default::default() };
    let r = top_lyapunov(&cfg, &Field::zeros(1, g), &generic_tangent(1, g), &opts).unwrap();
    let tol = (3.0 * r.stderr).max(5e-3);
    let linear_ok = (r.lambda_top + 1.0).abs() <= tol;

    let g = grid(32);
    let mut cfg = SimConfig::new(double_well(), g);
    cfg.epsilon = 0.0;
    cfg.kappa = 1.0;
    cfg.dt = 2e-4;
    cfg.horizon = 20.0;
    let r2 = top_lyapunov(&cfg, &Field::constant(&[1.0], g), &generic_tangent(1, g), &opts).unwrap();
    let well_ok = (r2.lambda_top + 2.0).abs() <= 1e-3;
    outcome(
        linear_ok && well_ok,
        format!(
            "quadratic: {:.5} +- {:.1e} (tol {tol:.1e}); double well at eps = 0: {:.5}",
            r.lambda_top, r.stderr, r2.lambda_top
        ),
    )
}

fn ergodic_ordering() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for plan in default_suite() {
        let rows = run_bound_comparison(&plan).unwrap();
        for r in rows {
            let holds = r.ordering_holds();
            ok &= holds;
            parts.push(format!(
                "{} eps {}: {:.3} <= {:.3} + 3 x {:.3} {}",
                r.potential,
                r.epsilon,
                r.report.lambda_top,
                r.report.ergodic_lambda_plus.unwrap_or(f64::NAN),
                r.report.combined_stderr(),
                if holds { "ok" } else { "VIOLATED" }
            ));
        }
    }
    outcome(ok, parts.join("; "))
}

fn lambda_plus_oracle() -> Outcome {
    let g = grid(32);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let n = 1 + i % 3;
        let spec = match (n, i % 2) {
            (1, 0) => double_well(),
            (1, _) => tilted_double_well(),
            (_, 0) => sombrero(n),
            _ => two_sphere(n),
        };
        let kappa = rng.random_range(0.1..10.0);
        let amp = rng.random_range(0.2..1.5);
        let smooth = i % 4 < 2;
        let coeffs: Vec<f64> = (0..n * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rough: Vec<f64> = (0..n * 32).map(|_| rng.random_range(-amp..amp)).collect();
        let u = if smooth {
            Field::from_fn(n, g, |c, x| {
                let r = &coeffs[c * 9..(c + 1) * 9];
                let mut v = r[0];
                for m in 1..=4 {
                    let w = 2.0 * PI * m as f64 * x;
                    v += amp * (r[2 * m - 1] * w.cos() + r[2 * m] * w.sin()) / m as f64;
                }
                v
            })
        } else {
            Field::from_values(n, g, rough).unwrap()
        };
        let got = lambda_plus(&u, &spec, kappa).unwrap();
        let want = common::dense_lambda_plus(&u, &spec, kappa);
        worst = worst.max((got - want).abs());
    }
    outcome(worst <= 1e-6, format!("max |iterative - dense| over 200 fields: {worst:.1e}"))
}

fn sombrero_plan(horizon: f64) -> SimConfig {
    let g = grid(32);
    let mut cfg = SimConfig::new(sombrero(3), g);
    cfg.kappa = 8.0;
    cfg.epsilon = 0.05;
    cfg.rescaled = true;
    cfg.horizon = horizon;
    cfg
}

fn degenerate_sign() -> Outcome {
    let cfg = sombrero_plan(500.0);
    let g = cfg.grid;
    let opts = LyapunovOptions { lambda_plus_every: None, ..Default::default() };
    let reports: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            top_lyapunov(&c, &Field::constant(&[1.0, 0.0, 0.0], g), &generic_tangent(3, g), &opts).unwrap()
        })
        .collect();
    let negative = reports.iter().filter(|r| r.lambda_top + 3.0 * r.stderr < 0.0).count();
    let mean = reports.iter().map(|r| r.lambda_top).sum::<f64>() / 20.0;
    let bound = bound_main2(&sombrero(3), 8.0, 0.5, Kappa0Reading::Maximum, 10_000).unwrap().total;
    outcome(
        negative >= 18,
        format!("{negative}/20 seeds with lambda + 3 se < 0; mean rescaled exponent {mean:.3} (bound {bound:.3}, trend only)"),
    )
}

fn synchronization() -> Outcome {
    let mut cfg = sombrero_plan(100.0);
    cfg.stride = 1000;
    let mut plan = ExperimentPlan::new("sync", cfg);
    plan.seeds = (0..20).collect();
    plan.k_initial = 5;
    plan.sampler = InitialSampler::Ball { center: vec![0.0; 3], radius: 2.0, max_mode: 3 };
    let sync = run_sync(&plan).unwrap();
    let contracted = sync.iter().filter(|r| r.contraction() < 0.1).count();
    let pb = run_pullback(&plan, &[25.0, 50.0, 100.0]).unwrap();
    let monotone = pb.iter().filter(|r| r.monotone).count();
    let coalesced = pb.iter().filter(|r| r.diameters.iter().all(|&d| d <= 1e-13)).count();
    outcome(
        contracted >= 18 && monotone >= 16,
        format!(
            "final/initial diameter < 0.1 in {contracted}/20 seeds; pullback monotone in {monotone}/20 \
             ({coalesced}/20 already at the 1e-13 floor from t = -25)"
        ),
    )
}

fn concentration() -> Outcome {
    let g = grid(32);
    let mut cfg = SimConfig::new(double_well(), g);
    cfg.kappa = 1.0;
    cfg.horizon = 2000.0;
    cfg.stride = 10;
    let mut plan = ExperimentPlan::new("concentration", cfg);
    plan.epsilons = vec![0.2, 0.1, 0.05];
    plan.seeds = (0..20).collect();
    let table = run_concentration(&plan, 0.5).unwrap();
    let row = table.rows.iter().find(|r| r.epsilon == 0.1).unwrap();
    let occ_ok = row.occupations.iter().all(|o| (o - 0.5).abs() <= 0.05);
    let fractions: Vec<String> = table.rows.iter().map(|r| format!("{:.3}", r.fraction)).collect();
    outcome(
        occ_ok && table.monotone,
        format!(
            "occupations at eps 0.1: [{:.3}, {:.3}] +- {:.3} (weights {:?}); fraction within 0.5 for eps 0.2, 0.1, 0.05: [{}]",
            row.occupations[0],
            row.occupations[1],
            row.occupation_stderr[0],
            weights(&double_well(), 1.0, 10_000).unwrap(),
            fractions.join(", ")
        ),
    )
}

fn infrastructure() -> Outcome {
    let report = run_selftest();
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    outcome(
        report.passed(),
        format!("{} checks, failed: {:?}", report.checks.len(), failed),
    )
}

fn main() {
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let criteria: Vec<(usize, &str, Duration, fn() -> Outcome)> = vec![
        (1, "closed-form constants", Duration::from_millis(1), closed_form_constants),
        (2, "determinant weights", Duration::from_secs(1), determinant_weights),
        (3, "gaussian moments", Duration::from_secs(1), gaussian_moment_values),
        (4, "ellis-rosen cross-check", Duration::from_secs(60), ellis_rosen_cross_check),
        (5, "exact linear lyapunov", Duration::from_secs(120), exact_linear_lyapunov),
        (6, "ergodic ordering", Duration::from_secs(900), ergodic_ordering),
        (7, "lambda_plus oracle", Duration::from_secs(30), lambda_plus_oracle),
        (8, "degenerate-regime sign", Duration::from_secs(1800), degenerate_sign),
        (9, "synchronization", Duration::from_secs(1800), synchronization),
        (10, "concentration and weights", Duration::from_secs(1200), concentration),
        (11, "infrastructure invariants", Duration::from_secs(60), infrastructure),
    ];
    let mut failures = 0;
    for (id, name, budget, run) in criteria {
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = out.passed && in_time;
        failures += usize::from(!passed);
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.3} s of {:.3} s]",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
