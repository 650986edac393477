//! Quick invariant suite run by the `selftest` subcommand.

use crate::field::{self, Field, GridSpec};
use crate::integrator::{simulate, simulate_from, SimConfig};
use crate::lyapunov::{lambda_plus, top_lyapunov, LyapunovOptions};
use crate::output::trajectory_table;
use crate::potential;
use crate::theory::{self, Kappa0Reading};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize, grid: GridSpec) -> Field {
    let values = (0..n * grid.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Field::from_values(n, grid, values).expect("shape")
}

fn check(name: &'static str, f: impl FnOnce() -> std::result::Result<String, String>) -> Check {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Check { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn within(name: &str, err: f64, tol: f64) -> std::result::Result<String, String> {
    let msg = format!("{name} {err:.3e} (tol {tol:.0e})");
    if err <= tol { Ok(msg) } else { Err(msg) }
}

pub fn run_selftest() -> SelfTestReport {
    let mut checks = Vec::new();

    checks.push(check("dft_round_trip", || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for &len in &[8, 64, 256, 1024] {
            let grid = GridSpec::new(len).unwrap();
            let u = random_field(&mut rng, 3, grid);
            let back = field::idft(&field::dft(&u)).map_err(|e| e.to_string())?;
            let err = u.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(err);
        }
        within("max error", worst, 1e-12)
    }));

    checks.push(check("parseval", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for &len in &[8, 128, 512] {
            let grid = GridSpec::new(len).unwrap();
            let u = random_field(&mut rng, 2, grid);
            let lhs = field::l2_norm(&u).powi(2);
            let rhs: f64 = field::dft(&u).coeffs().iter().map(|c| c.norm_sqr()).sum();
            worst = worst.max((lhs - rhs).abs() / lhs);
        }
        within("relative error", worst, 1e-12)
    }));

    checks.push(check("heat_semigroup", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = GridSpec::new(64).unwrap();
        let u = random_field(&mut rng, 2, grid);
        let e = |r: crate::Result<Field>| r.map_err(|e| e.to_string());
        let a = e(field::heat_semigroup(&e(field::heat_semigroup(&u, 0.7, 0.01))?, 0.7, 0.02))?;
        let b = e(field::heat_semigroup(&u, 0.7, 0.03))?;
        let err = field::l2_norm(&a.sub(&b)) / field::l2_norm(&u);
        let same = e(field::heat_semigroup(&u, 0.7, 0.0))?;
        let id = field::l2_norm(&same.sub(&u)) / field::l2_norm(&u);
        within("relative error", err.max(id), 1e-12)
    }));

    checks.push(check("laplacian_eigenfunctions", || {
        let grid = GridSpec::new(32).unwrap();
        let mut worst: f64 = 0.0;
        for m in 1..16 {
            let w = 2.0 * std::f64::consts::PI * m as f64;
            let u = Field::from_fn(1, grid, |_, x| (w * x).cos());
            let lap = field::laplacian(&u);
            let err = field::l2_norm(&lap.axpy(w * w, &u)) / (w * w);
            worst = worst.max(err);
        }
        within("relative error", worst, 1e-12)
    }));

    checks.push(check("gradient_finite_differences", || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut worst: f64 = 0.0;
        for spec in potential::builtin_catalog() {
            for _ in 0..20 {
                let z: Vec<f64> = (0..spec.n).map(|_| rng.random_range(-1.5..1.5)).collect();
                let g = spec.grad_v(&z);
                for i in 0..spec.n {
                    let h = 1e-5;
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[i] += h;
                    zm[i] -= h;
                    let fd = (spec.v_eval(&zp) - spec.v_eval(&zm)) / (2.0 * h);
                    worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
                }
            }
        }
        within("relative error", worst, 1e-7)
    }));

    checks.push(check("flow_property", || {
        let grid = GridSpec::new(32).unwrap();
        let mut cfg = SimConfig::new(potential::sombrero(3), grid);
        cfg.epsilon = 0.05;
        cfg.horizon = 0.2;
        cfg.seed = 11;
        cfg.stride = 1;
        cfg.keep_snapshots = true;
        let f = Field::from_fn(3, grid, |c, x| 0.5 + 0.3 * (6.0 * x + c as f64).sin());
        let full = simulate(&f, &cfg).map_err(|e| e.to_string())?;
        let mut first = cfg.clone();
        first.horizon = 0.08;
        let mid = simulate(&f, &first).map_err(|e| e.to_string())?;
        let mut second = cfg.clone();
        second.horizon = 0.12;
        let start = (0.08 / cfg.dt).round() as u64;
        let rest = simulate_from(mid.snapshots.last().unwrap(), &second, start).map_err(|e| e.to_string())?;
        if rest.snapshots.last() == full.snapshots.last() {
            Ok("split run is bit-identical".into())
        } else {
            Err("split run differs from the full run".into())
        }
    }));

    checks.push(check("reproducible_rerun", || {
        let grid = GridSpec::new(64).unwrap();
        let mut cfg = SimConfig::new(potential::double_well(), grid);
        cfg.epsilon = 0.1;
        cfg.kappa = 1.0;
        cfg.horizon = 0.5;
        cfg.seed = 7;
        cfg.stride = 10;
        let f = Field::constant(&[1.0], grid);
        let run = |cfg: &SimConfig| -> std::result::Result<Vec<u8>, String> {
            let t = simulate(&f, cfg).map_err(|e| e.to_string())?;
            trajectory_table(&t).to_csv_bytes().map_err(|e| e.to_string())
        };
        let a = run(&cfg)?;
        let b = run(&cfg)?;
        cfg.seed = 8;
        let c = run(&cfg)?;
        match (a == b, a == c) {
            (true, false) => Ok(format!("{} identical bytes", a.len())),
            (false, _) => Err("rerun with the same seed produced different bytes".into()),
            (true, true) => Err("different seeds produced identical output".into()),
        }
    }));

    checks.push(check("lambda_plus_dense", || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = GridSpec::new(16).unwrap();
        let mut worst: f64 = 0.0;
        for n in 1..=3 {
            let spec = if n == 1 { potential::double_well() } else { potential::sombrero(n) };
            for _ in 0..5 {
                let u = random_field(&mut rng, n, grid);
                let kappa = rng.random_range(0.1..4.0);
                let got = lambda_plus(&u, &spec, kappa).map_err(|e| e.to_string())?;
                let want = dense_lambda_plus(&u, &spec, kappa);
                worst = worst.max((got - want).abs() / (1.0 + want.abs()));
            }
        }
        within("relative error", worst, 1e-6)
    }));

    checks.push(check("linear_lyapunov", || {
        let grid = GridSpec::new(8).unwrap();
        let mut cfg = SimConfig::new(potential::quadratic(1, 1.0), grid);
        cfg.epsilon = 0.0;
        cfg.kappa = 1.0;
        cfg.horizon = 2.0;
        let f = Field::constant(&[0.3], grid);
        let h = Field::constant(&[1.0], grid);
        let opts = LyapunovOptions { lambda_plus_every: None, ..Default::default() };
        let r = top_lyapunov(&cfg, &f, &h, &opts).map_err(|e| e.to_string())?;
        let exact = (1.0 - cfg.dt).ln() / cfg.dt;
        within("error", (r.lambda_top - exact).abs(), 1e-10)
    }));

    checks.push(check("theory_constants", || {
        let spec = potential::sombrero(3);
        let b = theory::bound_main2(&spec, 8.0, 0.5, Kappa0Reading::Maximum, theory::M_TRUNC_DEFAULT)
            .map_err(|e| e.to_string())?;
        let m = theory::gaussian_moments(&spec, 1.0, 8.0, theory::M_TRUNC_DEFAULT).map_err(|e| e.to_string())?;
        let theta = theory::theta_nondegenerate(&potential::quadratic(2, 1.0), &[0.0, 0.0], 3.0, 10_000)
            .map_err(|e| e.to_string())?;
        let err = [
            b.main_term + 1.0,
            b.error_term - 0.125,
            b.total + 0.875,
            b.c_max - 0.5,
            b.kappa0 - 4.0,
            m.var_tangent - 0.5,
            m.fourth_tangent - 0.75,
            theta.value - 1.0,
        ]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
        within("max error", err, 1e-10)
    }));

    SelfTestReport { checks }
}

/// `λ_max(κΔ - ∇²V(u))` from an explicit matrix, the Laplacian assembled by
/// applying the spectral Laplacian to unit vectors.
pub(crate) fn dense_lambda_plus(u: &Field, spec: &potential::PotentialSpec, kappa: f64) -> f64 {
    let grid = u.grid();
    let len = grid.len();
    let n = u.components();
    let dim = n * len;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..len {
        let e = Field::from_values(1, grid, (0..len).map(|k| (k == j) as u8 as f64).collect()).unwrap();
        let col = field::laplacian(&e);
        for c in 0..n {
            for (i, v) in col.values().iter().enumerate() {
                a[(c * len + i, c * len + j)] += kappa * v;
            }
        }
    }
    let mut z = vec![0.0; n];
    for j in 0..len {
        u.point_into(j, &mut z);
        let h = spec.hess_v(&z);
        for r in 0..n {
            for c in 0..n {
                a[(r * len + j, c * len + j)] -= h[r * n + c];
            }
        }
    }
    // symmetrize against roundoff in the spectral columns
    let sym = (&a + a.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}
