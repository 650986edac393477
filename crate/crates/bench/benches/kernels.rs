use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lyapsync::fft::Radix2Plan;
use lyapsync::field::{dft, idft};
use lyapsync::integrator::step;
use lyapsync::lyapunov::lambda_plus;
use lyapsync::potential::sombrero;
use lyapsync::theory::{theory_bound, Kappa0Reading};
use lyapsync::{Field, GridSpec, NoiseStream, SimConfig};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::hint::black_box;

fn fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft");
    for n in [64usize, 256, 1024] {
        let plan = Radix2Plan::new(n);
        let data: Vec<Complex64> = (0..n).map(|j| Complex64::new((j as f64).sin(), 0.0)).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let mut d = data.clone();
                plan.forward(&mut d);
                black_box(d)
            })
        });
    }
    g.finish();
}

fn field(n: usize) -> Field {
    Field::from_fn(3, GridSpec::new(n).unwrap(), |c, x| 1.0 + 0.3 * (2.0 * PI * x + c as f64).cos())
}

fn transforms(c: &mut Criterion) {
    let f = field(256);
    c.bench_function("dft_idft_n3_256", |b| b.iter(|| idft(&dft(black_box(&f))).unwrap()));
}

fn integrator(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    for n in [32usize, 256] {
        let f = field(n);
        let mut cfg = SimConfig::new(sombrero(3), f.grid());
        cfg.kappa = 8.0;
        cfg.epsilon = 0.05;
        let eta = NoiseStream::new(1, 0).increment(0, 3, cfg.grid);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| step(black_box(&f), &cfg, Some(&eta)).unwrap())
        });
    }
    g.finish();
}

fn lambda(c: &mut Criterion) {
    let f = field(64);
    let spec = sombrero(3);
    c.bench_function("lambda_plus_n3_64", |b| b.iter(|| lambda_plus(black_box(&f), &spec, 8.0).unwrap()));
}

fn bounds(c: &mut Criterion) {
    let spec = sombrero(3);
    c.bench_function("theory_bound_sombrero", |b| {
        b.iter(|| theory_bound(&spec, black_box(8.0), 0.5, 0.0, Kappa0Reading::Maximum, 10_000).unwrap())
    });
}

criterion_group!(benches, fft, transforms, integrator, lambda, bounds);
criterion_main!(benches);
