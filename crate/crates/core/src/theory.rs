//! Closed-form quantities of the small-noise analysis: determinant weights,
//! concentration weights, the two Lyapunov bounds and their constants,
//! Gaussian moments around a sphere of minima, and the first-order
//! Laplace-expansion coefficients with a Monte Carlo cross-check.

use crate::error::{Error, Result};
use crate::field::{self, GridSpec};
use crate::noise::NoiseStream;
use crate::potential::{sym_eigenvalues, PotentialKind, PotentialSpec};
use crate::stats::KahanSum;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default Sobolev-type constant in `‖f‖₂ ≤ C_*‖f′‖₁` for zero-mean periodic `f`.
pub const C_STAR_DEFAULT: f64 = 0.5;
pub const M_TRUNC_DEFAULT: usize = 10_000;

/// `Σ_{m > M} 1/m²` (asymptotic series of the trigamma function).
pub fn basel_tail(m: usize) -> f64 {
    // direct terms until the series is accurate to roundoff
    let start = m.max(40);
    let head: f64 = (m + 1..=start).rev().map(|k| 1.0 / (k as f64).powi(2)).sum();
    let x = start as f64 + 1.0;
    // ψ′(x) for x = start + 1
    head + 1.0 / x + 1.0 / (2.0 * x * x) + 1.0 / (6.0 * x.powi(3)) - 1.0 / (30.0 * x.powi(5))
        + 1.0 / (42.0 * x.powi(7))
}

/// Log of a Fredholm mode product and its truncation data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogProduct {
    /// `Σ_{m≠0} Σ_j log((κ(2πm)² + λ_j)/(κ(2πm)² + 1))`, tail included.
    pub value: f64,
    /// Contribution of `|m| > M` (first-order estimate).
    pub tail: f64,
    /// Bound on the error left after adding the tail estimate.
    pub residual_bound: f64,
}

/// `Σ_{0<|m|≤M} Σ_j log((κ(2πm)²+λ_j)/(κ(2πm)²+1))` plus the first-order tail.
pub fn log_mode_product(eigenvalues: &[f64], kappa: f64, m_trunc: usize) -> LogProduct {
    let mut acc = KahanSum::default();
    for m in 1..=m_trunc {
        let k2 = kappa * (2.0 * PI * m as f64).powi(2);
        for &l in eigenvalues {
            acc.add(((l - 1.0) / (k2 + 1.0)).ln_1p());
        }
    }
    let c = 4.0 * PI * PI * kappa;
    let excess: f64 = eigenvalues.iter().map(|l| l - 1.0).sum();
    let tail = 2.0 * excess / c * basel_tail(m_trunc);
    // |log(1+x) - x| ≤ x² for |x| ≤ ½, and |1/(k²+1) - 1/k²| ≤ 1/k⁴
    let quad: f64 = eigenvalues.iter().map(|l| (l - 1.0).powi(2) + (l - 1.0).abs()).sum();
    let mf = m_trunc as f64;
    let residual_bound = 2.0 * quad / (c * c) / (3.0 * mf.powi(3));
    LogProduct { value: 2.0 * acc.value() + tail, tail, residual_bound }
}

/// A determinant weight `θ^{(κ)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub value: f64,
    pub log_value: f64,
    pub product: LogProduct,
}

/// `θ^{(κ)}(w) = [det ∇²V(w) · ∏_{m≠0} det(κ(2πm)² + ∇²V(w)) / (κ(2πm)² + 1)ⁿ]^{-1/2}`.
pub fn theta_nondegenerate(spec: &PotentialSpec, w: &[f64], kappa: f64, m_trunc: usize) -> Result<Theta> {
    spec.minima()?;
    let ev = sym_eigenvalues(spec.n, &spec.hess_v(w));
    let det: f64 = ev.iter().product();
    if det < 1e-12 {
        return Err(Error::DegenerateHessian(det));
    }
    let product = log_mode_product(&ev, kappa, m_trunc);
    let log_value = -0.5 * (det.ln() + product.value);
    Ok(Theta { value: log_value.exp(), log_value, product })
}

/// `θ^{(κ)}(r e₁)` for a sphere of minima of radius `r`: the normal block
/// contributes `4g″(r²)r²`, the mode product uses the full Hessian spectrum
/// `{4g″r², 0, …, 0}`, and the `n - 1` tangential zero modes give `(2π)^{-(n-1)/2}`.
pub fn theta_degenerate(spec: &PotentialSpec, r: f64, kappa: f64, m_trunc: usize) -> Result<Theta> {
    let (profile, _) = spec.profile()?;
    let normal = 4.0 * profile.g2(r * r) * r * r;
    if normal < 1e-12 {
        return Err(Error::DegenerateHessian(normal));
    }
    let mut ev = vec![0.0; spec.n];
    ev[0] = normal;
    let product = log_mode_product(&ev, kappa, m_trunc);
    let tangential = -0.5 * (spec.n as f64 - 1.0) * (2.0 * PI).ln();
    let log_value = tangential - 0.5 * (normal.ln() + product.value);
    Ok(Theta { value: log_value.exp(), log_value, product })
}

/// `Γ(k/2)` for a positive integer `k`, by exact recursion from `Γ(½) = √π`, `Γ(1) = 1`.
pub fn gamma_half_integer(k: usize) -> f64 {
    assert!(k >= 1);
    let (mut g, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x < k as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Area of the sphere `S^{n-1}_r ⊂ ℝⁿ`: `2π^{n/2} r^{n-1} / Γ(n/2)`.
pub fn sphere_area(n: usize, r: f64) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) * r.powi(n as i32 - 1) / gamma_half_integer(n)
}

/// θ and normalized weight of every minimum (or sphere).
pub fn thetas_and_weights(spec: &PotentialSpec, kappa: f64, m_trunc: usize) -> Result<(Vec<Theta>, Vec<f64>)> {
    let (thetas, masses): (Vec<Theta>, Vec<f64>) = match &spec.kind {
        PotentialKind::NonDegenerate { minima, .. } => minima
            .iter()
            .map(|m| theta_nondegenerate(spec, &m.point, kappa, m_trunc).map(|t| (t, t.value)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
        PotentialKind::RotInvariant { radii, .. } => radii
            .iter()
            .map(|&r| theta_degenerate(spec, r, kappa, m_trunc).map(|t| (t, sphere_area(spec.n, r) * t.value)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
    };
    let z: f64 = masses.iter().sum();
    Ok((thetas, masses.iter().map(|m| m / z).collect()))
}

/// Concentration weights `p^{(κ)}`.
pub fn weights(spec: &PotentialSpec, kappa: f64, m_trunc: usize) -> Result<Vec<f64>> {
    thetas_and_weights(spec, kappa, m_trunc).map(|(_, p)| p)
}

/// `-Σ λ_min(wᵢ) p^{(κ)}(wᵢ) + η`.
pub fn bound_main1(spec: &PotentialSpec, kappa: f64, eta: f64, m_trunc: usize) -> Result<f64> {
    let minima = spec.minima()?;
    let p = weights(spec, kappa, m_trunc)?;
    Ok(-minima.iter().zip(&p).map(|(m, p)| m.lambda_min * p).sum::<f64>() + eta)
}

/// How the `∨` in `κ₀ = 4 ∨ maxᵢ g″(rᵢ²)rᵢ²C_max` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Kappa0Reading {
    /// `max(4, maxᵢ g″rᵢ²C_max)`.
    #[default]
    Maximum,
    /// `4 · maxᵢ g″rᵢ²C_max`.
    Product,
}

/// `(C_max, κ₀)` with `C_max = 2 max(1/12, C_*²)`; `1/12 = (1/4π²)Σ_{k≠0} 1/k²`.
pub fn constants_main2(spec: &PotentialSpec, c_star: f64, reading: Kappa0Reading) -> Result<(f64, f64)> {
    let (profile, radii) = spec.profile()?;
    let c_max = 2.0 * (1.0f64 / 12.0).max(c_star * c_star);
    let inner = radii.iter().map(|&r| profile.g2(r * r) * r * r * c_max).fold(f64::NEG_INFINITY, f64::max);
    let kappa0 = match reading {
        Kappa0Reading::Maximum => inner.max(4.0),
        Kappa0Reading::Product => 4.0 * inner,
    };
    Ok((c_max, kappa0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Main2Bound {
    /// `-(n-2) Σ pᵢ / rᵢ²`.
    pub main_term: f64,
    /// `(C_max/κ) Σ pᵢ 4g″(rᵢ²)`.
    pub error_term: f64,
    pub total: f64,
    /// `-(n - 5/2) Σ pᵢ / rᵢ²`, the coefficient quoted in the introduction;
    /// display only, it disagrees with the main statement.
    pub intro_main_term: f64,
    pub c_max: f64,
    pub kappa0: f64,
    pub weights: Vec<f64>,
}

/// The degenerate-minima bound on `(1/ε) λ_top`, up to its `O(ε)` remainder.
pub fn bound_main2(
    spec: &PotentialSpec,
    kappa: f64,
    c_star: f64,
    reading: Kappa0Reading,
    m_trunc: usize,
) -> Result<Main2Bound> {
    let (c_max, kappa0) = constants_main2(spec, c_star, reading)?;
    if kappa <= kappa0 {
        return Err(Error::KappaTooSmall { kappa, kappa0 });
    }
    let (profile, radii) = spec.profile()?;
    let p = weights(spec, kappa, m_trunc)?;
    let n = spec.n as f64;
    let inv_r2: f64 = radii.iter().zip(&p).map(|(r, p)| p / (r * r)).sum();
    let curv: f64 = radii.iter().zip(&p).map(|(r, p)| p * 4.0 * profile.g2(r * r)).sum();
    let main_term = -(n - 2.0) * inv_r2;
    let error_term = c_max / kappa * curv;
    Ok(Main2Bound {
        main_term,
        error_term,
        total: main_term + error_term,
        intro_main_term: -(n - 2.5) * inv_r2,
        c_max,
        kappa0,
        weights: p,
    })
}

/// Moments of the Gaussian `μ^{(κ)}_{re₁}` on the normal space of a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    /// `E⟨e₁,v⟩² = 1/(4g″(r²)r²)`.
    pub var_tangent: f64,
    /// `E⟨e₁,v⟩⁴ = 3/(16g″(r²)²r⁴)`.
    pub fourth_tangent: f64,
    /// `E‖e₁·v^⊥‖₂² = Σ_{k≠0} 1/(κ(2πk)² + 4g″(r²)r²)`.
    pub perp_sum: f64,
    /// The part of `perp_sum` beyond `|k| = M`.
    pub perp_tail: f64,
}

/// `Σ_{0<|k|≤M} 1/(κ(2πk)² + c)`.
pub fn truncated_mode_sum(kappa: f64, c: f64, m_trunc: usize) -> f64 {
    let mut acc = KahanSum::default();
    for k in (1..=m_trunc).rev() {
        acc.add(1.0 / (kappa * (2.0 * PI * k as f64).powi(2) + c));
    }
    2.0 * acc.value()
}

/// `Σ_{|k|>M} 1/(κ(2πk)² + c)` by the midpoint integral from `M + ½`.
pub fn mode_sum_tail(kappa: f64, c: f64, m_trunc: usize) -> f64 {
    let a = 4.0 * PI * PI * kappa;
    let x = m_trunc as f64 + 0.5;
    if c <= 0.0 {
        return 2.0 / (a * x);
    }
    let s = (a / c).sqrt();
    2.0 / (a * c).sqrt() * (0.5 * PI - (x * s).atan())
}

pub fn gaussian_moments(spec: &PotentialSpec, r: f64, kappa: f64, m_trunc: usize) -> Result<GaussianMoments> {
    let (profile, _) = spec.profile()?;
    let g2 = profile.g2(r * r);
    let c = 4.0 * g2 * r * r;
    let var = 1.0 / c;
    let tail = mode_sum_tail(kappa, c, m_trunc);
    Ok(GaussianMoments {
        var_tangent: var,
        fourth_tangent: 3.0 / (16.0 * g2 * g2 * r.powi(4)),
        perp_sum: truncated_mode_sum(kappa, c, m_trunc) + tail,
        perp_tail: tail,
    })
}

/// `Eᵢ = (n-2)/r² - (2g″ + (C_*²/κ)16g″²r²) E‖e₁·v^⊥‖₂² - (C_*²/κ)4g″` as
/// stated after the moment reduction.
pub fn e_i(spec: &PotentialSpec, r: f64, kappa: f64, c_star: f64, m_trunc: usize) -> Result<f64> {
    let (profile, _) = spec.profile()?;
    let g2 = profile.g2(r * r);
    let p1 = gaussian_moments(spec, r, kappa, m_trunc)?.perp_sum;
    let c2 = c_star * c_star / kappa;
    Ok((spec.n as f64 - 2.0) / (r * r) - (2.0 * g2 + c2 * 16.0 * g2 * g2 * r * r) * p1 - c2 * 4.0 * g2)
}

/// `F₁ - (C_*²/κ) F₂` with both expectations composed directly from the
/// Gaussian moments, without the final simplification. Composing the terms
/// gives a `4g″` coefficient on `E‖e₁·v^⊥‖₂²` where [`e_i`] has `2g″`.
pub fn e_i_from_moments(spec: &PotentialSpec, r: f64, kappa: f64, c_star: f64, m_trunc: usize) -> Result<f64> {
    let f1 = first_order_analytic(spec, r, kappa, Functional::F1, Some(m_trunc), true)?;
    let f2 = first_order_analytic(spec, r, kappa, Functional::F2, Some(m_trunc), true)?;
    Ok(f1 - c_star * c_star / kappa * f2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functional {
    /// `F₁(u) = 2∫g′(|u|²)`.
    F1,
    /// `F₂(u) = 4‖g′(|u|²)‖₂²`.
    F2,
}

/// First-order coefficient `∫μ(dv)[…]` of a functional at the sphere of
/// radius `r`. The sums over nonzero modes run to `m_trunc`, with tails added
/// when `with_tail` is set.
pub fn first_order_analytic(
    spec: &PotentialSpec,
    r: f64,
    kappa: f64,
    functional: Functional,
    m_trunc: Option<usize>,
    with_tail: bool,
) -> Result<f64> {
    let (profile, _) = spec.profile()?;
    let m = m_trunc.unwrap_or(M_TRUNC_DEFAULT);
    let (g2, g3) = (profile.g2(r * r), profile.g3(r * r));
    let c = 4.0 * g2 * r * r;
    let s = 1.0 / c;
    let tail = |cc: f64| if with_tail { mode_sum_tail(kappa, cc, m) } else { 0.0 };
    // E‖e₁·v^⊥‖², and the per-component E‖v_c^⊥‖² of a tangential component
    let p1 = truncated_mode_sum(kappa, c, m) + tail(c);
    let q = truncated_mode_sum(kappa, 0.0, m) + tail(0.0);
    let nm1 = spec.n as f64 - 1.0;
    let r2 = r * r;
    Ok(match functional {
        Functional::F2 => 16.0 * g2 * g2 * r2 * (s + p1),
        Functional::F1 => {
            let e1sq = s + p1;
            let vsq = s + p1 + nm1 * q;
            // E[X ∫(e₁·v)³] and E[X ∫(e₁·v)|v|²] with X = ⟨e₁,v⟩
            let x_cube = 3.0 * s * s + 3.0 * s * p1;
            let x_mixed = 3.0 * s * s + 3.0 * s * p1 + nm1 * s * q;
            4.0 * g3 * r2 * e1sq + 2.0 * g2 * vsq + 4.0 * g2 * nm1 * s
                - 4.0 * g2 * r * ((4.0 / 3.0) * g3 * r.powi(3) * x_cube + 2.0 * g2 * r * x_mixed)
        }
    })
}

/// Monte Carlo check of a first-order coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErEstimate {
    /// Analytic value with all sums to infinity.
    pub analytic: f64,
    /// Analytic value with the same mode truncation as the sampler.
    pub analytic_truncated: f64,
    pub monte_carlo: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl ErEstimate {
    /// `|MC - analytic_truncated| / stderr`.
    pub fn z_score(&self) -> f64 {
        (self.monte_carlo - self.analytic_truncated).abs() / self.stderr
    }
}

/// Sampler for the truncated Gaussian `μ^{(κ)}_{re₁}`: `X = ⟨e₁,v⟩ ~ N(0, 1/(4g″r²))`
/// on the mean of the first component, nonzero modes `|k| ≤ M` of the first
/// component with `E|v̂(k)|² = 1/(κ(2πk)² + 4g″r²)`, nonzero modes of the other
/// components with `E|v̂(k)|² = 1/(κ(2πk)²)`. The tangential means are not
/// part of the normal space and stay zero.
struct NormalSpaceSampler {
    n: usize,
    m_trunc: usize,
    len: usize,
    sd_tangent: f64,
    sd_first: Vec<f64>,
    sd_other: Vec<f64>,
}

/// Per-sample integrals needed by the functionals.
struct Sample {
    x: f64,
    e1sq: f64,
    vsq: f64,
    cube: f64,
    mixed: f64,
    perp_cube: f64,
}

impl NormalSpaceSampler {
    fn new(n: usize, c: f64, kappa: f64, m_trunc: usize) -> Self {
        let len = (4 * (m_trunc + 1)).next_power_of_two().max(8);
        let sd = |extra: f64| {
            (0..=m_trunc)
                .map(|k| if k == 0 { 0.0 } else { (0.5 / (kappa * (2.0 * PI * k as f64).powi(2) + extra)).sqrt() })
                .collect::<Vec<f64>>()
        };
        Self { n, m_trunc, len, sd_tangent: (1.0 / c).sqrt(), sd_first: sd(c), sd_other: sd(0.0) }
    }

    fn draw(&self, rng: &mut impl Rng, buf: &mut [Complex64], values: &mut [f64]) -> Sample {
        let plan = field::plan(self.len);
        let len = self.len;
        let x: f64 = self.sd_tangent * rng.sample::<f64, _>(StandardNormal);
        for c in 0..self.n {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            let sd = if c == 0 { &self.sd_first } else { &self.sd_other };
            for k in 1..=self.m_trunc {
                let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * sd[k];
                buf[k] = z;
                buf[len - k] = z.conj();
            }
            plan.inverse(buf);
            for j in 0..len {
                values[c * len + j] = buf[j].re;
            }
        }
        let inv = 1.0 / len as f64;
        let (mut e1sq, mut vsq, mut cube, mut mixed, mut perp_cube) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..len {
            let a = values[j];
            let v1 = x + a;
            let mut rest = 0.0;
            for c in 1..self.n {
                rest += values[c * len + j].powi(2);
            }
            let norm2 = v1 * v1 + rest;
            e1sq += v1 * v1;
            vsq += norm2;
            cube += v1 * v1 * v1;
            mixed += v1 * norm2;
            perp_cube += a * a * a;
        }
        Sample { x, e1sq: e1sq * inv, vsq: vsq * inv, cube: cube * inv, mixed: mixed * inv, perp_cube: perp_cube * inv }
    }
}

const MC_BLOCK: usize = 1000;

/// Runs `samples` draws in blocks of 1000, each block with its own stream
/// `(seed, block)`, and returns the per-statistic means and standard errors.
fn mc_moments(
    sampler: &NormalSpaceSampler,
    samples: usize,
    seed: u64,
    stats: &(dyn Fn(&Sample) -> Vec<f64> + Sync),
    count: usize,
) -> (Vec<f64>, Vec<f64>) {
    let blocks = samples.div_ceil(MC_BLOCK);
    let partial: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = NoiseStream::new(seed, b as u64).aux_rng(0x4d43);
            let mut buf = vec![Complex64::new(0.0, 0.0); sampler.len];
            let mut values = vec![0.0; sampler.n * sampler.len];
            let todo = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut s1 = vec![0.0; count];
            let mut s2 = vec![0.0; count];
            for _ in 0..todo {
                let v = stats(&sampler.draw(&mut rng, &mut buf, &mut values));
                for i in 0..count {
                    s1[i] += v[i];
                    s2[i] += v[i] * v[i];
                }
            }
            (s1, s2, todo)
        })
        .collect();
    let mut s1 = vec![0.0; count];
    let mut s2 = vec![0.0; count];
    let mut total = 0usize;
    for (a, b, t) in partial {
        for i in 0..count {
            s1[i] += a[i];
            s2[i] += b[i];
        }
        total += t;
    }
    let nf = total as f64;
    let means: Vec<f64> = s1.iter().map(|s| s / nf).collect();
    let errs = (0..count)
        .map(|i| ((s2[i] / nf - means[i] * means[i]).max(0.0) * nf / (nf - 1.0) / nf).sqrt())
        .collect();
    (means, errs)
}

/// Analytic first-order coefficient and its Monte Carlo estimate.
pub fn ellis_rosen_first_order(
    spec: &PotentialSpec,
    r: f64,
    kappa: f64,
    functional: Functional,
    m_trunc: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<ErEstimate> {
    let (profile, _) = spec.profile()?;
    let (g2, g3) = (profile.g2(r * r), profile.g3(r * r));
    let n = spec.n as f64;
    let analytic = first_order_analytic(spec, r, kappa, functional, Some(M_TRUNC_DEFAULT), true)?;
    let analytic_truncated = first_order_analytic(spec, r, kappa, functional, Some(m_trunc), false)?;
    let sampler = NormalSpaceSampler::new(spec.n, 4.0 * g2 * r * r, kappa, m_trunc);
    let r2 = r * r;
    let integrand = move |s: &Sample| -> Vec<f64> {
        vec![match functional {
            Functional::F2 => 16.0 * g2 * g2 * r2 * s.e1sq,
            Functional::F1 => {
                4.0 * g3 * r2 * s.e1sq + 2.0 * g2 * s.vsq + 4.0 * g2 * (n - 1.0) * s.x * s.x
                    - 4.0 * g2 * r * s.x * ((4.0 / 3.0) * g3 * r.powi(3) * s.cube + 2.0 * g2 * r * s.mixed)
            }
        }]
    };
    let (m, e) = mc_moments(&sampler, mc_samples, seed, &integrand, 1);
    Ok(ErEstimate { analytic, analytic_truncated, monte_carlo: m[0], stderr: e[0], samples: mc_samples })
}

/// Monte Carlo estimates `(mean, stderr)` of odd moments that vanish by
/// symmetry: `E⟨e₁,v⟩³`, `E[⟨e₁,v⟩∫(e₁·v^⊥)³]`, `E∫(e₁·v)³`.
pub fn odd_moment_check(
    spec: &PotentialSpec,
    r: f64,
    kappa: f64,
    m_trunc: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let (profile, _) = spec.profile()?;
    let sampler = NormalSpaceSampler::new(spec.n, 4.0 * profile.g2(r * r) * r * r, kappa, m_trunc);
    let stats = |s: &Sample| vec![s.x.powi(3), s.x * s.perp_cube, s.cube];
    let (m, e) = mc_moments(&sampler, mc_samples, seed, &stats, 3);
    Ok(m.into_iter().zip(e).collect())
}

/// All closed-form quantities for one potential and one `κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBound {
    pub kappa: f64,
    pub thetas: Vec<f64>,
    pub weights: Vec<f64>,
    pub c_star: f64,
    /// Present for rotationally invariant potentials.
    pub c_max: Option<f64>,
    pub kappa0: Option<f64>,
    pub e_values: Vec<f64>,
    pub bound_main1: Option<f64>,
    pub main2: Option<Main2Bound>,
    /// Set when `κ ≤ κ₀` and the degenerate bound is not available.
    pub kappa_too_small: bool,
    pub m_trunc: usize,
    /// Largest tail estimate among the θ products.
    pub tail_estimate: f64,
    pub residual_bound: f64,
}

pub fn theory_bound(
    spec: &PotentialSpec,
    kappa: f64,
    c_star: f64,
    eta: f64,
    reading: Kappa0Reading,
    m_trunc: usize,
) -> Result<TheoryBound> {
    let (thetas, weights) = thetas_and_weights(spec, kappa, m_trunc)?;
    let tail_estimate = thetas.iter().map(|t| t.product.tail.abs()).fold(0.0, f64::max);
    let residual_bound = thetas.iter().map(|t| t.product.residual_bound).fold(0.0, f64::max);
    let mut out = TheoryBound {
        kappa,
        thetas: thetas.iter().map(|t| t.value).collect(),
        weights,
        c_star,
        c_max: None,
        kappa0: None,
        e_values: Vec::new(),
        bound_main1: None,
        main2: None,
        kappa_too_small: false,
        m_trunc,
        tail_estimate,
        residual_bound,
    };
    match &spec.kind {
        PotentialKind::NonDegenerate { .. } => {
            out.bound_main1 = Some(bound_main1(spec, kappa, eta, m_trunc)?);
        }
        PotentialKind::RotInvariant { radii, .. } => {
            let (c_max, kappa0) = constants_main2(spec, c_star, reading)?;
            out.c_max = Some(c_max);
            out.kappa0 = Some(kappa0);
            out.e_values = radii.iter().map(|&r| e_i(spec, r, kappa, c_star, m_trunc)).collect::<Result<_>>()?;
            match bound_main2(spec, kappa, c_star, reading, m_trunc) {
                Ok(b) => out.main2 = Some(b),
                Err(Error::KappaTooSmall { .. }) => out.kappa_too_small = true,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Largest ratio `‖f‖₂ / ‖f′‖₁` found over `trials` random zero-mean
/// trigonometric polynomials with modes `1..=max_mode`; a numerical check
/// that [`C_STAR_DEFAULT`] is an upper bound.
pub fn sobolev_ratio_search(trials: usize, max_mode: usize, seed: u64) -> f64 {
    let grid = GridSpec::new((64 * max_mode).next_power_of_two()).expect("grid");
    let len = grid.len();
    let mut rng = NoiseStream::new(seed, 0).aux_rng(0x534f);
    let mut best: f64 = 0.0;
    for t in 0..trials {
        let modes = 1 + t % max_mode;
        let coeffs: Vec<(f64, f64)> = (1..=modes)
            .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let (mut l2, mut l1d) = (0.0, 0.0);
        for j in 0..len {
            let x = grid.x(j);
            let (mut f, mut df) = (0.0, 0.0);
            for (k, (a, b)) in coeffs.iter().enumerate() {
                let w = 2.0 * PI * (k + 1) as f64;
                f += a * (w * x).cos() + b * (w * x).sin();
                df += w * (-a * (w * x).sin() + b * (w * x).cos());
            }
            l2 += f * f;
            l1d += df.abs();
        }
        best = best.max((l2 / len as f64).sqrt() / (l1d / len as f64));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{double_well, quadratic, sombrero, tilted_double_well, two_sphere, RadialProfile};

    /// `∏_{m≥1} (1 + a²/m²) = sinh(πa)/(πa)`, used as an independent oracle.
    fn sinh_product(lambda: f64, kappa: f64) -> f64 {
        let a = lambda.sqrt() / (2.0 * PI * kappa.sqrt());
        if a == 0.0 {
            0.0
        } else {
            ((PI * a).sinh() / (PI * a)).ln()
        }
    }

    #[test]
    fn identity_hessian_gives_unit_theta() {
        for kappa in [0.5, 1.0, 8.0] {
            let t = theta_nondegenerate(&quadratic(3, 1.0), &[0.0; 3], kappa, 10_000).unwrap();
            assert!((t.value - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn theta_matches_closed_form_product() {
        for (lambda, kappa) in [(2.0, 1.0), (4.0, 8.0), (0.5, 2.0)] {
            let t = theta_nondegenerate(&quadratic(1, lambda), &[0.0], kappa, 10_000).unwrap();
            let log_prod = 2.0 * (sinh_product(lambda, kappa) - sinh_product(1.0, kappa));
            let exact = (-0.5 * (lambda.ln() + log_prod)).exp();
            assert!((t.value - exact).abs() < 1e-12 * exact, "{} vs {}", t.value, exact);
            assert!(t.product.residual_bound < 1e-10);
        }
    }

    #[test]
    fn theta_symmetric_for_double_well() {
        let spec = double_well();
        let a = theta_nondegenerate(&spec, &[1.0], 1.0, 1000).unwrap();
        let b = theta_nondegenerate(&spec, &[-1.0], 1.0, 1000).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(weights(&spec, 1.0, 1000).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_hessian_is_rejected() {
        assert!(matches!(
            theta_nondegenerate(&quadratic(1, 0.0), &[0.0], 1.0, 10),
            Err(Error::DegenerateHessian(_))
        ));
        assert!(theta_degenerate(&double_well(), 1.0, 1.0, 10).is_err());
    }

    #[test]
    fn degenerate_theta_closed_form_and_limit() {
        let spec = sombrero(2);
        for kappa in [1.0, 8.0] {
            let t = theta_degenerate(&spec, 1.0, kappa, 10_000).unwrap();
            // zero eigenvalue factor: ∏ κ(2πm)²/(κ(2πm)²+1) = 1/∏(1 + a²/m²)
            let log_prod = 2.0 * (sinh_product(2.0, kappa) - 2.0 * sinh_product(1.0, kappa));
            let exact = (2.0 * PI).powf(-0.5) * (-0.5 * (2.0f64.ln() + log_prod)).exp();
            assert!((t.value - exact).abs() < 1e-11 * exact);
        }
        let limit = (2.0 * PI).powf(-1.0) / 2f64.sqrt();
        let big = theta_degenerate(&sombrero(3), 1.0, 1e8, 10_000).unwrap();
        assert!((big.value - limit).abs() < 1e-6);
    }

    #[test]
    fn gamma_and_sphere_areas() {
        assert!((gamma_half_integer(1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half_integer(2), 1.0);
        assert!((gamma_half_integer(7) - 15.0 / 8.0 * PI.sqrt()).abs() < 1e-14);
        assert_eq!(gamma_half_integer(10), 24.0);
        assert!((sphere_area(2, 1.0) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3, 1.0) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4, 2.0) - 2.0 * PI * PI * 8.0).abs() < 1e-12);
    }

    #[test]
    fn weights_normalize() {
        for spec in [tilted_double_well(), two_sphere(3), sombrero(3)] {
            let p = weights(&spec, 8.0, 1000).unwrap();
            assert!(p.iter().all(|&x| x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(weights(&sombrero(3), 8.0, 100).unwrap(), vec![1.0]);
    }

    #[test]
    fn main1_examples() {
        assert!((bound_main1(&double_well(), 3.0, 0.1, 1000).unwrap() + 1.9).abs() < 1e-12);
        assert!((bound_main1(&quadratic(2, 1.5), 1.0, 0.0, 1000).unwrap() + 1.5).abs() < 1e-12);
        let t = tilted_double_well();
        let p = weights(&t, 1.0, 10_000).unwrap();
        let lm: Vec<f64> = t.minima().unwrap().iter().map(|m| m.lambda_min).collect();
        let expected = -(lm[0] * p[0] + lm[1] * p[1]);
        assert!((bound_main1(&t, 1.0, 0.0, 10_000).unwrap() - expected).abs() < 1e-14);
        assert!(bound_main1(&sombrero(3), 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn main2_constants_and_bound() {
        let s3 = sombrero(3);
        let (c_max, k0) = constants_main2(&s3, 0.5, Kappa0Reading::Maximum).unwrap();
        assert_eq!((c_max, k0), (0.5, 4.0));
        let (c_max, _) = constants_main2(&s3, 0.1, Kappa0Reading::Maximum).unwrap();
        assert!((c_max - 1.0 / 6.0).abs() < 1e-15);
        let (_, k0) = constants_main2(&s3, 0.5, Kappa0Reading::Product).unwrap();
        assert!((k0 - 1.0).abs() < 1e-15);
        let b = bound_main2(&s3, 8.0, 0.5, Kappa0Reading::Maximum, 10_000).unwrap();
        assert!((b.main_term + 1.0).abs() < 1e-12);
        assert!((b.error_term - 0.125).abs() < 1e-12);
        assert!((b.total + 0.875).abs() < 1e-12);
        let b4 = bound_main2(&sombrero(4), 8.0, 0.5, Kappa0Reading::Maximum, 10_000).unwrap();
        assert!((b4.main_term + 2.0).abs() < 1e-12 && (b4.total + 1.875).abs() < 1e-12);
        let b2 = bound_main2(&sombrero(2), 8.0, 0.5, Kappa0Reading::Maximum, 10_000).unwrap();
        assert_eq!(b2.main_term, 0.0);
        assert!(b2.total > 0.0);
        assert!(matches!(
            bound_main2(&s3, 4.0, 0.5, Kappa0Reading::Maximum, 100),
            Err(Error::KappaTooSmall { .. })
        ));
    }

    #[test]
    fn main_term_scales_with_dimension() {
        let profile = RadialProfile::new(vec![0.25, -0.5, 0.25]);
        let mains: Vec<f64> = (2..=4)
            .map(|n| {
                let mut spec = sombrero(n);
                spec.kind = PotentialKind::RotInvariant { profile: profile.clone(), radii: vec![1.0] };
                bound_main2(&spec, 8.0, 0.5, Kappa0Reading::Maximum, 1000).unwrap().main_term
            })
            .collect();
        assert_eq!(mains[0], 0.0);
        assert_eq!(mains[2], 2.0 * mains[1]);
    }

    #[test]
    fn sombrero_gaussian_moments() {
        let m = gaussian_moments(&sombrero(3), 1.0, 1.0, 100_000).unwrap();
        assert_eq!(m.var_tangent, 0.5);
        assert_eq!(m.fourth_tangent, 0.75);
        let partial: f64 = (1..=100_000).map(|k| 2.0 / (4.0 * PI * PI * (k as f64).powi(2) + 2.0)).sum();
        assert!((m.perp_sum - partial).abs() < 1e-6);
        // closed form Σ_{k≠0} 1/(4π²κk² + c) = (1/(4π²κ))[(π/a)coth(πa) - 1/a²], a² = c/(4π²κ)
        let a = (2.0f64 / (4.0 * PI * PI)).sqrt();
        let exact = ((PI / a) / (PI * a).tanh() - 1.0 / (a * a)) / (4.0 * PI * PI);
        assert!((m.perp_sum - exact).abs() < 1e-13);
    }

    #[test]
    fn e_i_limits_and_consistency() {
        for spec in [sombrero(3), sombrero(4), two_sphere(3)] {
            let (profile, radii) = spec.profile().unwrap();
            let radii = radii.to_vec();
            let mut prev = f64::NEG_INFINITY;
            for kappa in [8.0, 16.0, 64.0, 1e4, 1e8] {
                let e: Vec<f64> = radii.iter().map(|&r| e_i(&spec, r, kappa, 0.5, 10_000).unwrap()).collect();
                assert!(e[0] > prev);
                prev = e[0];
                let b = bound_main2(&spec, kappa, 0.5, Kappa0Reading::Maximum, 10_000).unwrap();
                let weighted: f64 = e.iter().zip(&b.weights).map(|(e, p)| p * e).sum();
                assert!(-weighted <= b.total + 1e-12);
                let em: Vec<f64> =
                    radii.iter().map(|&r| e_i_from_moments(&spec, r, kappa, 0.5, 10_000).unwrap()).collect();
                let weighted_m: f64 = em.iter().zip(&b.weights).map(|(e, p)| p * e).sum();
                assert!(-weighted_m <= b.total + 1e-12);
            }
            let r0 = radii[0];
            let limit = (spec.n as f64 - 2.0) / (r0 * r0);
            assert!((e_i(&spec, r0, 1e12, 0.5, 10_000).unwrap() - limit).abs() < 1e-9);
            let _ = profile;
        }
    }

    #[test]
    fn first_order_f1_simplifies() {
        for spec in [sombrero(3), two_sphere(3)] {
            let (profile, radii) = spec.profile().unwrap();
            for &r in radii {
                let p1 = gaussian_moments(&spec, r, 8.0, 500).unwrap().perp_sum
                    - mode_sum_tail(8.0, 4.0 * profile.g2(r * r) * r * r, 500);
                let f1 = first_order_analytic(&spec, r, 8.0, Functional::F1, Some(500), false).unwrap();
                let simple = (spec.n as f64 - 2.0) / (r * r) - 4.0 * profile.g2(r * r) * p1;
                assert!((f1 - simple).abs() < 1e-12, "{f1} vs {simple}");
            }
        }
    }

    #[test]
    fn f2_monte_carlo_agrees() {
        let spec = sombrero(3);
        let est = ellis_rosen_first_order(&spec, 1.0, 4.0, Functional::F2, 16, 20_000, 11).unwrap();
        assert!(est.z_score() < 3.0, "{est:?}");
        let p = gaussian_moments(&spec, 1.0, 4.0, 10_000).unwrap();
        assert!((est.analytic - 4.0 * (0.5 + p.perp_sum)).abs() < 1e-12);
    }

    #[test]
    fn odd_moments_vanish() {
        for (mean, se) in odd_moment_check(&sombrero(3), 1.0, 8.0, 16, 20_000, 5).unwrap() {
            assert!(mean.abs() < 3.0 * se, "{mean} ± {se}");
        }
    }

    #[test]
    fn monte_carlo_is_worker_independent() {
        let spec = sombrero(2);
        let a = ellis_rosen_first_order(&spec, 1.0, 8.0, Functional::F1, 8, 3000, 2).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| ellis_rosen_first_order(&spec, 1.0, 8.0, Functional::F1, 8, 3000, 2).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn c_star_default_is_an_upper_bound() {
        let best = sobolev_ratio_search(400, 6, 1);
        assert!(best > 0.1 && best < C_STAR_DEFAULT, "{best}");
    }

    #[test]
    fn theory_bound_composes() {
        let tb = theory_bound(&sombrero(3), 8.0, 0.5, 0.0, Kappa0Reading::Maximum, 1000).unwrap();
        assert!((tb.main2.as_ref().unwrap().total + 0.875).abs() < 1e-12);
        assert!(!tb.kappa_too_small);
        let tb = theory_bound(&sombrero(3), 2.0, 0.5, 0.0, Kappa0Reading::Maximum, 1000).unwrap();
        assert!(tb.kappa_too_small && tb.main2.is_none());
        let tb = theory_bound(&double_well(), 1.0, 0.5, 0.1, Kappa0Reading::Maximum, 1000).unwrap();
        assert!((tb.bound_main1.unwrap() + 1.9).abs() < 1e-12);
    }
}
