//! Linearized flow, top Lyapunov exponent and the `λ₊` spectral bound.
//!
//! The tangent equation `(∂_t - κΔ)h = -∇²V(u(t)) h` is stepped with the same
//! scheme as the base equation, the Hessian being evaluated at the pre-step
//! base field and no noise entering the tangent.

use crate::error::{Error, Result};
use crate::field::{self, Field, SpectralField};
use crate::integrator::{Clock, SimConfig, Stepper};
use crate::potential::{sym_eigenvalues, PotentialSpec};
use crate::stats::{batch_means, BatchMeans};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct TangentState {
    pub base: Field,
    pub tangent: Field,
    /// `Σ log‖h‖₂` over all renormalizations so far.
    pub log_growth: f64,
    pub renormalizations: usize,
}

impl TangentState {
    pub fn new(base: Field, tangent: Field) -> Result<Self> {
        base.check_shape(&tangent)?;
        Ok(Self { base, tangent, log_growth: 0.0, renormalizations: 0 })
    }

    /// Rescales the tangent to unit L² norm and returns the log of the norm
    /// it had.
    pub fn renormalize(&mut self) -> f64 {
        let norm = field::l2_norm(&self.tangent);
        let inv = 1.0 / norm;
        self.tangent.values_mut().iter_mut().for_each(|v| *v *= inv);
        let l = norm.ln();
        self.log_growth += l;
        self.renormalizations += 1;
        l
    }
}

struct TangentDriver {
    stepper: Stepper,
}

impl TangentDriver {
    fn new(cfg: &SimConfig, components: usize) -> Self {
        Self { stepper: Stepper::new(cfg, components) }
    }

    fn advance(&mut self, cfg: &SimConfig, state: &mut TangentState, noise: Option<&SpectralField>) {
        self.stepper.load_linearized(&cfg.potential, &state.base, &state.tangent);
        self.stepper.advance(&mut state.tangent, None);
        self.stepper.load_drift(&cfg.potential, &state.base);
        self.stepper.advance(&mut state.base, noise);
    }
}

/// Advances base and tangent by one step. The base receives
/// `noise_increment`; the tangent is driven by `-∇²V` at the pre-step base.
pub fn tangent_step(
    state: &TangentState,
    cfg: &SimConfig,
    noise_increment: Option<&SpectralField>,
) -> Result<TangentState> {
    cfg.validate()?;
    let mut next = state.clone();
    TangentDriver::new(cfg, state.base.components()).advance(cfg, &mut next, noise_increment);
    if !next.base.is_finite() || !next.tangent.is_finite() {
        return Err(Error::NonFinite { time: cfg.dt });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    /// Steps between tangent renormalizations.
    pub renorm_every: usize,
    /// Fraction of the horizon discarded before averaging.
    pub burn_in: f64,
    pub batches: usize,
    /// Steps between `λ₊` samples of the ergodic average; `None` skips it.
    pub lambda_plus_every: Option<usize>,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self { renorm_every: 10, burn_in: 0.1, batches: 20, lambda_plus_every: Some(100) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Estimated top exponent in units of 1 / (run clock).
    pub lambda_top: f64,
    pub stderr: f64,
    pub batches: usize,
    /// Time average of `λ₊(u(t))` in the same units, if sampled.
    pub ergodic_lambda_plus: Option<f64>,
    pub ergodic_stderr: Option<f64>,
    pub lambda_plus_samples: usize,
    /// `λ₊` evaluations that hit the iteration cap (best iterate used).
    pub lambda_plus_failures: usize,
    pub t_effective: f64,
    pub clock: Clock,
    pub epsilon: f64,
    /// Log growth of each renormalization interval after burn-in.
    pub log_record: Vec<f64>,
}

impl LyapunovReport {
    /// The exponent in physical-clock units: `λ_top = ε λ̃_top` for rescaled runs.
    pub fn lambda_physical(&self) -> f64 {
        match self.clock {
            Clock::Physical => self.lambda_top,
            Clock::Rescaled => self.lambda_top * self.epsilon,
        }
    }

    /// `sqrt(stderr² + ergodic_stderr²)`.
    pub fn combined_stderr(&self) -> f64 {
        (self.stderr.powi(2) + self.ergodic_stderr.unwrap_or(0.0).powi(2)).sqrt()
    }

    /// Whether `λ̂_top ≤ ergodic λ₊ + 3·combined stderr`; `None` without λ₊ samples.
    pub fn ordering_holds(&self) -> Option<bool> {
        self.ergodic_lambda_plus.map(|e| self.lambda_top <= e + 3.0 * self.combined_stderr())
    }
}

fn burn_in_steps(cfg: &SimConfig, opts: &LyapunovOptions) -> Result<u64> {
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(Error::InvalidConfig(format!("burn-in fraction must lie in [0, 1), got {}", opts.burn_in)));
    }
    if opts.renorm_every == 0 {
        return Err(Error::InvalidConfig("renorm_every must be at least 1".into()));
    }
    let every = opts.renorm_every as u64;
    let raw = (opts.burn_in * cfg.steps() as f64).ceil() as u64;
    Ok(raw.div_ceil(every) * every)
}

/// Benettin estimate of the top Lyapunov exponent over `[0, cfg.horizon]`.
///
/// `h0` is normalized before the run, so the estimate does not depend on its
/// scale. Log growth is accumulated at every renormalization; those after
/// the burn-in enter the estimate and its batch-means error.
pub fn top_lyapunov(cfg: &SimConfig, f: &Field, h0: &Field, opts: &LyapunovOptions) -> Result<LyapunovReport> {
    cfg.validate()?;
    let h_norm = field::l2_norm(h0);
    if !(h_norm > 0.0 && h_norm.is_finite()) {
        return Err(Error::InvalidConfig("initial tangent must be nonzero".into()));
    }
    let mut state = TangentState::new(f.clone(), h0.scaled(1.0 / h_norm))?;
    let steps = cfg.steps();
    let burn = burn_in_steps(cfg, opts)?;
    let every = opts.renorm_every as u64;
    let intervals = steps.saturating_sub(burn) / every;
    if (intervals as usize) < opts.batches {
        return Err(Error::InsufficientBatches { available: intervals as usize, required: opts.batches });
    }
    let end = burn + intervals * every;

    let mut driver = TangentDriver::new(cfg, f.components());
    let stream = cfg.noise_stream();
    let mut eta = SpectralField::zeros(f.components(), cfg.grid);
    let with_noise = cfg.coefficients().2 > 0.0;
    let drift_scale = cfg.coefficients().1;
    let mut solver = LambdaPlusSolver::new(cfg.potential.n, cfg.grid, cfg.kappa);
    let mut warm: Option<Vec<f64>> = None;
    let mut log_record = Vec::with_capacity(intervals as usize);
    let mut lp_samples = Vec::new();
    let mut lp_failures = 0;

    for k in 0..end {
        if let Some(lp_every) = opts.lambda_plus_every {
            if k >= burn && (k - burn) % lp_every.max(1) as u64 == 0 {
                let (value, vector, ok) = match solver.solve(&state.base, &cfg.potential, warm.as_deref()) {
                    Ok(r) => (r.value, r.vector, true),
                    Err(Failure { estimate, vector, .. }) => (estimate, vector, false),
                };
                if !ok {
                    lp_failures += 1;
                }
                lp_samples.push(drift_scale * value);
                warm = Some(vector);
            }
        }
        if with_noise {
            stream.increment_into(k, &mut eta);
        }
        driver.advance(cfg, &mut state, with_noise.then_some(&eta));
        if (k + 1) % every == 0 {
            let t = (k + 1) as f64 * cfg.dt;
            if !state.base.is_finite() || !state.tangent.is_finite() {
                return Err(Error::NonFinite { time: t });
            }
            let l = state.renormalize();
            if !l.is_finite() {
                return Err(Error::NonFinite { time: t });
            }
            if k + 1 > burn {
                log_record.push(l);
            }
        }
    }

    let interval_time = every as f64 * cfg.dt;
    let rates: Vec<f64> = log_record.iter().map(|l| l / interval_time).collect();
    let BatchMeans { mean, stderr, batches } = batch_means(&rates, opts.batches)?;
    let (ergodic, ergodic_se) = if lp_samples.is_empty() {
        (None, None)
    } else {
        let b = batch_means(&lp_samples, opts.batches.min(lp_samples.len()).max(2))?;
        (Some(b.mean), Some(b.stderr))
    };
    Ok(LyapunovReport {
        lambda_top: mean,
        stderr,
        batches,
        ergodic_lambda_plus: ergodic,
        ergodic_stderr: ergodic_se,
        lambda_plus_samples: lp_samples.len(),
        lambda_plus_failures: lp_failures,
        t_effective: intervals as f64 * interval_time,
        clock: cfg.clock(),
        epsilon: cfg.epsilon,
        log_record,
    })
}

/// Batch-means estimate of a time average of `λ₊(u(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub failures: usize,
}

/// Time average of `λ₊` along the base trajectory from `f`, in the run's
/// clock units, sampled every `opts.lambda_plus_every` steps after burn-in.
pub fn ergodic_bound(cfg: &SimConfig, f: &Field, opts: &LyapunovOptions) -> Result<ErgodicEstimate> {
    cfg.validate()?;
    let every = opts.lambda_plus_every.unwrap_or(opts.renorm_every).max(1) as u64;
    let burn = burn_in_steps(cfg, opts)?;
    let steps = cfg.steps();
    let available = (steps.saturating_sub(burn) / every) as usize;
    if available < opts.batches {
        return Err(Error::InsufficientBatches { available, required: opts.batches });
    }
    let drift_scale = cfg.coefficients().1;
    let mut solver = LambdaPlusSolver::new(cfg.potential.n, cfg.grid, cfg.kappa);
    let mut warm: Option<Vec<f64>> = None;
    let mut samples = Vec::with_capacity(available);
    let mut failures = 0;
    let mut u = f.clone();
    let mut sub = cfg.clone();
    sub.stride = 1;
    let mut failed: Option<Error> = None;
    crate::integrator::run_steps(&mut u, &sub, cfg.noise_stream(), 0, burn + available as u64 * every, true, |k, _, u| {
        if failed.is_some() || k < burn || (k - burn) % every != 0 || samples.len() == available {
            return;
        }
        match solver.solve(u, &cfg.potential, warm.as_deref()) {
            Ok(r) => {
                samples.push(drift_scale * r.value);
                warm = Some(r.vector);
            }
            Err(Failure { estimate, vector, error }) => {
                if estimate.is_finite() {
                    failures += 1;
                    samples.push(drift_scale * estimate);
                    warm = Some(vector);
                } else {
                    failed = Some(error);
                }
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(e);
    }
    let b = batch_means(&samples, opts.batches)?;
    Ok(ErgodicEstimate { mean: b.mean, stderr: b.stderr, samples: samples.len(), failures })
}

/// `⟨(κΔ - ∇²V(u))h, h⟩ / ‖h‖₂²`.
pub fn rayleigh_quotient(u: &Field, h: &Field, spec: &PotentialSpec, kappa: f64) -> Result<f64> {
    u.check_shape(h)?;
    let op = SchrodingerOp::new(u, spec, kappa);
    let mut out = vec![0.0; h.values().len()];
    let mut scratch = vec![Complex64::new(0.0, 0.0); u.grid().len()];
    op.apply_a(h.values(), &mut out, &mut scratch);
    Ok(dot(&out, h.values()) / dot(h.values(), h.values()))
}

/// Result of a converged `λ₊` computation.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPlus {
    pub value: f64,
    /// Unit eigenvector (Euclidean norm over all grid values).
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

struct Failure {
    estimate: f64,
    vector: Vec<f64>,
    error: Error,
}

/// `λ₊(u)`, the largest eigenvalue of `h ↦ κΔh - ∇²V(u(x))h` on the grid.
pub fn lambda_plus(u: &Field, spec: &PotentialSpec, kappa: f64) -> Result<f64> {
    lambda_plus_full(u, spec, kappa, None).map(|r| r.value)
}

/// Like [`lambda_plus`], optionally warm-started from a previous eigenvector,
/// returning the eigenvector and convergence data.
pub fn lambda_plus_full(u: &Field, spec: &PotentialSpec, kappa: f64, warm: Option<&[f64]>) -> Result<LambdaPlus> {
    if u.components() != spec.n {
        return Err(Error::ShapeMismatch {
            expected: format!("{} components", spec.n),
            found: format!("{} components", u.components()),
        });
    }
    LambdaPlusSolver::new(spec.n, u.grid(), kappa).solve(u, spec, warm).map_err(|f| f.error)
}

/// `κΔ - H(x)` with `H(x) = ∇²V(u(x))`, acting on component-major vectors.
struct SchrodingerOp {
    n: usize,
    len: usize,
    kappa: f64,
    /// Row-major `n×n` Hessian per grid point.
    hess: Vec<f64>,
    /// `-(2πm)²` per transform index.
    lap: Vec<f64>,
    plan: std::rc::Rc<crate::fft::Radix2Plan>,
}

impl SchrodingerOp {
    fn new(u: &Field, spec: &PotentialSpec, kappa: f64) -> Self {
        let n = spec.n;
        let grid = u.grid();
        let len = grid.len();
        let mut hess = vec![0.0; len * n * n];
        let mut z = vec![0.0; n];
        for j in 0..len {
            u.point_into(j, &mut z);
            spec.hess_into(&z, &mut hess[j * n * n..(j + 1) * n * n]);
        }
        let lap = (0..len).map(|k| -grid.wavenumber_sq(k)).collect();
        Self { n, len, kappa, hess, lap, plan: field::plan(len) }
    }

    /// Smallest shift making `σ - (κΔ - H)` bounded below by 1.
    fn shift(&self) -> f64 {
        let nn = self.n * self.n;
        let worst = (0..self.len)
            .map(|j| -sym_eigenvalues(self.n, &self.hess[j * nn..(j + 1) * nn])[0])
            .fold(f64::NEG_INFINITY, f64::max);
        worst + 1.0
    }

    fn mean_trace(&self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for j in 0..self.len {
            for a in 0..n {
                acc += self.hess[j * n * n + a * n + a];
            }
        }
        acc / (self.len * n) as f64
    }

    /// Multiplies every component by `mult[k]` in Fourier space.
    fn fourier_multiply(&self, v: &[f64], mult: &[f64], out: &mut [f64], scratch: &mut [Complex64]) {
        let len = self.len;
        let inv = 1.0 / len as f64;
        for c in 0..self.n {
            for j in 0..len {
                scratch[j] = Complex64::new(v[c * len + j], 0.0);
            }
            self.plan.forward(scratch);
            for k in 0..len {
                scratch[k] *= mult[k] * inv;
            }
            self.plan.inverse(scratch);
            for j in 0..len {
                out[c * len + j] = scratch[j].re;
            }
        }
    }

    fn apply_a(&self, v: &[f64], out: &mut [f64], scratch: &mut [Complex64]) {
        let mult: Vec<f64> = self.lap.iter().map(|l| self.kappa * l).collect();
        self.fourier_multiply(v, &mult, out, scratch);
        self.subtract_hessian(v, out);
    }

    fn subtract_hessian(&self, v: &[f64], out: &mut [f64]) {
        let (n, len) = (self.n, self.len);
        for j in 0..len {
            let h = &self.hess[j * n * n..(j + 1) * n * n];
            for a in 0..n {
                let mut acc = 0.0;
                for b in 0..n {
                    acc += h[a * n + b] * v[b * len + j];
                }
                out[a * len + j] -= acc;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Block inverse iteration on `M = σ - (κΔ - H)` with Rayleigh-Ritz on
/// `κΔ - H`. Linear solves use conjugate gradients with a Fourier-diagonal
/// preconditioner. The block holds `n + 2` vectors so that the near-degenerate
/// tangential cluster of rotationally invariant potentials fits inside it.
pub(crate) struct LambdaPlusSolver {
    n: usize,
    grid: crate::field::GridSpec,
    kappa: f64,
    pub(crate) tol: f64,
    pub(crate) max_iter: usize,
}

impl LambdaPlusSolver {
    pub(crate) fn new(n: usize, grid: crate::field::GridSpec, kappa: f64) -> Self {
        Self { n, grid, kappa, tol: 1e-10, max_iter: 500 }
    }

    fn start_vector(&self, i: usize) -> Vec<f64> {
        let len = self.grid.len();
        let dim = self.n * len;
        if i < self.n {
            let mut v = vec![0.0; dim];
            v[i * len..(i + 1) * len].fill(1.0);
            return v;
        }
        // deterministic low-mode mixtures
        (0..dim)
            .map(|p| {
                let (c, j) = (p / len, p % len);
                let x = self.grid.x(j);
                let s = (i * 7 + c * 3 + 1) as f64;
                (2.0 * std::f64::consts::PI * (x * (1 + i % 3) as f64 + 0.13 * s)).cos() + 0.3 * (s * 1.7 + p as f64 * 0.61).sin()
            })
            .collect()
    }

    fn solve(&mut self, u: &Field, spec: &PotentialSpec, warm: Option<&[f64]>) -> std::result::Result<LambdaPlus, Failure> {
        let len = self.grid.len();
        let dim = self.n * len;
        let op = SchrodingerOp::new(u, spec, self.kappa);
        let sigma = op.shift();
        let hbar = op.mean_trace();
        let precond: Vec<f64> =
            op.lap.iter().map(|l| 1.0 / (sigma - self.kappa * l + hbar.max(1.0 - sigma))).collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); len];
        let block = (self.n + 2).min(dim);

        let mut v: Vec<Vec<f64>> = Vec::with_capacity(block);
        if let Some(w) = warm.filter(|w| w.len() == dim) {
            v.push(w.to_vec());
        }
        let mut next_start = 0;
        while v.len() < block {
            v.push(self.start_vector(next_start));
            next_start += 1;
        }
        orthonormalize(&mut v, |i| self.start_vector(block + 10 + i));

        let apply_m = |x: &[f64], out: &mut [f64], scratch: &mut [Complex64]| {
            op.apply_a(x, out, scratch);
            for (o, xi) in out.iter_mut().zip(x) {
                *o = sigma * xi - *o;
            }
        };

        let mut ritz = vec![0.0; block];
        let mut best = (f64::NAN, v[0].clone(), f64::INFINITY);
        for iter in 1..=self.max_iter {
            // W = M⁻¹ V
            let mut w: Vec<Vec<f64>> = Vec::with_capacity(block);
            for (i, vi) in v.iter().enumerate() {
                let guess_scale = if iter > 1 { 1.0 / (sigma - ritz[i]).max(1.0) } else { 1.0 / sigma };
                let x0: Vec<f64> = vi.iter().map(|x| x * guess_scale).collect();
                w.push(pcg(&apply_m, |r, z, s| op.fourier_multiply(r, &precond, z, s), vi, x0, &mut scratch));
            }
            orthonormalize(&mut w, |i| self.start_vector(block + 10 + iter * block + i));
            // Rayleigh-Ritz with A
            let mut aw: Vec<Vec<f64>> = Vec::with_capacity(block);
            for wi in &w {
                let mut out = vec![0.0; dim];
                op.apply_a(wi, &mut out, &mut scratch);
                aw.push(out);
            }
            let mut t = nalgebra::DMatrix::<f64>::zeros(block, block);
            for a in 0..block {
                for b in a..block {
                    let val = 0.5 * (dot(&w[a], &aw[b]) + dot(&w[b], &aw[a]));
                    t[(a, b)] = val;
                    t[(b, a)] = val;
                }
            }
            let eig = nalgebra::SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..block).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let mut av_top = vec![0.0; dim];
            for (slot, &col) in order.iter().enumerate() {
                let mut vi = vec![0.0; dim];
                for a in 0..block {
                    let q = eig.eigenvectors[(a, col)];
                    for p in 0..dim {
                        vi[p] += q * w[a][p];
                    }
                    if slot == 0 {
                        for p in 0..dim {
                            av_top[p] += q * aw[a][p];
                        }
                    }
                }
                v[slot] = vi;
                ritz[slot] = eig.eigenvalues[col];
            }
            let theta = ritz[0];
            let residual = av_top.iter().zip(&v[0]).map(|(a, x)| (a - theta * x).powi(2)).sum::<f64>().sqrt();
            if residual < best.2 {
                best = (theta, v[0].clone(), residual);
            }
            if residual <= self.tol * theta.abs().max(1.0) {
                return Ok(LambdaPlus { value: theta, vector: v[0].clone(), iterations: iter, residual });
            }
        }
        Err(Failure {
            estimate: best.0,
            vector: best.1,
            error: Error::NoConvergence { iterations: self.max_iter, estimate: best.0, residual: best.2 },
        })
    }
}

/// Modified Gram-Schmidt, twice; columns that collapse are replaced by
/// `fresh(i)` and re-orthogonalized.
fn orthonormalize(v: &mut [Vec<f64>], fresh: impl Fn(usize) -> Vec<f64>) {
    let mut replaced = 0;
    let mut i = 0;
    while i < v.len() {
        let before = norm(&v[i]);
        for _ in 0..2 {
            for k in 0..i {
                let (done, rest) = v.split_at_mut(i);
                let c = dot(&done[k], &rest[0]);
                for (x, y) in rest[0].iter_mut().zip(&done[k]) {
                    *x -= c * y;
                }
            }
        }
        let after = norm(&v[i]);
        if !(after > 1e-10 * before) || after == 0.0 {
            v[i] = fresh(replaced);
            replaced += 1;
            continue;
        }
        v[i].iter_mut().for_each(|x| *x /= after);
        i += 1;
    }
}

/// Preconditioned conjugate gradients for an SPD operator.
fn pcg(
    apply: &impl Fn(&[f64], &mut [f64], &mut [Complex64]),
    precond: impl Fn(&[f64], &mut [f64], &mut [Complex64]),
    b: &[f64],
    mut x: Vec<f64>,
    scratch: &mut [Complex64],
) -> Vec<f64> {
    let dim = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return vec![0.0; dim];
    }
    let mut ax = vec![0.0; dim];
    apply(&x, &mut ax, scratch);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = vec![0.0; dim];
    precond(&r, &mut z, scratch);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; dim];
    for _ in 0..2000 {
        if norm(&r) <= 1e-13 * bnorm {
            break;
        }
        apply(&p, &mut ap, scratch);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(&r, &mut z, scratch);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..dim {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Lower bound `χ₊(u)` on `-λ₊(u)` for rotationally invariant potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiPlus {
    /// `2∫g′(|u|²) - (4C_*²/κ)‖g′(|u|²)‖₂²`.
    pub value: f64,
    /// `dist_sup(u, 𝓜)`; the bound carries an extra error term when this is
    /// not small.
    pub dist_sup: f64,
}

pub fn chi_plus(u: &Field, spec: &PotentialSpec, kappa: f64, c_star: f64) -> Result<ChiPlus> {
    let (profile, _) = spec.profile()?;
    let len = u.grid().len();
    let mut z = vec![0.0; spec.n];
    let (mut mean, mut sq) = (0.0, 0.0);
    for j in 0..len {
        u.point_into(j, &mut z);
        let g1 = profile.g1(crate::potential::norm_sq(&z));
        mean += g1;
        sq += g1 * g1;
    }
    mean /= len as f64;
    sq /= len as f64;
    Ok(ChiPlus { value: 2.0 * mean - 4.0 * c_star * c_star / kappa * sq, dist_sup: spec.dist_sup(u) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{heat_semigroup, GridSpec};
    use crate::noise::NoiseStream;
    use crate::potential::{double_well, quadratic, sombrero, tilted_double_well, two_sphere};
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    #[test]
    fn tangent_of_free_equation_is_heat_flow() {
        let mut cfg = SimConfig::new(quadratic(2, 0.0), grid(16));
        cfg.kappa = 0.3;
        cfg.epsilon = 0.2;
        cfg.dt = 0.01;
        let h = Field::from_fn(2, cfg.grid, |c, x| (2.0 * PI * x).sin() + c as f64 * (4.0 * PI * x).cos());
        let st = TangentState::new(Field::zeros(2, cfg.grid), h.clone()).unwrap();
        let eta = NoiseStream::new(1, 0).increment(0, 2, cfg.grid);
        let next = tangent_step(&st, &cfg, Some(&eta)).unwrap();
        let exact = heat_semigroup(&h, 0.3, 0.01).unwrap();
        for (a, b) in next.tangent.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_tangent_mode_zero_decay() {
        let mut cfg = SimConfig::new(quadratic(1, 1.0), grid(8));
        cfg.epsilon = 0.5;
        cfg.dt = 0.01;
        let st = TangentState::new(Field::constant(&[0.3], cfg.grid), Field::constant(&[1.0], cfg.grid)).unwrap();
        let eta = NoiseStream::new(1, 0).increment(0, 1, cfg.grid);
        let next = tangent_step(&st, &cfg, Some(&eta)).unwrap();
        // mode 0 has no diffusion, so the tangent takes an explicit Euler step
        for v in next.tangent.values() {
            assert!((v - 0.99).abs() < 1e-15);
        }
    }

    #[test]
    fn sombrero_tangential_direction_is_frozen() {
        let mut cfg = SimConfig::new(sombrero(2), grid(8));
        cfg.epsilon = 0.0;
        let st = TangentState::new(Field::constant(&[1.0, 0.0], cfg.grid), Field::constant(&[0.0, 1.0], cfg.grid)).unwrap();
        let next = tangent_step(&st, &cfg, None).unwrap();
        assert_eq!(next.tangent, st.tangent);
    }

    #[test]
    fn tangent_step_is_linear() {
        let mut cfg = SimConfig::new(sombrero(3), grid(16));
        cfg.epsilon = 0.05;
        cfg.dt = 1e-3;
        let base = Field::from_fn(3, cfg.grid, |c, x| 0.8 + 0.3 * c as f64 * (2.0 * PI * x).cos());
        let h1 = Field::from_fn(3, cfg.grid, |c, x| (2.0 * PI * (x + 0.1 * c as f64)).sin());
        let h2 = Field::from_fn(3, cfg.grid, |c, x| 1.0 + c as f64 * x);
        let eta = NoiseStream::new(4, 0).increment(0, 3, cfg.grid);
        let run = |h: &Field| tangent_step(&TangentState::new(base.clone(), h.clone()).unwrap(), &cfg, Some(&eta)).unwrap();
        let combo = run(&h1.scaled(2.0).axpy(-0.7, &h2));
        let lin = run(&h1).tangent.scaled(2.0).axpy(-0.7, &run(&h2).tangent);
        for (a, b) in combo.tangent.values().iter().zip(lin.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_exponent_at_small_step() {
        let mut cfg = SimConfig::new(quadratic(1, 1.0), grid(16));
        cfg.kappa = 1.0;
        cfg.epsilon = 0.1;
        cfg.dt = 1e-3;
        cfg.horizon = 5.0;
        let opts = LyapunovOptions { lambda_plus_every: Some(50), ..Default::default() };
        let h0 = Field::from_fn(1, cfg.grid, |_, x| 1.0 + (2.0 * PI * x).cos());
        let r = top_lyapunov(&cfg, &Field::zeros(1, cfg.grid), &h0, &opts).unwrap();
        // explicit Euler on the mode-zero tangent: log(1 - dt)/dt
        assert!((r.lambda_top - (1.0f64 - 1e-3).ln() / 1e-3).abs() < 1e-9, "{}", r.lambda_top);
        assert!(r.stderr < 1e-9);
        assert!((r.ergodic_lambda_plus.unwrap() + 1.0).abs() < 1e-8);
        assert_eq!(r.ordering_holds(), Some(true));
    }

    #[test]
    fn double_well_fixed_point_exponent() {
        let mut cfg = SimConfig::new(double_well(), grid(16));
        cfg.epsilon = 0.0;
        cfg.dt = 2e-4;
        cfg.horizon = 2.0;
        let opts = LyapunovOptions { lambda_plus_every: None, ..Default::default() };
        let h0 = Field::from_fn(1, cfg.grid, |_, x| 0.5 + (2.0 * PI * x).sin());
        let r = top_lyapunov(&cfg, &Field::constant(&[1.0], cfg.grid), &h0, &opts).unwrap();
        assert!((r.lambda_top + 2.0).abs() < 1e-3, "{}", r.lambda_top);
    }

    #[test]
    fn exponent_ignores_tangent_scale() {
        let mut cfg = SimConfig::new(sombrero(2), grid(16));
        cfg.epsilon = 0.1;
        cfg.horizon = 0.5;
        let opts = LyapunovOptions { lambda_plus_every: None, ..Default::default() };
        let f = Field::from_fn(2, cfg.grid, |c, x| if c == 0 { 1.0 + 0.1 * (2.0 * PI * x).cos() } else { 0.2 });
        let h = Field::from_fn(2, cfg.grid, |c, x| c as f64 + x);
        let a = top_lyapunov(&cfg, &f, &h, &opts).unwrap();
        let b = top_lyapunov(&cfg, &f, &h.scaled(3.0), &opts).unwrap();
        assert!((a.lambda_top - b.lambda_top).abs() < 1e-12);
    }

    #[test]
    fn too_short_runs_are_rejected() {
        let mut cfg = SimConfig::new(double_well(), grid(8));
        cfg.horizon = 0.1;
        let r = top_lyapunov(&cfg, &Field::zeros(1, cfg.grid), &Field::constant(&[1.0], cfg.grid), &LyapunovOptions::default());
        assert!(matches!(r, Err(Error::InsufficientBatches { .. })));
    }

    #[test]
    fn lambda_plus_at_minima() {
        let g = grid(32);
        for spec in [double_well(), tilted_double_well(), quadratic(3, 1.7)] {
            for m in spec.minima().unwrap() {
                let u = Field::constant(&m.point, g);
                let lp = lambda_plus(&u, &spec, 1.0).unwrap();
                assert!((lp + m.lambda_min).abs() < 1e-9, "{}: {lp}", spec.name);
            }
        }
        for spec in [sombrero(2), sombrero(3), two_sphere(3)] {
            let (_, radii) = spec.profile().unwrap();
            for &r in radii {
                let mut w = vec![0.0; spec.n];
                w[0] = r;
                let lp = lambda_plus(&Field::constant(&w, g), &spec, 8.0).unwrap();
                assert!(lp.abs() < 1e-9, "{}: {lp}", spec.name);
            }
        }
    }

    #[test]
    fn rayleigh_quotient_is_below_lambda_plus() {
        let spec = sombrero(2);
        let g = grid(16);
        let u = Field::from_fn(2, g, |c, x| (c as f64 + 0.5) * (2.0 * PI * x).cos());
        let r = lambda_plus_full(&u, &spec, 1.0, None).unwrap();
        let v = Field::from_values(2, g, r.vector.clone()).unwrap();
        assert!((rayleigh_quotient(&u, &v, &spec, 1.0).unwrap() - r.value).abs() < 1e-10);
        let h = Field::from_fn(2, g, |c, x| 1.0 + c as f64 * x);
        assert!(rayleigh_quotient(&u, &h, &spec, 1.0).unwrap() <= r.value + 1e-12);
    }

    #[test]
    fn chi_plus_examples() {
        let spec = sombrero(3);
        let g = grid(16);
        let c = chi_plus(&Field::constant(&[1.0, 0.0, 0.0], g), &spec, 1.0, 0.5).unwrap();
        assert_eq!(c.value, 0.0);
        let c = chi_plus(&Field::zeros(3, g), &spec, 1.0, 0.5).unwrap();
        assert!((c.value + 1.25).abs() < 1e-15);
        assert!(chi_plus(&Field::zeros(1, g), &double_well(), 1.0, 0.5).is_err());
    }

    #[test]
    fn chi_plus_bounds_lambda_plus_near_the_sphere() {
        let spec = sombrero(3);
        let g = grid(32);
        for kappa in [1.0, 8.0] {
            let u = Field::from_fn(3, g, |c, x| if c == 0 { 1.0 + 0.05 * (2.0 * PI * x).cos() } else { 0.0 });
            let lp = lambda_plus(&u, &spec, kappa).unwrap();
            let chi = chi_plus(&u, &spec, kappa, 0.5).unwrap();
            assert!(-lp >= chi.value, "kappa {kappa}: -λ₊ = {} < χ₊ = {}", -lp, chi.value);
        }
    }
}
