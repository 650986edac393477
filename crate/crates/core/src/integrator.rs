//! Time stepping for `(∂_t - κΔ)u = b(u) + √(2ε) ξ` on the unit torus.
//!
//! Both schemes work mode by mode in Fourier space with the drift evaluated
//! pseudo-spectrally. With `λ_m = κ(2πm)²`:
//!
//! * exponential Euler:
//!   `û'(m) = e^{-λ_m dt} û(m) + dt φ₁(-λ_m dt) b̂(m) + √(2ε) σ_m η_m`,
//!   `σ_m² = (1 - e^{-2λ_m dt}) / (2λ_m)`, `σ_0² = dt`;
//! * semi-implicit Euler:
//!   `û'(m) = (û(m) + dt b̂(m) + √(2ε dt) η_m) / (1 + λ_m dt)`.
//!
//! `η_m` are the standard complex Gaussians of [`NoiseStream`]. The noise
//! term of the exponential scheme is the exact Ornstein-Uhlenbeck variance,
//! so with `b ≡ 0` the scheme samples the stochastic convolution exactly.
//!
//! The rescaled system `(∂_t - (κ/ε)Δ)ũ = ε⁻¹ b(ũ) + √2 ξ` is handled by
//! substituting coefficients; recorded times are then rescaled times.

use crate::error::{Error, Result};
use crate::fft::{forward_real_pair, inverse_real_pair, Radix2Plan};
use crate::field::{self, Field, GridSpec, SpectralField};
use crate::noise::NoiseStream;
use crate::potential::PotentialSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ExponentialEuler,
    SemiImplicitEuler,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ExponentialEuler => "exponential_euler",
            Scheme::SemiImplicitEuler => "semi_implicit_euler",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exponential_euler" | "exponential" | "ee" => Some(Scheme::ExponentialEuler),
            "semi_implicit_euler" | "semi_implicit" | "si" => Some(Scheme::SemiImplicitEuler),
            _ => None,
        }
    }
}

/// Which time variable a run records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clock {
    Physical,
    Rescaled,
}

impl Clock {
    pub fn as_str(&self) -> &'static str {
        match self {
            Clock::Physical => "physical",
            Clock::Rescaled => "rescaled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub potential: PotentialSpec,
    pub kappa: f64,
    pub epsilon: f64,
    pub grid: GridSpec,
    pub dt: f64,
    /// Total simulated time `T` (in the run's clock).
    pub horizon: f64,
    pub scheme: Scheme,
    pub rescaled: bool,
    /// Master seed; runs derive streams from `(seed, stream)`.
    pub seed: u64,
    pub stream: u64,
    /// Summaries and snapshots are recorded every `stride` steps.
    pub stride: usize,
    pub keep_snapshots: bool,
    /// 2/3-rule dealiasing of the drift.
    pub dealias: bool,
}

impl SimConfig {
    pub fn new(potential: PotentialSpec, grid: GridSpec) -> Self {
        Self {
            potential,
            kappa: 8.0,
            epsilon: 0.05,
            grid,
            dt: 1e-3,
            horizon: 1.0,
            scheme: Scheme::ExponentialEuler,
            rescaled: false,
            seed: 0,
            stream: 0,
            stride: 100,
            keep_snapshots: false,
            dealias: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if self.rescaled && self.epsilon == 0.0 {
            return bad("the rescaled system needs epsilon > 0".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be non-negative, got {}", self.horizon));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        Ok(())
    }

    pub fn clock(&self) -> Clock {
        if self.rescaled {
            Clock::Rescaled
        } else {
            Clock::Physical
        }
    }

    /// `(κ_eff, drift scale, noise amplitude)` after the rescaling substitution.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        if self.rescaled {
            (self.kappa / self.epsilon, 1.0 / self.epsilon, 2f64.sqrt())
        } else {
            (self.kappa, 1.0, (2.0 * self.epsilon).sqrt())
        }
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    /// Explicit-part stiffness `λ_stiff` (drift scale times the Hessian bound).
    pub fn stiffness(&self) -> f64 {
        self.coefficients().1 * self.potential.stiffness_bound()
    }

    /// Whether `dt <= 0.5 min(1, 1/λ_stiff)`. Diagnostic only.
    pub fn dt_within_stiffness_bound(&self) -> bool {
        self.dt <= 0.5 * (1.0f64).min(1.0 / self.stiffness())
    }

    pub fn noise_stream(&self) -> NoiseStream {
        NoiseStream::new(self.seed, self.stream)
    }
}

#[inline]
fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// Pre-computed per-mode coefficients and scratch space for one grid.
pub(crate) struct Stepper {
    components: usize,
    grid: GridSpec,
    linear: Vec<f64>,
    forcing: Vec<f64>,
    noise_sd: Vec<f64>,
    drift_scale: f64,
    plan: Rc<Radix2Plan>,
    scratch: Vec<Complex64>,
    state_hat: Vec<Complex64>,
    force_hat: Vec<Complex64>,
    out_hat: Vec<Complex64>,
    force: Field,
}

impl Stepper {
    pub(crate) fn new(cfg: &SimConfig, components: usize) -> Self {
        let grid = cfg.grid;
        let len = grid.len();
        let (kappa, drift_scale, amp) = cfg.coefficients();
        let dt = cfg.dt;
        let mut linear = vec![0.0; len];
        let mut forcing = vec![0.0; len];
        let mut noise_sd = vec![0.0; len];
        for k in 0..len {
            let lam = kappa * grid.wavenumber_sq(k);
            match cfg.scheme {
                Scheme::ExponentialEuler => {
                    linear[k] = (-lam * dt).exp();
                    forcing[k] = dt * phi1(-lam * dt);
                    let var = if lam == 0.0 { dt } else { -(-2.0 * lam * dt).exp_m1() / (2.0 * lam) };
                    noise_sd[k] = amp * var.sqrt();
                }
                Scheme::SemiImplicitEuler => {
                    let d = 1.0 + lam * dt;
                    linear[k] = 1.0 / d;
                    forcing[k] = dt / d;
                    noise_sd[k] = amp * dt.sqrt() / d;
                }
            }
            if cfg.dealias && 3 * grid.mode(k).unsigned_abs() as usize > len {
                forcing[k] = 0.0;
            }
        }
        let zero = Complex64::new(0.0, 0.0);
        Self {
            components,
            grid,
            linear,
            forcing,
            noise_sd,
            drift_scale,
            plan: field::plan(len),
            scratch: vec![zero; len],
            state_hat: vec![zero; len],
            force_hat: vec![zero; len],
            out_hat: vec![zero; 2 * len],
            force: Field::zeros(components, grid),
        }
    }

    /// Fills the forcing field with `drift_scale · b(u)`.
    pub(crate) fn load_drift(&mut self, potential: &PotentialSpec, u: &Field) {
        potential.drift_into(u, &mut self.force);
        if self.drift_scale != 1.0 {
            let s = self.drift_scale;
            self.force.values_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Fills the forcing field with `-drift_scale · ∇²V(u(x)) h(x)`.
    pub(crate) fn load_linearized(&mut self, potential: &PotentialSpec, u: &Field, h: &Field) {
        let n = self.components;
        let len = self.grid.len();
        let mut z = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let s = self.drift_scale;
        for j in 0..len {
            u.point_into(j, &mut z);
            potential.hess_into(&z, &mut hess);
            for a in 0..n {
                let mut acc = 0.0;
                for b in 0..n {
                    acc += hess[a * n + b] * h.values()[b * len + j];
                }
                self.force.values_mut()[a * len + j] = -s * acc;
            }
        }
    }

    pub(crate) fn zero_forcing(&mut self) {
        self.force.values_mut().fill(0.0);
    }

    /// Advances `state` in place by one step with the loaded forcing and an
    /// optional noise increment.
    pub(crate) fn advance(&mut self, state: &mut Field, noise: Option<&SpectralField>) {
        let len = self.grid.len();
        let inv_n = 1.0 / len as f64;
        let mut c = 0;
        while c < self.components {
            // Two components per inverse transform.
            let pair = c + 1 < self.components;
            for slot in 0..(if pair { 2 } else { 1 }) {
                let comp = c + slot;
                forward_real_pair(
                    &self.plan,
                    state.component(comp),
                    self.force.component(comp),
                    &mut self.scratch,
                    &mut self.state_hat,
                    &mut self.force_hat,
                );
                let out = &mut self.out_hat[slot * len..(slot + 1) * len];
                for k in 0..len {
                    let mut z = self.state_hat[k] * (self.linear[k] * inv_n)
                        + self.force_hat[k] * (self.forcing[k] * inv_n);
                    if let Some(eta) = noise {
                        z += eta.component(comp)[k] * self.noise_sd[k];
                    }
                    out[k] = z;
                }
            }
            if pair {
                let (lo, hi) = self.out_hat.split_at(len);
                let values = state.values_mut();
                let (a, b) = values[c * len..(c + 2) * len].split_at_mut(len);
                inverse_real_pair(&self.plan, lo, &hi[..len], &mut self.scratch, a, b);
            } else {
                self.scratch.copy_from_slice(&self.out_hat[..len]);
                self.plan.inverse(&mut self.scratch);
                for (d, z) in state.component_mut(c).iter_mut().zip(&self.scratch) {
                    *d = z.re;
                }
            }
            c += if pair { 2 } else { 1 };
        }
    }
}

/// One time step from `u` with an explicit noise increment (standard complex
/// Gaussian mode increments as produced by [`NoiseStream::increment`]).
pub fn step(u: &Field, cfg: &SimConfig, noise_increment: Option<&SpectralField>) -> Result<Field> {
    cfg.validate()?;
    check_components(u, cfg)?;
    let mut stepper = Stepper::new(cfg, u.components());
    let mut out = u.clone();
    stepper.load_drift(&cfg.potential, u);
    stepper.advance(&mut out, noise_increment);
    if !out.is_finite() {
        return Err(Error::NonFinite { time: cfg.dt });
    }
    Ok(out)
}

fn check_components(u: &Field, cfg: &SimConfig) -> Result<()> {
    if u.components() != cfg.potential.n || u.grid() != cfg.grid {
        return Err(Error::ShapeMismatch {
            expected: format!("n={}, N={}", cfg.potential.n, cfg.grid.len()),
            found: format!("n={}, N={}", u.components(), u.grid().len()),
        });
    }
    Ok(())
}

/// Recorded output of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub clock: Clock,
    pub times: Vec<f64>,
    /// Empty unless `keep_snapshots` was set.
    pub snapshots: Vec<Field>,
    pub l2_norm: Vec<f64>,
    pub sup_norm: Vec<f64>,
    pub bulk_potential: Vec<f64>,
    pub dist_to_minima: Vec<f64>,
}

impl Trajectory {
    fn new(clock: Clock) -> Self {
        Self {
            clock,
            times: Vec::new(),
            snapshots: Vec::new(),
            l2_norm: Vec::new(),
            sup_norm: Vec::new(),
            bulk_potential: Vec::new(),
            dist_to_minima: Vec::new(),
        }
    }

    fn record(&mut self, t: f64, u: &Field, potential: Option<&PotentialSpec>, keep: bool) {
        self.times.push(t);
        self.l2_norm.push(field::l2_norm(u));
        self.sup_norm.push(field::sup_norm(u));
        match potential {
            Some(p) => {
                self.bulk_potential.push(p.bulk_potential(u));
                self.dist_to_minima.push(p.dist_sup(u));
            }
            None => {
                self.bulk_potential.push(0.0);
                self.dist_to_minima.push(0.0);
            }
        }
        if keep {
            self.snapshots.push(u.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Drives `u` forward from absolute step `start_step` for `steps` steps,
/// calling `observe(step_index, t, u)` at the start and every `stride`
/// steps. Noise for absolute step `k` is `stream.increment(k)`.
pub(crate) fn run_steps(
    u: &mut Field,
    cfg: &SimConfig,
    stream: NoiseStream,
    start_step: u64,
    steps: u64,
    drift: bool,
    mut observe: impl FnMut(u64, f64, &Field),
) -> Result<()> {
    let mut stepper = Stepper::new(cfg, u.components());
    let mut eta = SpectralField::zeros(u.components(), cfg.grid);
    let with_noise = cfg.coefficients().2 > 0.0;
    let stride = cfg.stride as u64;
    observe(0, 0.0, u);
    for i in 0..steps {
        if drift {
            stepper.load_drift(&cfg.potential, u);
        } else {
            stepper.zero_forcing();
        }
        if with_noise {
            stream.increment_into(start_step + i, &mut eta);
        }
        stepper.advance(u, with_noise.then_some(&eta));
        let t = (i + 1) as f64 * cfg.dt;
        if !u.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        if (i + 1) % stride == 0 {
            observe(i + 1, t, u);
        }
    }
    Ok(())
}

/// Integrates from `f` over `[0, T]`.
pub fn simulate(f: &Field, cfg: &SimConfig) -> Result<Trajectory> {
    simulate_from(f, cfg, 0)
}

/// Like [`simulate`] but consuming noise from absolute step `start_step`
/// onward; restarting from a snapshot at step `r` with `start_step = r`
/// continues the original run exactly.
pub fn simulate_from(f: &Field, cfg: &SimConfig, start_step: u64) -> Result<Trajectory> {
    cfg.validate()?;
    check_components(f, cfg)?;
    let mut traj = Trajectory::new(cfg.clock());
    let mut u = f.clone();
    let p = &cfg.potential;
    run_steps(&mut u, cfg, cfg.noise_stream(), start_step, cfg.steps(), true, |_, t, u| {
        traj.record(t, u, Some(p), cfg.keep_snapshots)
    })?;
    Ok(traj)
}

/// The stochastic convolution: zero drift, zero initial data.
pub fn stochastic_convolution(cfg: &SimConfig) -> Result<Trajectory> {
    stochastic_convolution_from(cfg, 0)
}

/// Stochastic convolution started at absolute step `start_step` (i.e. `w_s`
/// with `s = start_step · dt`), recorded on `[0, T]` relative to the start.
pub fn stochastic_convolution_from(cfg: &SimConfig, start_step: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let mut traj = Trajectory::new(cfg.clock());
    let mut w = Field::zeros(cfg.potential.n, cfg.grid);
    run_steps(&mut w, cfg, cfg.noise_stream(), start_step, cfg.steps(), false, |_, t, u| {
        traj.record(t, u, None, cfg.keep_snapshots)
    })?;
    Ok(traj)
}

/// Output of [`multi_simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTrajectory {
    pub trajectories: Vec<Trajectory>,
    pub times: Vec<f64>,
    /// L² diameter `max_{a<b} ‖u_a - u_b‖₂` at each recorded time.
    pub diameters: Vec<f64>,
    /// Pairwise distances `‖u_a - u_b‖₂` for `a < b`, one series per pair.
    pub pairwise: Vec<((usize, usize), Vec<f64>)>,
}

/// L² diameter of a set of fields.
pub fn diameter(fields: &[Field]) -> f64 {
    let mut d: f64 = 0.0;
    for a in 0..fields.len() {
        for b in a + 1..fields.len() {
            d = d.max(field::l2_norm(&fields[a].sub(&fields[b])));
        }
    }
    d
}

/// Advances all `fs` in lockstep with one shared noise stream, starting at
/// absolute step `start_step`. Returns the final states and calls
/// `observe(t, states)` at every recorded time.
pub(crate) fn run_shared(
    fs: &[Field],
    cfg: &SimConfig,
    start_step: u64,
    steps: u64,
    mut observe: impl FnMut(f64, &[Field]),
) -> Result<Vec<Field>> {
    cfg.validate()?;
    for f in fs {
        check_components(f, cfg)?;
    }
    let mut states = fs.to_vec();
    let mut stepper = Stepper::new(cfg, cfg.potential.n);
    let stream = cfg.noise_stream();
    let mut eta = SpectralField::zeros(cfg.potential.n, cfg.grid);
    let with_noise = cfg.coefficients().2 > 0.0;
    observe(0.0, &states);
    for i in 0..steps {
        if with_noise {
            stream.increment_into(start_step + i, &mut eta);
        }
        for u in states.iter_mut() {
            stepper.load_drift(&cfg.potential, u);
            stepper.advance(u, with_noise.then_some(&eta));
        }
        let t = (i + 1) as f64 * cfg.dt;
        if states.iter().any(|u| !u.is_finite()) {
            return Err(Error::NonFinite { time: t });
        }
        if (i + 1) % cfg.stride as u64 == 0 {
            observe(t, &states);
        }
    }
    Ok(states)
}

/// Simulates every initial field with the same noise realization.
pub fn multi_simulate(fs: &[Field], cfg: &SimConfig) -> Result<MultiTrajectory> {
    let k = fs.len();
    let mut trajectories: Vec<Trajectory> = (0..k).map(|_| Trajectory::new(cfg.clock())).collect();
    let mut times = Vec::new();
    let mut diameters = Vec::new();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let mut pairwise: Vec<((usize, usize), Vec<f64>)> = pairs.iter().map(|&p| (p, Vec::new())).collect();
    run_shared(fs, cfg, 0, cfg.steps(), |t, states| {
        times.push(t);
        for (traj, u) in trajectories.iter_mut().zip(states) {
            traj.record(t, u, Some(&cfg.potential), cfg.keep_snapshots);
        }
        let mut d: f64 = 0.0;
        for ((a, b), series) in pairwise.iter_mut() {
            let dist = field::l2_norm(&states[*a].sub(&states[*b]));
            series.push(dist);
            d = d.max(dist);
        }
        diameters.push(d);
    })?;
    Ok(MultiTrajectory { trajectories, times, diameters, pairwise })
}

/// `E^{(κ)}(u) = (κ/2)‖∇u‖₂² + 𝐕(u)`.
pub fn energy(u: &Field, potential: &PotentialSpec, kappa: f64) -> f64 {
    0.5 * field::h1_seminorm(u, kappa).powi(2) + potential.bulk_potential(u)
}
