//! Packaged studies: shared-noise synchronization, pullback windows,
//! concentration of the invariant measure, and Lyapunov estimates against
//! the analytic bounds.
//!
//! A plan is a base configuration plus sweep axes. Sweep point `p` (in
//! cross-product order) with seed `s` uses the noise stream `(s, p)`, so every
//! run has its own stream and results do not depend on scheduling.

use crate::error::{Error, Result};
use crate::field::{self, Field, GridSpec};
use crate::integrator::{diameter, run_shared, run_steps, SimConfig};
use crate::lyapunov::{top_lyapunov, LyapunovOptions, LyapunovReport};
use crate::noise::NoiseStream;
use crate::potential::{self, PotentialKind, PotentialSpec};
use crate::stats::{fit_line, mean_stderr, LineFit};
use crate::theory::{self, Kappa0Reading};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Diameters are floored here before taking logs.
pub const DIAMETER_FLOOR: f64 = 1e-13;

const INITIAL_PURPOSE: u64 = 0x494e4954;

/// How initial fields are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialSampler {
    /// `center + ρ·f` where `f` is a random trigonometric polynomial with
    /// modes `≤ max_mode`, scaled to pointwise sup norm one, and `ρ` is
    /// uniform on `(0, radius]`.
    Ball { center: Vec<f64>, radius: f64, max_mode: usize },
    /// Constant fields at the minima, cycling through them (for spheres,
    /// `rᵢ e₁`).
    Minima,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub name: String,
    pub base: SimConfig,
    /// Empty axes fall back to the base value.
    pub kappas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Ambient dimensions; the potential is rebuilt by name for each.
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Number of shared-noise initial fields.
    pub k_initial: usize,
    pub sampler: InitialSampler,
    pub lyap: LyapunovOptions,
    /// Fraction of the horizon skipped before the log-diameter fit.
    pub fit_burn_in: f64,
    /// Upper bound on `points × seeds`.
    pub budget: usize,
    pub c_star: f64,
    pub m_trunc: usize,
    pub eta: f64,
    pub kappa0_reading: Kappa0Reading,
    /// Attach a Lyapunov run with the same noise to every sync report.
    pub matched_lyapunov: bool,
}

impl ExperimentPlan {
    pub fn new(name: &str, base: SimConfig) -> Self {
        let n = base.potential.n;
        Self {
            name: name.to_string(),
            base,
            kappas: Vec::new(),
            epsilons: Vec::new(),
            dims: Vec::new(),
            seeds: vec![0],
            k_initial: 5,
            sampler: InitialSampler::Ball { center: vec![0.0; n], radius: 2.0, max_mode: 3 },
            lyap: LyapunovOptions::default(),
            fit_burn_in: 0.0,
            budget: 10_000,
            c_star: theory::C_STAR_DEFAULT,
            m_trunc: theory::M_TRUNC_DEFAULT,
            eta: 0.0,
            kappa0_reading: Kappa0Reading::Maximum,
            matched_lyapunov: false,
        }
    }

    /// Configurations of the sweep cross product, in order.
    pub fn points(&self) -> Result<Vec<SimConfig>> {
        let kappas = if self.kappas.is_empty() { vec![self.base.kappa] } else { self.kappas.clone() };
        let epsilons = if self.epsilons.is_empty() { vec![self.base.epsilon] } else { self.epsilons.clone() };
        let dims = if self.dims.is_empty() { vec![self.base.potential.n] } else { self.dims.clone() };
        let total = kappas.len() * epsilons.len() * dims.len() * self.seeds.len().max(1);
        if total > self.budget {
            return Err(Error::InvalidConfig(format!(
                "sweep has {total} runs, over the budget of {}",
                self.budget
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        let mut out = Vec::new();
        for &n in &dims {
            let spec = if n == self.base.potential.n {
                self.base.potential.clone()
            } else {
                rebuild_with_dim(&self.base.potential, n)?
            };
            for &kappa in &kappas {
                for &epsilon in &epsilons {
                    let mut cfg = self.base.clone();
                    cfg.potential = spec.clone();
                    cfg.kappa = kappa;
                    cfg.epsilon = epsilon;
                    cfg.stream = out.len() as u64;
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }

    /// `(point, seed)` runs with seeds applied.
    fn runs(&self) -> Result<Vec<SimConfig>> {
        let points = self.points()?;
        Ok(points
            .iter()
            .flat_map(|p| {
                self.seeds.iter().map(move |&s| {
                    let mut cfg = p.clone();
                    cfg.seed = s;
                    cfg
                })
            })
            .collect())
    }
}

fn rebuild_with_dim(spec: &PotentialSpec, n: usize) -> Result<PotentialSpec> {
    let a = match &spec.kind {
        PotentialKind::NonDegenerate { model: potential::PointModel::Quadratic { a }, .. } => Some(*a),
        _ => None,
    };
    potential::by_name(&spec.name, Some(n), a)
}

/// Draws `k` initial fields for one run.
pub fn sample_initial(
    sampler: &InitialSampler,
    spec: &PotentialSpec,
    grid: GridSpec,
    k: usize,
    stream: NoiseStream,
) -> Vec<Field> {
    let n = spec.n;
    match sampler {
        InitialSampler::Minima => {
            let points: Vec<Vec<f64>> = match &spec.kind {
                PotentialKind::NonDegenerate { minima, .. } => minima.iter().map(|m| m.point.clone()).collect(),
                PotentialKind::RotInvariant { radii, .. } => radii
                    .iter()
                    .map(|&r| {
                        let mut w = vec![0.0; n];
                        w[0] = r;
                        w
                    })
                    .collect(),
            };
            let offset = (stream.seed as usize) % points.len();
            (0..k).map(|i| Field::constant(&points[(i + offset) % points.len()], grid)).collect()
        }
        InitialSampler::Ball { center, radius, max_mode } => {
            let mut rng = stream.aux_rng(INITIAL_PURPOSE);
            (0..k)
                .map(|_| {
                    let coeffs: Vec<f64> =
                        (0..n * (2 * max_mode + 1)).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let mut f = Field::from_fn(n, grid, |c, x| {
                        let row = &coeffs[c * (2 * max_mode + 1)..(c + 1) * (2 * max_mode + 1)];
                        let mut v = row[0];
                        for m in 1..=*max_mode {
                            let w = 2.0 * PI * m as f64 * x;
                            v += row[2 * m - 1] * w.cos() + row[2 * m] * w.sin();
                        }
                        v
                    });
                    let sup = field::sup_norm(&f).max(1e-300);
                    let rho = radius * (1.0 - rng.random::<f64>());
                    f.values_mut().iter_mut().for_each(|v| *v *= rho / sup);
                    let shift = Field::constant(&center[..n.min(center.len())], grid);
                    if shift.components() == n {
                        f = f.axpy(1.0, &shift);
                    }
                    f
                })
                .collect()
        }
    }
}

/// Log-diameter fit of a shared-noise run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub potential: String,
    pub n: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub stream: u64,
    pub times: Vec<f64>,
    pub diameters: Vec<f64>,
    pub initial_diameter: f64,
    pub final_diameter: f64,
    /// Least-squares line through `log max(d, floor)` on the fit window,
    /// stopping at the first time the floor is reached.
    pub fit: Option<LineFit>,
    /// The diameter reached the floor; the fit (if any) covers only the
    /// points before it.
    pub floor_hit: bool,
    pub lyapunov: Option<LyapunovReport>,
}

impl SyncReport {
    pub fn rate(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn contraction(&self) -> f64 {
        self.final_diameter / self.initial_diameter
    }
}

fn fit_log_diameter(times: &[f64], diameters: &[f64], t_start: f64) -> (Option<LineFit>, bool) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut floor_hit = false;
    for (&t, &d) in times.iter().zip(diameters) {
        if d <= DIAMETER_FLOOR {
            floor_hit = true;
            break;
        }
        if t >= t_start {
            xs.push(t);
            ys.push(d.ln());
        }
    }
    (fit_line(&xs, &ys), floor_hit)
}

/// K-point shared-noise runs, one report per (sweep point, seed).
pub fn run_sync(plan: &ExperimentPlan) -> Result<Vec<SyncReport>> {
    if plan.k_initial < 2 {
        return Err(Error::InvalidConfig("synchronization needs at least two initial fields".into()));
    }
    let runs = plan.runs()?;
    runs.par_iter().map(|cfg| sync_one(plan, cfg)).collect()
}

fn sync_one(plan: &ExperimentPlan, cfg: &SimConfig) -> Result<SyncReport> {
    let stream = cfg.noise_stream();
    let fs = sample_initial(&plan.sampler, &cfg.potential, cfg.grid, plan.k_initial, stream);
    let mut times = Vec::new();
    let mut diameters = Vec::new();
    run_shared(&fs, cfg, 0, cfg.steps(), |t, states| {
        times.push(t);
        diameters.push(diameter(states));
    })?;
    let (fit, floor_hit) = fit_log_diameter(&times, &diameters, plan.fit_burn_in * cfg.horizon);
    let lyapunov = if plan.matched_lyapunov {
        let h0 = Field::from_fn(cfg.potential.n, cfg.grid, |c, x| 1.0 + 0.5 * (2.0 * PI * (x + 0.1 * c as f64)).cos());
        Some(top_lyapunov(cfg, &fs[0], &h0, &plan.lyap)?)
    } else {
        None
    };
    Ok(SyncReport {
        potential: cfg.potential.name.clone(),
        n: cfg.potential.n,
        kappa: cfg.kappa,
        epsilon: cfg.epsilon,
        seed: cfg.seed,
        stream: cfg.stream,
        initial_diameter: diameters[0],
        final_diameter: *diameters.last().unwrap(),
        times,
        diameters,
        fit,
        floor_hit,
        lyapunov,
    })
}

/// Diameters at time 0 of runs started at `-t` for each start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackReport {
    pub potential: String,
    pub n: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub stream: u64,
    pub start_times: Vec<f64>,
    /// Raw L² diameters at time 0.
    pub diameters: Vec<f64>,
    /// Whether the floored diameters are non-increasing in the start time.
    pub monotone: bool,
}

/// For each seed, the same initial fields are started at every `-t` and run
/// to time 0 through one noise realization on `[-max t, 0]`.
pub fn run_pullback(plan: &ExperimentPlan, start_times: &[f64]) -> Result<Vec<PullbackReport>> {
    if plan.k_initial < 2 {
        return Err(Error::InvalidConfig("pullback needs at least two initial fields".into()));
    }
    if start_times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidConfig("start times must be non-negative".into()));
    }
    let mut sorted = start_times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let runs = plan.runs()?;
    runs.par_iter()
        .map(|cfg| {
            let steps_of = |t: f64| (t / cfg.dt).round() as u64;
            let window = steps_of(*sorted.last().unwrap_or(&0.0));
            let fs = sample_initial(&plan.sampler, &cfg.potential, cfg.grid, plan.k_initial, cfg.noise_stream());
            let mut diameters = Vec::with_capacity(sorted.len());
            for &t in &sorted {
                let steps = steps_of(t);
                let end = run_shared(&fs, cfg, window - steps, steps, |_, _| {})?;
                diameters.push(diameter(&end));
            }
            let floored: Vec<f64> = diameters.iter().map(|d| d.max(DIAMETER_FLOOR)).collect();
            let monotone = floored.windows(2).all(|w| w[1] <= w[0]);
            Ok(PullbackReport {
                potential: cfg.potential.name.clone(),
                n: cfg.potential.n,
                kappa: cfg.kappa,
                epsilon: cfg.epsilon,
                seed: cfg.seed,
                stream: cfg.stream,
                start_times: sorted.clone(),
                diameters,
                monotone,
            })
        })
        .collect()
}

/// Occupation statistics for one sweep point, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub potential: String,
    pub n: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub seeds: usize,
    /// Fraction of recorded times with `dist_sup(u, 𝓜) < δ`.
    pub fraction: f64,
    pub fraction_stderr: f64,
    /// Fraction of time closest (in L²) to each minimum.
    pub occupations: Vec<f64>,
    pub occupation_stderr: Vec<f64>,
    /// `p^{(κ)}` for comparison.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTable {
    pub delta: f64,
    pub rows: Vec<ConcentrationRow>,
    /// Fractions increase as ε decreases (rows of equal κ and n compared).
    pub monotone: bool,
}

/// Time fractions near the minimum set, per sweep point. Each seed starts at
/// a minimum (cycling through them by seed) and discards the burn-in
/// fraction `plan.lyap.burn_in` of the horizon.
pub fn run_concentration(plan: &ExperimentPlan, delta: f64) -> Result<ConcentrationTable> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    let points = plan.points()?;
    let mut rows = Vec::with_capacity(points.len());
    for point in &points {
        let per_seed: Vec<(f64, Vec<f64>)> = plan
            .seeds
            .par_iter()
            .map(|&seed| {
                let mut cfg = point.clone();
                cfg.seed = seed;
                occupation_run(plan, &cfg, delta)
            })
            .collect::<Result<_>>()?;
        let m = point.potential.minimum_count();
        let fractions: Vec<f64> = per_seed.iter().map(|r| r.0).collect();
        let (fraction, fraction_stderr) = mean_stderr(&fractions);
        let mut occupations = Vec::with_capacity(m);
        let mut occupation_stderr = Vec::with_capacity(m);
        for i in 0..m {
            let occ: Vec<f64> = per_seed.iter().map(|r| r.1[i]).collect();
            let (a, b) = mean_stderr(&occ);
            occupations.push(a);
            occupation_stderr.push(b);
        }
        rows.push(ConcentrationRow {
            potential: point.potential.name.clone(),
            n: point.potential.n,
            kappa: point.kappa,
            epsilon: point.epsilon,
            seeds: plan.seeds.len(),
            fraction,
            fraction_stderr,
            occupations,
            occupation_stderr,
            weights: theory::weights(&point.potential, point.kappa, plan.m_trunc)?,
        });
    }
    let monotone = rows.iter().all(|a| {
        rows.iter()
            .filter(|b| b.kappa == a.kappa && b.n == a.n && b.epsilon < a.epsilon)
            .all(|b| b.fraction >= a.fraction)
    });
    Ok(ConcentrationTable { delta, rows, monotone })
}

fn occupation_run(plan: &ExperimentPlan, cfg: &SimConfig, delta: f64) -> Result<(f64, Vec<f64>)> {
    let f = sample_initial(&InitialSampler::Minima, &cfg.potential, cfg.grid, 1, cfg.noise_stream()).remove(0);
    let burn = (plan.lyap.burn_in * cfg.steps() as f64).ceil() as u64;
    let m = cfg.potential.minimum_count();
    let mut near = 0usize;
    let mut total = 0usize;
    let mut counts = vec![0usize; m];
    let spec = &cfg.potential;
    let mut u = f;
    run_steps(&mut u, cfg, cfg.noise_stream(), 0, cfg.steps(), true, |k, _, u| {
        if k < burn || k == 0 {
            return;
        }
        total += 1;
        if spec.dist_sup(u) < delta {
            near += 1;
        }
        counts[spec.nearest_minimum(u)] += 1;
    })?;
    let total = total.max(1) as f64;
    Ok((near as f64 / total, counts.iter().map(|&c| c as f64 / total).collect()))
}

/// One row of a bound comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub potential: String,
    pub n: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub report: LyapunovReport,
    /// `bound_main1` (non-degenerate) or `bound_main2` total; `None` when
    /// the bound does not apply (`κ ≤ κ₀`).
    pub bound: Option<f64>,
    pub bound_kind: String,
}

impl ComparisonRow {
    /// The ergodic ordering `λ̂ ≤ ⟨λ₊⟩ + 3σ`.
    pub fn ordering_holds(&self) -> bool {
        self.report.ordering_holds().unwrap_or(false)
    }
}

/// Joint Lyapunov and theory runs over the sweep. Rotationally invariant
/// potentials are compared on the rescaled clock, where the bound applies to
/// `λ̃ = λ/ε`.
pub fn run_bound_comparison(plan: &ExperimentPlan) -> Result<Vec<ComparisonRow>> {
    if plan.lyap.lambda_plus_every.is_none() {
        return Err(Error::InvalidConfig("bound comparison needs lambda_plus sampling".into()));
    }
    let runs = plan.runs()?;
    runs.par_iter()
        .map(|cfg| {
            let spec = &cfg.potential;
            let f = sample_initial(&InitialSampler::Minima, spec, cfg.grid, 1, cfg.noise_stream()).remove(0);
            let h0 = Field::from_fn(spec.n, cfg.grid, |c, x| 1.0 + 0.5 * (2.0 * PI * (x + 0.1 * c as f64)).cos());
            let report = top_lyapunov(cfg, &f, &h0, &plan.lyap)?;
            let (bound, bound_kind) = if spec.is_rot_invariant() {
                match theory::bound_main2(spec, cfg.kappa, plan.c_star, plan.kappa0_reading, plan.m_trunc) {
                    Ok(b) => (Some(b.total), "main2"),
                        Err(Error::KappaTooSmall { .. }) => (None, "main2"),
                    Err(e) => return Err(e),
                }
            } else {
                (Some(theory::bound_main1(spec, cfg.kappa, plan.eta, plan.m_trunc)?), "main1")
            };
            Ok(ComparisonRow {
                potential: spec.name.clone(),
                n: spec.n,
                kappa: cfg.kappa,
                epsilon: cfg.epsilon,
                seed: cfg.seed,
                report,
                bound,
                bound_kind: bound_kind.to_string(),
            })
        })
        .collect()
}

/// The experiments run by `compare` and checked for the ergodic ordering.
pub fn default_suite() -> Vec<ExperimentPlan> {
    let grid = GridSpec::new(32).expect("grid");
    let lyap = LyapunovOptions { renorm_every: 10, burn_in: 0.1, batches: 20, lambda_plus_every: Some(100) };
    let mut plans = Vec::new();

    let mut cfg = SimConfig::new(potential::quadratic(1, 1.0), grid);
    cfg.kappa = 1.0;
    cfg.epsilon = 0.1;
    cfg.horizon = 50.0;
    let mut p = ExperimentPlan::new("quadratic", cfg);
    p.lyap = lyap;
    plans.push(p);

    let mut cfg = SimConfig::new(potential::double_well(), grid);
    cfg.kappa = 1.0;
    cfg.epsilon = 0.05;
    cfg.horizon = 100.0;
    let mut p = ExperimentPlan::new("double_well", cfg);
    p.lyap = lyap;
    plans.push(p);

    let mut cfg = SimConfig::new(potential::tilted_double_well(), grid);
    cfg.kappa = 1.0;
    cfg.epsilon = 0.1;
    cfg.horizon = 100.0;
    let mut p = ExperimentPlan::new("tilted_double_well", cfg);
    p.lyap = lyap;
    plans.push(p);

    let mut cfg = SimConfig::new(potential::sombrero(3), grid);
    cfg.kappa = 8.0;
    cfg.rescaled = true;
    cfg.horizon = 50.0;
    let mut p = ExperimentPlan::new("sombrero3", cfg);
    p.epsilons = vec![0.1, 0.05];
    p.lyap = lyap;
    plans.push(p);

    let mut cfg = SimConfig::new(potential::two_sphere(3), grid);
    cfg.kappa = 8.0;
    cfg.epsilon = 0.05;
    cfg.rescaled = true;
    cfg.horizon = 50.0;
    let mut p = ExperimentPlan::new("two_sphere3", cfg);
    p.lyap = lyap;
    plans.push(p);

    plans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{double_well, quadratic, sombrero};

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    #[test]
    fn linear_sync_rate() {
        let mut cfg = SimConfig::new(quadratic(1, 1.0), grid(8));
        cfg.epsilon = 0.0;
        cfg.kappa = 1.0;
        cfg.horizon = 5.0;
        cfg.stride = 50;
        let mut plan = ExperimentPlan::new("lin", cfg);
        plan.k_initial = 3;
        plan.sampler = InitialSampler::Ball { center: vec![0.0], radius: 1.0, max_mode: 0 };
        let reports = run_sync(&plan).unwrap();
        let rate = reports[0].rate().unwrap();
        assert!((rate + 1.0).abs() < 1e-3, "{rate}");
        assert!(!reports[0].floor_hit);
    }

    #[test]
    fn diameter_is_max_pairwise_distance() {
        let g = grid(16);
        let spec = sombrero(2);
        let fs = sample_initial(
            &InitialSampler::Ball { center: vec![0.0, 0.0], radius: 2.0, max_mode: 3 },
            &spec,
            g,
            4,
            NoiseStream::new(3, 0),
        );
        let mut best: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                best = best.max(field::l2_norm(&fs[a].sub(&fs[b])));
            }
        }
        assert_eq!(diameter(&fs), best);
        assert!(fs.iter().all(|f| field::sup_norm(f) <= 2.0 + 1e-12));
    }

    #[test]
    fn linear_pullback() {
        let mut cfg = SimConfig::new(quadratic(1, 0.5), grid(8));
        cfg.epsilon = 0.0;
        cfg.kappa = 1.0;
        cfg.dt = 1e-3;
        let mut plan = ExperimentPlan::new("pb", cfg);
        plan.k_initial = 2;
        plan.sampler = InitialSampler::Ball { center: vec![0.0], radius: 1.0, max_mode: 0 };
        let r = &run_pullback(&plan, &[0.0, 1.0, 2.0]).unwrap()[0];
        let d0 = r.diameters[0];
        for (t, d) in r.start_times.iter().zip(&r.diameters) {
            let exact = (1.0f64 - 0.5e-3).powf(t / 1e-3) * d0;
            assert!((d - exact).abs() < 1e-12 * d0.max(1.0));
        }
        assert!(r.monotone);
    }

    #[test]
    fn zero_noise_concentration_is_total() {
        let mut cfg = SimConfig::new(double_well(), grid(16));
        cfg.epsilon = 0.0;
        cfg.horizon = 1.0;
        cfg.stride = 10;
        let mut plan = ExperimentPlan::new("c", cfg);
        plan.seeds = vec![0, 1];
        plan.m_trunc = 100;
        let t = run_concentration(&plan, 0.1).unwrap();
        assert_eq!(t.rows[0].fraction, 1.0);
        assert_eq!(t.rows[0].occupations, vec![0.5, 0.5]);
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = SimConfig::new(double_well(), grid(8));
        let mut plan = ExperimentPlan::new("b", cfg);
        plan.epsilons = vec![0.1, 0.2];
        plan.seeds = (0..10).collect();
        plan.budget = 15;
        assert!(plan.points().is_err());
    }

    #[test]
    fn points_carry_distinct_streams() {
        let cfg = SimConfig::new(sombrero(3), grid(8));
        let mut plan = ExperimentPlan::new("s", cfg);
        plan.epsilons = vec![0.1, 0.05];
        plan.dims = vec![2, 3];
        let pts = plan.points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].potential.n, 2);
        let streams: std::collections::HashSet<u64> = pts.iter().map(|p| p.stream).collect();
        assert_eq!(streams.len(), 4);
    }

    #[test]
    fn sync_is_reproducible() {
        let mut cfg = SimConfig::new(sombrero(2), grid(16));
        cfg.epsilon = 0.1;
        cfg.horizon = 0.2;
        cfg.stride = 10;
        let mut plan = ExperimentPlan::new("r", cfg);
        plan.seeds = vec![4, 5];
        let a = run_sync(&plan).unwrap();
        let b = run_sync(&plan).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].diameters, a[1].diameters);
    }
}
