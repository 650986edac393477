//! Flat `section.key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment; a `[section]` header
//! prefixes the keys that follow it, so `[sim]` then `kappa = 8` is the same
//! as `sim.kappa = 8`. Lists are comma separated.

use lyapsync::experiments::{ExperimentPlan, InitialSampler};
use lyapsync::integrator::{Scheme, SimConfig};
use lyapsync::lyapunov::LyapunovOptions;
use lyapsync::potential::{self, PotentialSpec};
use lyapsync::theory::Kappa0Reading;
use lyapsync::GridSpec;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("{key} = {value} is out of range: {constraint}")]
    OutOfRange { key: String, value: String, constraint: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Constant field at the first minimum (`r e₁` for spheres).
    Minimum,
    Zero,
    /// Random fields in a sup-norm ball around the origin.
    Ball,
}

impl InitKind {
    fn as_str(self) -> &'static str {
        match self {
            InitKind::Minimum => "minimum",
            InitKind::Zero => "zero",
            InitKind::Ball => "ball",
        }
    }
}

/// Fully defaulted configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub potential: String,
    /// Dimension override for families that allow it.
    pub potential_n: Option<usize>,
    /// Quadratic curvature.
    pub potential_a: Option<f64>,
    pub grid_n: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub rescaled: bool,
    pub stride: usize,
    pub dealias: bool,
    pub init: InitKind,
    pub init_radius: f64,
    pub init_modes: usize,
    pub renorm_every: usize,
    pub burn_in: f64,
    pub batches: usize,
    /// `0` disables λ₊ sampling.
    pub lambda_plus_every: usize,
    pub c_star: f64,
    pub m_trunc: usize,
    pub eta: f64,
    pub kappa0_reading: Kappa0Reading,
    pub sweep_kappa: Vec<f64>,
    pub sweep_epsilon: Vec<f64>,
    pub sweep_n: Vec<usize>,
    /// Number of derived seeds per sweep point.
    pub sweep_seeds: usize,
    pub sweep_budget: usize,
    pub sync_k: usize,
    pub sync_fit_burn_in: f64,
    pub pullback_start_times: Vec<f64>,
    pub concentration_delta: f64,
    pub seed: Option<u64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            potential: "sombrero".into(),
            potential_n: None,
            potential_a: None,
            grid_n: 256,
            kappa: 8.0,
            epsilon: 0.05,
            dt: 1e-3,
            horizon: 1.0,
            scheme: Scheme::ExponentialEuler,
            rescaled: false,
            stride: 100,
            dealias: false,
            init: InitKind::Minimum,
            init_radius: 2.0,
            init_modes: 3,
            renorm_every: 10,
            burn_in: 0.1,
            batches: 20,
            lambda_plus_every: 100,
            c_star: lyapsync::theory::C_STAR_DEFAULT,
            m_trunc: lyapsync::theory::M_TRUNC_DEFAULT,
            eta: 0.0,
            kappa0_reading: Kappa0Reading::Maximum,
            sweep_kappa: Vec::new(),
            sweep_epsilon: Vec::new(),
            sweep_n: Vec::new(),
            sweep_seeds: 1,
            sweep_budget: 10_000,
            sync_k: 5,
            sync_fit_burn_in: 0.0,
            pullback_start_times: vec![25.0, 50.0, 100.0],
            concentration_delta: 0.5,
            seed: None,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, message: message.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| parse_err(line, format!("{key}: cannot parse '{v}'")))
}

fn list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(line, key, s.trim())).collect()
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(parse_err(line, format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(line, "unterminated section header"))?
                    .trim();
                section = name.to_string();
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected 'key = value', got '{content}'")))?;
            let k = k.trim();
            let v = v.trim().trim_matches('"');
            let key = if section.is_empty() || k.contains('.') { k.to_string() } else { format!("{section}.{k}") };
            cfg.set(line, &key, v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "potential.name" => self.potential = v.to_string(),
            "potential.params" => {
                self.potential_n = None;
                self.potential_a = None;
                for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (pk, pv) = item
                        .split_once('=')
                        .or_else(|| item.split_once(':'))
                        .ok_or_else(|| parse_err(line, format!("potential.params: expected name=value, got '{item}'")))?;
                    match pk.trim() {
                        "n" => self.potential_n = Some(num(line, "potential.params n", pv.trim())?),
                        "a" => self.potential_a = Some(num(line, "potential.params a", pv.trim())?),
                        other => return Err(ConfigError::UnknownKey { line, key: format!("potential.params.{other}") }),
                    }
                }
            }
            "grid.N" => self.grid_n = num(line, key, v)?,
            "sim.kappa" => self.kappa = num(line, key, v)?,
            "sim.epsilon" => self.epsilon = num(line, key, v)?,
            "sim.dt" => self.dt = num(line, key, v)?,
            "sim.T" => self.horizon = num(line, key, v)?,
            "sim.scheme" => {
                self.scheme = Scheme::parse(v).ok_or_else(|| parse_err(line, format!("sim.scheme: unknown scheme '{v}'")))?
            }
            "sim.rescaled" => self.rescaled = boolean(line, key, v)?,
            "sim.stride" => self.stride = num(line, key, v)?,
            "sim.dealias" => self.dealias = boolean(line, key, v)?,
            "init.kind" => {
                self.init = match v {
                    "minimum" => InitKind::Minimum,
                    "zero" => InitKind::Zero,
                    "ball" => InitKind::Ball,
                    _ => return Err(parse_err(line, format!("init.kind: expected minimum, zero or ball, got '{v}'"))),
                }
            }
            "init.radius" => self.init_radius = num(line, key, v)?,
            "init.modes" => self.init_modes = num(line, key, v)?,
            "lyap.renorm_every" => self.renorm_every = num(line, key, v)?,
            "lyap.burn_in" => self.burn_in = num(line, key, v)?,
            "lyap.batches" => self.batches = num(line, key, v)?,
            "lyap.lambda_plus_every" => self.lambda_plus_every = num(line, key, v)?,
            "theory.c_star" => self.c_star = num(line, key, v)?,
            "theory.m_trunc" => self.m_trunc = num(line, key, v)?,
            "theory.eta" => self.eta = num(line, key, v)?,
            "theory.kappa0_reading" => {
                self.kappa0_reading = match v {
                    "maximum" => Kappa0Reading::Maximum,
                    "product" => Kappa0Reading::Product,
                    _ => return Err(parse_err(line, format!("theory.kappa0_reading: expected maximum or product, got '{v}'"))),
                }
            }
            "sweep.kappa" => self.sweep_kappa = list(line, key, v)?,
            "sweep.epsilon" => self.sweep_epsilon = list(line, key, v)?,
            "sweep.n" => self.sweep_n = list(line, key, v)?,
            "sweep.seeds" => self.sweep_seeds = num(line, key, v)?,
            "sweep.budget" => self.sweep_budget = num(line, key, v)?,
            "sync.k" => self.sync_k = num(line, key, v)?,
            "sync.fit_burn_in" => self.sync_fit_burn_in = num(line, key, v)?,
            "pullback.start_times" => self.pullback_start_times = list(line, key, v)?,
            "concentration.delta" => self.concentration_delta = num(line, key, v)?,
            "seed" => self.seed = Some(num(line, key, v)?),
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
        Ok(())
    }

    /// Range checks, reported with the violated constraint.
    pub fn check(&self) -> Result<(), ConfigError> {
        fn out(key: &str, value: impl ToString, constraint: &str) -> Result<(), ConfigError> {
            Err(ConfigError::OutOfRange { key: key.into(), value: value.to_string(), constraint: constraint.into() })
        }
        if self.grid_n < 8 || !self.grid_n.is_power_of_two() {
            return out("grid.N", self.grid_n, "a power of two >= 8");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return out("sim.kappa", self.kappa, "> 0");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return out("sim.epsilon", self.epsilon, "in [0, 1]");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return out("sim.dt", self.dt, "> 0");
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return out("sim.T", self.horizon, ">= 0");
        }
        if self.rescaled && self.epsilon == 0.0 {
            return out("sim.epsilon", self.epsilon, "> 0 when sim.rescaled = true");
        }
        if self.stride == 0 {
            return out("sim.stride", self.stride, ">= 1");
        }
        if !(self.init_radius > 0.0) {
            return out("init.radius", self.init_radius, "> 0");
        }
        if self.renorm_every == 0 {
            return out("lyap.renorm_every", self.renorm_every, ">= 1");
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return out("lyap.burn_in", self.burn_in, "in [0, 1)");
        }
        if self.batches < 2 {
            return out("lyap.batches", self.batches, ">= 2");
        }
        if !(self.c_star > 0.0) {
            return out("theory.c_star", self.c_star, "> 0");
        }
        if self.m_trunc == 0 {
            return out("theory.m_trunc", self.m_trunc, ">= 1");
        }
        if !(self.eta >= 0.0) {
            return out("theory.eta", self.eta, ">= 0");
        }
        if let Some(k) = self.sweep_kappa.iter().find(|k| !(**k > 0.0)) {
            return out("sweep.kappa", k, "all entries > 0");
        }
        if let Some(e) = self.sweep_epsilon.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return out("sweep.epsilon", e, "all entries in [0, 1]");
        }
        if let Some(n) = self.sweep_n.iter().find(|n| **n == 0) {
            return out("sweep.n", n, "all entries >= 1");
        }
        if self.sweep_seeds == 0 {
            return out("sweep.seeds", self.sweep_seeds, ">= 1");
        }
        if self.sync_k < 2 {
            return out("sync.k", self.sync_k, ">= 2");
        }
        if !(0.0..1.0).contains(&self.sync_fit_burn_in) {
            return out("sync.fit_burn_in", self.sync_fit_burn_in, "in [0, 1)");
        }
        if let Some(t) = self.pullback_start_times.iter().find(|t| !(**t >= 0.0)) {
            return out("pullback.start_times", t, "all entries >= 0");
        }
        if !(self.concentration_delta > 0.0) {
            return out("concentration.delta", self.concentration_delta, "> 0");
        }
        Ok(())
    }

    /// Canonical text with every key, which parses back to `self`.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("potential.name", self.potential.clone());
        let mut params = Vec::new();
        if let Some(n) = self.potential_n {
            params.push(format!("n={n}"));
        }
        if let Some(a) = self.potential_a {
            params.push(format!("a={a:?}"));
        }
        kv("potential.params", params.join(", "));
        kv("grid.N", self.grid_n.to_string());
        kv("sim.kappa", format!("{:?}", self.kappa));
        kv("sim.epsilon", format!("{:?}", self.epsilon));
        kv("sim.dt", format!("{:?}", self.dt));
        kv("sim.T", format!("{:?}", self.horizon));
        kv("sim.scheme", self.scheme.as_str().into());
        kv("sim.rescaled", self.rescaled.to_string());
        kv("sim.stride", self.stride.to_string());
        kv("sim.dealias", self.dealias.to_string());
        kv("init.kind", self.init.as_str().into());
        kv("init.radius", format!("{:?}", self.init_radius));
        kv("init.modes", self.init_modes.to_string());
        kv("lyap.renorm_every", self.renorm_every.to_string());
        kv("lyap.burn_in", format!("{:?}", self.burn_in));
        kv("lyap.batches", self.batches.to_string());
        kv("lyap.lambda_plus_every", self.lambda_plus_every.to_string());
        kv("theory.c_star", format!("{:?}", self.c_star));
        kv("theory.m_trunc", self.m_trunc.to_string());
        kv("theory.eta", format!("{:?}", self.eta));
        kv(
            "theory.kappa0_reading",
            match self.kappa0_reading {
                Kappa0Reading::Maximum => "maximum",
                Kappa0Reading::Product => "product",
            }
            .into(),
        );
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        kv("sweep.kappa", floats(&self.sweep_kappa));
        kv("sweep.epsilon", floats(&self.sweep_epsilon));
        kv("sweep.n", join(&self.sweep_n));
        kv("sweep.seeds", self.sweep_seeds.to_string());
        kv("sweep.budget", self.sweep_budget.to_string());
        kv("sync.k", self.sync_k.to_string());
        kv("sync.fit_burn_in", format!("{:?}", self.sync_fit_burn_in));
        kv("pullback.start_times", floats(&self.pullback_start_times));
        kv("concentration.delta", format!("{:?}", self.concentration_delta));
        if let Some(seed) = self.seed {
            kv("seed", seed.to_string());
        }
        s
    }

    pub fn potential_spec(&self) -> lyapsync::Result<PotentialSpec> {
        potential::by_name(&self.potential, self.potential_n, self.potential_a)
    }

    pub fn sim_config(&self, seed: u64) -> lyapsync::Result<SimConfig> {
        let mut cfg = SimConfig::new(self.potential_spec()?, GridSpec::new(self.grid_n)?);
        cfg.kappa = self.kappa;
        cfg.epsilon = self.epsilon;
        cfg.dt = self.dt;
        cfg.horizon = self.horizon;
        cfg.scheme = self.scheme;
        cfg.rescaled = self.rescaled;
        cfg.stride = self.stride;
        cfg.dealias = self.dealias;
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lyapunov_options(&self) -> LyapunovOptions {
        LyapunovOptions {
            renorm_every: self.renorm_every,
            burn_in: self.burn_in,
            batches: self.batches,
            lambda_plus_every: (self.lambda_plus_every > 0).then_some(self.lambda_plus_every),
        }
    }

    /// Plan over the sweep axes with the given seeds.
    pub fn plan(&self, name: &str, seeds: Vec<u64>) -> lyapsync::Result<ExperimentPlan> {
        let base = self.sim_config(seeds.first().copied().unwrap_or(0))?;
        let n = base.potential.n;
        let mut plan = ExperimentPlan::new(name, base);
        plan.kappas = self.sweep_kappa.clone();
        plan.epsilons = self.sweep_epsilon.clone();
        plan.dims = self.sweep_n.clone();
        plan.seeds = seeds;
        plan.k_initial = self.sync_k;
        plan.sampler = InitialSampler::Ball { center: vec![0.0; n], radius: self.init_radius, max_mode: self.init_modes };
        plan.lyap = self.lyapunov_options();
        plan.fit_burn_in = self.sync_fit_burn_in;
        plan.budget = self.sweep_budget;
        plan.c_star = self.c_star;
        plan.m_trunc = self.m_trunc;
        plan.eta = self.eta;
        plan.kappa0_reading = self.kappa0_reading;
        Ok(plan)
    }
}

/// Where the master seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    CommandLine,
    ConfigFile,
    Environment,
    Default,
}

/// Precedence: `--seed`, then the config file, then `LYAPSYNC_SEED`, then 0.
pub fn resolve_seed(
    cli: Option<u64>,
    config: Option<u64>,
    env: Option<&str>,
) -> Result<(u64, SeedSource), ConfigError> {
    if let Some(s) = cli {
        return Ok((s, SeedSource::CommandLine));
    }
    if let Some(s) = config {
        return Ok((s, SeedSource::ConfigFile));
    }
    if let Some(v) = env {
        let s = v.trim().parse().map_err(|_| ConfigError::OutOfRange {
            key: "LYAPSYNC_SEED".into(),
            value: v.into(),
            constraint: "an unsigned 64-bit integer".into(),
        })?;
        return Ok((s, SeedSource::Environment));
    }
    Ok((0, SeedSource::Default))
}

/// Per-run seeds: the master seed itself for run 0, then successive draws
/// from a generator keyed by it.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(master);
    std::iter::once(master).chain((1..count).map(|_| rng.random())).collect()
}
