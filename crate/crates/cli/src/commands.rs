use crate::config::{derive_seeds, resolve_seed, Config, ConfigError, InitKind};
use crate::manifest::{RunManifest, RunRecord};
use lyapsync::experiments::{
    default_suite, run_bound_comparison, run_concentration, run_pullback, run_sync, sample_initial, ComparisonRow,
    ExperimentPlan, InitialSampler,
};
use lyapsync::integrator::{simulate, SimConfig};
use lyapsync::lyapunov::top_lyapunov;
use lyapsync::output::{self, LinePlot, Table};
use lyapsync::potential::PotentialKind;
use lyapsync::selftest::run_selftest;
use lyapsync::theory;
use lyapsync::{Field, PotentialSpec};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Lyapunov,
    Bound,
    Sync,
    Pullback,
    Concentration,
    Compare { suite: bool },
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Lyapunov => "lyapunov",
            Command::Bound => "bound",
            Command::Sync => "sync",
            Command::Pullback => "pullback",
            Command::Concentration => "concentration",
            Command::Compare { .. } => "compare",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub plots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    SelftestFailed,
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::SelftestFailed => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => f.write_str(m),
            Failure::SelftestFailed => f.write_str("selftest failed"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<lyapsync::Error> for Failure {
    fn from(e: lyapsync::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Runs one subcommand. `env_seed` is the value of `LYAPSYNC_SEED`, if set.
pub fn run(cmd: Command, opts: &Options, env_seed: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    if cmd == Command::Selftest {
        return selftest(out);
    }
    let config = match &opts.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    let (master, source) = resolve_seed(opts.seed, config.seed, env_seed)?;
    let seeds = derive_seeds(master, config.sweep_seeds);
    std::fs::create_dir_all(&opts.out)?;
    let mut resolved = config.clone();
    resolved.seed = Some(master);
    let mut manifest = RunManifest::new(
        &opts.out,
        cmd.name(),
        master,
        source,
        rayon::current_num_threads(),
        resolved.emit(),
        seeds.clone(),
    );
    manifest.write()?;
    std::fs::write(manifest.output_path("config.resolved"), resolved.emit())?;
    manifest.record_output("config.resolved");

    let mut ctx = Ctx { config: &config, seeds: &seeds, opts, manifest: &mut manifest, out };
    let result = match cmd {
        Command::Simulate => ctx.simulate(),
        Command::Lyapunov => ctx.lyapunov(),
        Command::Bound => ctx.bound(),
        Command::Sync => ctx.sync(),
        Command::Pullback => ctx.pullback(),
        Command::Concentration => ctx.concentration(),
        Command::Compare { suite } => ctx.compare(suite),
        Command::Selftest => unreachable!(),
    };
    manifest.finish(result.as_ref().err().map(|e| e.to_string()))?;
    result
}

fn selftest(out: &mut dyn Write) -> Result<(), Failure> {
    let report = run_selftest();
    for c in &report.checks {
        writeln!(out, "{:<28} {}  {} ({:.3} s)", c.name, if c.passed { "ok  " } else { "FAIL" }, c.detail, c.seconds)?;
    }
    if report.passed() {
        writeln!(out, "all {} checks passed", report.checks.len())?;
        Ok(())
    } else {
        Err(Failure::SelftestFailed)
    }
}

struct Ctx<'a> {
    config: &'a Config,
    seeds: &'a [u64],
    opts: &'a Options,
    manifest: &'a mut RunManifest,
    out: &'a mut dyn Write,
}

fn initial_field(config: &Config, cfg: &SimConfig) -> Field {
    let spec = &cfg.potential;
    match config.init {
        InitKind::Zero => Field::zeros(spec.n, cfg.grid),
        InitKind::Minimum => Field::constant(&first_minimum(spec), cfg.grid),
        InitKind::Ball => sample_initial(
            &InitialSampler::Ball { center: vec![0.0; spec.n], radius: config.init_radius, max_mode: config.init_modes },
            spec,
            cfg.grid,
            1,
            cfg.noise_stream(),
        )
        .remove(0),
    }
}

fn first_minimum(spec: &PotentialSpec) -> Vec<f64> {
    match &spec.kind {
        PotentialKind::NonDegenerate { minima, .. } => minima[0].point.clone(),
        PotentialKind::RotInvariant { radii, .. } => {
            let mut w = vec![0.0; spec.n];
            w[0] = radii[0];
            w
        }
    }
}

impl Ctx<'_> {
    fn write_table(&mut self, name: &str, table: &Table) -> Result<(), Failure> {
        table.write(&self.manifest.output_path(name))?;
        self.manifest.record_output(name);
        Ok(())
    }

    fn write_plot(&mut self, name: &str, plot: &LinePlot) -> Result<(), Failure> {
        if self.opts.plots {
            plot.write(&self.manifest.output_path(name))?;
            self.manifest.record_output(name);
        }
        Ok(())
    }

    /// Runs `f` once per derived seed (in parallel), recording wall time.
    fn per_seed<T: Send>(
        &mut self,
        label: &str,
        f: impl Fn(&ExperimentPlan) -> lyapsync::Result<T> + Sync,
    ) -> Result<Vec<T>, Failure> {
        let plans: Vec<ExperimentPlan> =
            self.seeds.iter().map(|&s| self.config.plan(label, vec![s])).collect::<lyapsync::Result<_>>()?;
        // check the full sweep against the budget once
        self.config.plan(label, self.seeds.to_vec())?.points()?;
        let results: Vec<(lyapsync::Result<T>, f64)> = plans
            .par_iter()
            .map(|p| {
                let start = Instant::now();
                let r = f(p);
                (r, start.elapsed().as_secs_f64())
            })
            .collect();
        let mut out = Vec::with_capacity(results.len());
        for ((r, secs), &seed) in results.into_iter().zip(self.seeds) {
            self.manifest.runs.push(RunRecord { label: label.into(), seed, wall_seconds: secs });
            out.push(r?);
        }
        self.manifest.write()?;
        Ok(out)
    }

    fn simulate(&mut self) -> Result<(), Failure> {
        let config = self.config;
        let runs = self.per_seed("simulate", |plan| {
            plan.points()?
                .into_iter()
                .map(|mut cfg| {
                    cfg.seed = plan.seeds[0];
                    let f = initial_field(config, &cfg);
                    simulate(&f, &cfg)
                })
                .collect::<lyapsync::Result<Vec<_>>>()
        })?;
        let mut plot = LinePlot::new("distance to minima", "t", "sup-norm distance");
        for (i, trajs) in runs.iter().enumerate() {
            for (p, t) in trajs.iter().enumerate() {
                let name = format!("trajectory_{p}_{i}.csv");
                self.write_table(&name, &output::trajectory_table(t))?;
                plot.series.push((format!("point {p} seed {i}"), t.times.iter().copied().zip(t.dist_to_minima.iter().copied()).collect()));
                writeln!(
                    self.out,
                    "point {p} seed {}: {} samples, final l2 norm {:.6}",
                    self.seeds[i],
                    t.len(),
                    t.l2_norm.last().copied().unwrap_or(f64::NAN)
                )?;
            }
        }
        self.write_plot("trajectory.svg", &plot)
    }

    fn lyapunov(&mut self) -> Result<(), Failure> {
        let config = self.config;
        let runs = self.per_seed("lyapunov", |plan| {
            plan.points()?
                .into_iter()
                .map(|mut cfg| {
                    cfg.seed = plan.seeds[0];
                    let f = initial_field(config, &cfg);
                    let h0 = Field::from_fn(cfg.potential.n, cfg.grid, |c, x| {
                        1.0 + 0.5 * (2.0 * PI * (x + 0.1 * c as f64)).cos()
                    });
                    top_lyapunov(&cfg, &f, &h0, &plan.lyap).map(|r| (cfg, r))
                })
                .collect::<lyapsync::Result<Vec<_>>>()
        })?;
        let mut table: Option<Table> = None;
        let mut plot = LinePlot::new("top Lyapunov exponent", "epsilon", "lambda");
        let mut points = Vec::new();
        for (cfg, r) in runs.iter().flatten() {
            let t = output::lyapunov_table(cfg, r);
            match &mut table {
                Some(acc) => acc.rows.extend(t.rows),
                None => table = Some(t),
            }
            points.push((cfg.epsilon, r.lambda_top));
            let erg = r.ergodic_lambda_plus.map(|e| format!(", ergodic lambda_plus {e:.6}")).unwrap_or_default();
            writeln!(
                self.out,
                "kappa {} eps {} seed {}: lambda_top = {:.6} +- {:.6} ({}){erg}",
                cfg.kappa,
                cfg.epsilon,
                cfg.seed,
                r.lambda_top,
                r.stderr,
                r.clock.as_str()
            )?;
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        plot.series.push(("lambda_top".into(), points));
        self.write_table("lyapunov.csv", table.as_ref().expect("at least one run"))?;
        self.write_plot("lyapunov.svg", &plot)
    }

    fn bound(&mut self) -> Result<(), Failure> {
        let c = self.config;
        let kappas = if c.sweep_kappa.is_empty() { vec![c.kappa] } else { c.sweep_kappa.clone() };
        let dims: Vec<Option<usize>> =
            if c.sweep_n.is_empty() { vec![c.potential_n] } else { c.sweep_n.iter().map(|&n| Some(n)).collect() };
        let start = Instant::now();
        let mut table: Option<Table> = None;
        for n in dims {
            let spec = lyapsync::potential::by_name(&c.potential, n, c.potential_a)?;
            for &kappa in &kappas {
                let b = theory::theory_bound(&spec, kappa, c.c_star, c.eta, c.kappa0_reading, c.m_trunc)?;
                let line = if let Some(m) = &b.main2 {
                    format!("main={:.3}, error={:+.3}, total={:.3}", m.main_term, m.error_term, m.total)
                } else if b.kappa_too_small {
                    format!("kappa = {kappa} does not exceed kappa0 = {:.3}; no degenerate bound", b.kappa0.unwrap_or(f64::NAN))
                } else {
                    format!("bound_main1={:.6}", b.bound_main1.unwrap_or(f64::NAN))
                };
                writeln!(self.out, "{} n={} kappa={kappa}: {line}", spec.name, spec.n)?;
                self.bound_details(&spec, &b)?;
                let t = output::bound_table(&spec, &b);
                match &mut table {
                    Some(acc) => acc.rows.extend(t.rows),
                    None => table = Some(t),
                }
            }
        }
        self.manifest.runs.push(RunRecord {
            label: "bound".into(),
            seed: self.manifest.master_seed,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        self.write_table("bound.csv", table.as_ref().expect("at least one kappa"))
    }

    /// Aligned per-minimum table under the summary line.
    fn bound_details(&mut self, spec: &PotentialSpec, b: &theory::TheoryBound) -> Result<(), Failure> {
        let (label, curv): (&str, Vec<f64>) = match &spec.kind {
            PotentialKind::NonDegenerate { minima, .. } => ("lambda_min", minima.iter().map(|m| m.lambda_min).collect()),
            PotentialKind::RotInvariant { radii, .. } => {
                ("(n-2)/r^2", radii.iter().map(|r| (spec.n as f64 - 2.0) / (r * r)).collect())
            }
        };
        writeln!(self.out, "  {:>3} {:>14} {:>14} {:>14} {:>14}", "i", "theta", "weight", label, "E_i")?;
        for i in 0..b.weights.len() {
            let e = b.e_values.get(i).map(|v| format!("{v:14.6}")).unwrap_or_else(|| format!("{:>14}", "-"));
            writeln!(self.out, "  {i:>3} {:14.6e} {:14.6} {:14.6} {e}", b.thetas[i], b.weights[i], curv[i])?;
        }
        if let (Some(c), Some(k0)) = (b.c_max, b.kappa0) {
            writeln!(self.out, "  C_max = {c:.6}, kappa0 = {k0:.6}")?;
        }
        if let Some(m) = &b.main2 {
            writeln!(self.out, "  main term with the -(n - 5/2) coefficient: {:.6}", m.intro_main_term)?;
        }
        Ok(())
    }

    fn sync(&mut self) -> Result<(), Failure> {
        let reports: Vec<_> = self.per_seed("sync", run_sync)?.into_iter().flatten().collect();
        for r in &reports {
            writeln!(
                self.out,
                "kappa {} eps {} seed {}: diameter {:.3e} -> {:.3e}, rate {}",
                r.kappa,
                r.epsilon,
                r.seed,
                r.initial_diameter,
                r.final_diameter,
                r.rate().map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
            )?;
        }
        self.write_table("sync.csv", &output::sync_table(&reports))?;
        self.write_table("sync_series.csv", &output::sync_series_table(&reports))?;
        let mut plot = LinePlot::new("shared-noise diameter", "t", "diameter");
        plot.log_y = true;
        for r in &reports {
            plot.series.push((
                format!("eps {} seed {}", r.epsilon, r.seed),
                r.times.iter().copied().zip(r.diameters.iter().map(|d| d.max(lyapsync::experiments::DIAMETER_FLOOR))).collect(),
            ));
        }
        self.write_plot("sync.svg", &plot)
    }

    fn pullback(&mut self) -> Result<(), Failure> {
        let starts = self.config.pullback_start_times.clone();
        let reports: Vec<_> = self.per_seed("pullback", |p| run_pullback(p, &starts))?.into_iter().flatten().collect();
        let monotone = reports.iter().filter(|r| r.monotone).count();
        writeln!(self.out, "pullback diameters non-increasing in {monotone}/{} runs", reports.len())?;
        self.write_table("pullback.csv", &output::pullback_table(&reports))
    }

    fn concentration(&mut self) -> Result<(), Failure> {
        let plan = self.config.plan("concentration", self.seeds.to_vec())?;
        let start = Instant::now();
        let table = run_concentration(&plan, self.config.concentration_delta)?;
        self.manifest.runs.push(RunRecord {
            label: "concentration".into(),
            seed: self.manifest.master_seed,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        for r in &table.rows {
            writeln!(
                self.out,
                "kappa {} eps {}: fraction {:.4} +- {:.4}, occupations {:?}, weights {:?}",
                r.kappa, r.epsilon, r.fraction, r.fraction_stderr, r.occupations, r.weights
            )?;
        }
        writeln!(self.out, "fraction increases as epsilon decreases: {}", table.monotone)?;
        self.write_table("concentration.csv", &output::concentration_table(&table))
    }

    fn compare(&mut self, suite: bool) -> Result<(), Failure> {
        let rows: Vec<ComparisonRow> = if suite {
            let start = Instant::now();
            let mut rows = Vec::new();
            for mut plan in default_suite() {
                plan.seeds = self.seeds.to_vec();
                rows.extend(run_bound_comparison(&plan)?);
            }
            self.manifest.runs.push(RunRecord {
                label: "compare-suite".into(),
                seed: self.manifest.master_seed,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
            rows
        } else {
            self.per_seed("compare", run_bound_comparison)?.into_iter().flatten().collect()
        };
        let mut plot = LinePlot::new("exponent against the bound", "epsilon", "lambda");
        let mut est = Vec::new();
        let mut bounds = Vec::new();
        for r in &rows {
            writeln!(
                self.out,
                "{} kappa {} eps {}: lambda {:.4} +- {:.4}, ergodic {:.4}, {} {}; ordering {}",
                r.potential,
                r.kappa,
                r.epsilon,
                r.report.lambda_top,
                r.report.stderr,
                r.report.ergodic_lambda_plus.unwrap_or(f64::NAN),
                r.bound_kind,
                r.bound.map(|b| format!("{b:.4}")).unwrap_or_else(|| "n/a".into()),
                if r.ordering_holds() { "holds" } else { "VIOLATED" }
            )?;
            est.push((r.epsilon, r.report.lambda_top));
            if let Some(b) = r.bound {
                bounds.push((r.epsilon, b));
            }
        }
        est.sort_by(|a, b| a.0.total_cmp(&b.0));
        bounds.sort_by(|a, b| a.0.total_cmp(&b.0));
        plot.series.push(("lambda_top".into(), est));
        plot.series.push(("bound".into(), bounds));
        self.write_table("comparison.csv", &output::comparison_table(&rows))?;
        self.write_plot("comparison.svg", &plot)
    }
}
