//! CSV tables with fixed schemas and minimal SVG line plots.

use crate::error::{Error, Result};
use crate::experiments::{ComparisonRow, ConcentrationTable, PullbackReport, SyncReport};
use crate::integrator::{MultiTrajectory, SimConfig, Trajectory};
use crate::lyapunov::LyapunovReport;
use crate::potential::PotentialSpec;
use crate::theory::TheoryBound;
use std::fmt::Write as _;
use std::path::Path;

/// 17 significant digits, round-trippable.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// RFC 4180 quoting with LF line endings.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_bytes()?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

pub const TRAJECTORY_COLUMNS: &[&str] = &["time", "l2_norm", "sup_norm", "bulk_potential", "dist_to_minima"];

pub fn trajectory_table(t: &Trajectory) -> Table {
    let mut table = Table::new(TRAJECTORY_COLUMNS);
    for i in 0..t.len() {
        table.push(vec![
            fmt_f64(t.times[i]),
            fmt_f64(t.l2_norm[i]),
            fmt_f64(t.sup_norm[i]),
            fmt_f64(t.bulk_potential[i]),
            fmt_f64(t.dist_to_minima[i]),
        ]);
    }
    table
}

/// `time, diameter, d_a_b...` for every pair `a < b`.
pub fn multi_table(m: &MultiTrajectory) -> Table {
    let mut names = vec!["time".to_string(), "diameter".to_string()];
    names.extend(m.pairwise.iter().map(|((a, b), _)| format!("d_{a}_{b}")));
    let mut table = Table::new(&names);
    for i in 0..m.times.len() {
        let mut row = vec![fmt_f64(m.times[i]), fmt_f64(m.diameters[i])];
        row.extend(m.pairwise.iter().map(|(_, s)| fmt_f64(s[i])));
        table.push(row);
    }
    table
}

pub const LYAPUNOV_COLUMNS: &[&str] =
    &["potential", "n", "N", "kappa", "epsilon", "dt", "T", "lambda_top", "stderr", "ergodic_lambda_plus", "clock"];

pub fn lyapunov_table(cfg: &SimConfig, r: &LyapunovReport) -> Table {
    let mut table = Table::new(LYAPUNOV_COLUMNS);
    table.push(vec![
        cfg.potential.name.clone(),
        cfg.potential.n.to_string(),
        cfg.grid.len().to_string(),
        fmt_f64(cfg.kappa),
        fmt_f64(cfg.epsilon),
        fmt_f64(cfg.dt),
        fmt_f64(cfg.horizon),
        fmt_f64(r.lambda_top),
        fmt_f64(r.stderr),
        opt(r.ergodic_lambda_plus),
        r.clock.as_str().into(),
    ]);
    table
}

pub const BOUND_COLUMNS: &[&str] = &[
    "potential", "n", "kappa", "c_star", "m_trunc", "minimum", "theta", "weight", "e_value", "c_max", "kappa0",
    "bound_main1", "main_term", "error_term", "total",
];

/// One row per minimum (point or sphere), summary columns repeated.
pub fn bound_table(spec: &PotentialSpec, b: &TheoryBound) -> Table {
    let mut table = Table::new(BOUND_COLUMNS);
    for i in 0..b.weights.len() {
        table.push(vec![
            spec.name.clone(),
            spec.n.to_string(),
            fmt_f64(b.kappa),
            fmt_f64(b.c_star),
            b.m_trunc.to_string(),
            i.to_string(),
            fmt_f64(b.thetas[i]),
            fmt_f64(b.weights[i]),
            opt(b.e_values.get(i).copied()),
            opt(b.c_max),
            opt(b.kappa0),
            opt(b.bound_main1),
            opt(b.main2.as_ref().map(|m| m.main_term)),
            opt(b.main2.as_ref().map(|m| m.error_term)),
            opt(b.main2.as_ref().map(|m| m.total)),
        ]);
    }
    table
}

pub const SYNC_COLUMNS: &[&str] = &[
    "potential", "n", "kappa", "epsilon", "seed", "stream", "initial_diameter", "final_diameter", "rate",
    "floor_hit", "lambda_top", "lambda_stderr",
];

pub fn sync_table(reports: &[SyncReport]) -> Table {
    let mut table = Table::new(SYNC_COLUMNS);
    for r in reports {
        table.push(vec![
            r.potential.clone(),
            r.n.to_string(),
            fmt_f64(r.kappa),
            fmt_f64(r.epsilon),
            r.seed.to_string(),
            r.stream.to_string(),
            fmt_f64(r.initial_diameter),
            fmt_f64(r.final_diameter),
            opt(r.rate()),
            r.floor_hit.to_string(),
            opt(r.lyapunov.as_ref().map(|l| l.lambda_top)),
            opt(r.lyapunov.as_ref().map(|l| l.stderr)),
        ]);
    }
    table
}

pub const SYNC_SERIES_COLUMNS: &[&str] = &["stream", "seed", "time", "diameter"];

pub fn sync_series_table(reports: &[SyncReport]) -> Table {
    let mut table = Table::new(SYNC_SERIES_COLUMNS);
    for r in reports {
        for (t, d) in r.times.iter().zip(&r.diameters) {
            table.push(vec![r.stream.to_string(), r.seed.to_string(), fmt_f64(*t), fmt_f64(*d)]);
        }
    }
    table
}

pub const PULLBACK_COLUMNS: &[&str] =
    &["potential", "n", "kappa", "epsilon", "seed", "stream", "start_time", "diameter", "monotone"];

pub fn pullback_table(reports: &[PullbackReport]) -> Table {
    let mut table = Table::new(PULLBACK_COLUMNS);
    for r in reports {
        for (t, d) in r.start_times.iter().zip(&r.diameters) {
            table.push(vec![
                r.potential.clone(),
                r.n.to_string(),
                fmt_f64(r.kappa),
                fmt_f64(r.epsilon),
                r.seed.to_string(),
                r.stream.to_string(),
                fmt_f64(*t),
                fmt_f64(*d),
                r.monotone.to_string(),
            ]);
        }
    }
    table
}

pub const CONCENTRATION_COLUMNS: &[&str] = &[
    "potential", "n", "kappa", "epsilon", "seeds", "delta", "fraction", "fraction_stderr", "minimum", "occupation",
    "occupation_stderr", "weight",
];

pub fn concentration_table(t: &ConcentrationTable) -> Table {
    let mut table = Table::new(CONCENTRATION_COLUMNS);
    for r in &t.rows {
        for i in 0..r.occupations.len() {
            table.push(vec![
                r.potential.clone(),
                r.n.to_string(),
                fmt_f64(r.kappa),
                fmt_f64(r.epsilon),
                r.seeds.to_string(),
                fmt_f64(t.delta),
                fmt_f64(r.fraction),
                fmt_f64(r.fraction_stderr),
                i.to_string(),
                fmt_f64(r.occupations[i]),
                fmt_f64(r.occupation_stderr[i]),
                opt(r.weights.get(i).copied()),
            ]);
        }
    }
    table
}

pub const COMPARISON_COLUMNS: &[&str] = &[
    "potential", "n", "kappa", "epsilon", "seed", "clock", "lambda_top", "stderr", "ergodic_lambda_plus",
    "ergodic_stderr", "bound_kind", "bound", "ordering_holds",
];

pub fn comparison_table(rows: &[ComparisonRow]) -> Table {
    let mut table = Table::new(COMPARISON_COLUMNS);
    for r in rows {
        table.push(vec![
            r.potential.clone(),
            r.n.to_string(),
            fmt_f64(r.kappa),
            fmt_f64(r.epsilon),
            r.seed.to_string(),
            r.report.clock.as_str().into(),
            fmt_f64(r.report.lambda_top),
            fmt_f64(r.report.stderr),
            opt(r.report.ergodic_lambda_plus),
            opt(r.report.ergodic_stderr),
            r.bound_kind.clone(),
            opt(r.bound),
            r.ordering_holds().to_string(),
        ]);
    }
    table
}

/// A static line plot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_y: false, series: Vec::new() }
    }

    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 420.0);
        let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
        let ty = |y: f64| if self.log_y { y.max(1e-300).log10() } else { y };
        let pts = || self.series.iter().flat_map(|(_, s)| s.iter()).filter(|p| p.0.is_finite() && ty(p.1).is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(ty(y));
            y1 = y1.max(ty(y));
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 == x0 {
            x1 = x0 + 1.0;
        }
        if y1 == y0 {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
        let py = |y: f64| h - bottom - (ty(y) - y0) / (y1 - y0) * (h - top - bottom);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - left - right,
            h - top - bottom
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let gx = left + f * (w - left - right);
            let gy = h - bottom - f * (h - top - bottom);
            let ylab = if self.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
            let _ = writeln!(s, r#"<text x="{gx}" y="{}" text-anchor="middle">{xv:.3}</text>"#, h - bottom + 16.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{ylab}</text>"#, left - 6.0, gy + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(&self.y_label)
        );
        for (k, (name, series)) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let path: Vec<String> = series
                .iter()
                .filter(|p| p.0.is_finite() && ty(p.1).is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            if !path.is_empty() {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            }
            let ly = top + 16.0 + 16.0 * k as f64;
            let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, w - right - 120.0, escape(name));
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}
