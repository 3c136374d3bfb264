//! CSV tables behind the `analyze`, `simulate` and `figure` commands.

use std::f64::consts::LN_2;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::analytics::{
    p_device_failure, rate_cdf_equal_snr, time_overflow_sandwich, time_underflow_bounds, time_underflow_tight,
    NsrProfile,
};
use crate::channel::{complex_normal, estimation_error_variance};
use crate::config::{ConfigFile, DeploymentMode, Scheme, SnrModel, SystemConfig};
use crate::deployment::db_to_linear;
use crate::error::{Error, Result};
use crate::mcengine::{best_backoff, fixed_deployment, DeploymentPolicy, Engine, Estimates, ProbEstimate, SweepSpec};

/// Column order of `simulate` output.
pub const SIMULATE_HEADER: [&str; 14] = [
    "scheme", "B", "L", "beta", "D", "A", "p_te", "p_to", "p_so", "se_te", "se_to", "se_so", "n_trials", "seed",
];

/// A header plus string cells, written as UTF-8 CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Provenance written next to every output directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` wins when set.
    pub timestamp: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(file: &ConfigFile, outputs: &[PathBuf]) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        RunManifest {
            config_digest: file.digest(),
            seed: file.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            outputs: outputs
                .iter()
                .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
                .collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

// ---------------------------------------------------------------- analyze

/// Closed-form report with a per-row invariant flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub table: Table,
    pub all_ok: bool,
    pub summary: String,
}

const ANALYZE_HEADER: [&str; 11] = [
    "kind", "profile", "devices", "aps", "sigma2", "y", "lower", "value", "upper", "tight_upper", "ok",
];

/// Linear average SNR per device (strongest AP) under the configured model,
/// from the deployment that `seed` fixes.
fn device_snrs(cfg: &SystemConfig, seed: u64) -> Result<Vec<f64>> {
    let cfg = SystemConfig {
        scheme: Scheme::Vr,
        ..cfg.clone()
    };
    let depl = fixed_deployment(&cfg, seed)?;
    Ok(depl.snr.iter().map(|row| row.iter().cloned().fold(0.0, f64::max)).collect())
}

/// Sum of the per-device airtimes at the mean channel gain; a scale for `y`.
fn airtime_scale(g: &[f64]) -> f64 {
    g.iter().map(|g| LN_2 / (1.0 / g).ln_1p()).sum()
}

pub fn analyze(cfg: &SystemConfig, seed: u64) -> Result<Analysis> {
    cfg.validate()?;
    let mut t = Table::new(&ANALYZE_HEADER);
    let mut all_ok = true;
    let mut n_rows = [0usize; 3];
    let mut row = |t: &mut Table, cells: Vec<String>, ok: bool, kind: usize| {
        all_ok &= ok;
        n_rows[kind] += 1;
        let mut cells = cells;
        cells.push(ok.to_string());
        t.push(cells);
    };

    let max_a = cfg.aps.clamp(1, 8) as u32;
    let rho_ref = match cfg.snr_model {
        SnrModel::Equal { snr_db } => db_to_linear(snr_db),
        SnrModel::Uniform { base_db, spread_db } => db_to_linear(base_db + 0.5 * spread_db),
        SnrModel::Geometric => {
            let s = device_snrs(cfg, seed)?;
            s.iter().sum::<f64>() / s.len() as f64
        }
    };
    let mut grid = vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0];
    grid.push(estimation_error_variance(cfg.pilots, rho_ref)?);
    for &s2 in &grid {
        for a in 1..=max_a {
            let p = p_device_failure(s2, a)?;
            let ok = (0.0..=0.5).contains(&p) && (s2 != 1.0 || p == 0.0);
            row(
                &mut t,
                vec!["device_failure".into(), String::new(), String::new(), a.to_string(), num(s2), String::new(), String::new(), num(p), String::new(), String::new()],
                ok,
                0,
            );
        }
    }

    let rho = device_snrs(cfg, seed)?;
    let s2: Vec<f64> = rho
        .iter()
        .map(|&r| estimation_error_variance(cfg.pilots, r))
        .collect::<Result<_>>()?;
    let deployed = NsrProfile::from_snr(&rho, &s2)?;
    let profiles = [
        ("single", NsrProfile::new(vec![deployed.g()[0]])?),
        ("equal", NsrProfile::equal(cfg.devices, deployed.g_bar())?),
        ("deployment", deployed.clone()),
    ];
    let m = airtime_scale(deployed.g());
    let mut ys: Vec<f64> = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0].iter().map(|f| f * m).collect();
    ys.push(cfg.normalized_deadline());
    for (name, nsr) in &profiles {
        for &y in &ys {
            let set = if nsr.len() >= 2 {
                time_underflow_tight(y, nsr)?
            } else {
                time_underflow_bounds(y, nsr)?
            };
            let tight = set.tight_upper.unwrap_or(set.upper);
            let mut ok = set.lower <= set.upper && tight <= set.upper * (1.0 + 1e-12) && set.lower <= tight * (1.0 + 1e-12);
            if nsr.len() == 1 {
                ok &= (set.lower - set.upper).abs() <= 1e-12 * set.upper.max(1e-300);
            }
            row(
                &mut t,
                vec![
                    "underflow".into(),
                    name.to_string(),
                    nsr.len().to_string(),
                    "1".into(),
                    String::new(),
                    num(y),
                    num(set.lower),
                    String::new(),
                    num(set.upper),
                    opt(set.tight_upper),
                ],
                ok,
                1,
            );
        }
    }

    // equal-SNR links: every device sees the same SNR at every AP
    let thr = cfg.devices as f64 * cfg.bits() / cfg.data_time();
    let s2_ref = estimation_error_variance(cfg.pilots, rho_ref)?;
    for a in 1..=max_a {
        let pair = rate_cdf_equal_snr(thr, a, rho_ref, s2_ref, cfg.backoff, cfg.bandwidth)?;
        let set = time_overflow_sandwich(&vec![pair; cfg.devices])?;
        row(
            &mut t,
            vec![
                "overflow".into(),
                "equal".into(),
                cfg.devices.to_string(),
                a.to_string(),
                num(s2_ref),
                String::new(),
                num(set.lower),
                String::new(),
                num(set.upper),
                String::new(),
            ],
            set.lower <= set.upper,
            2,
        );
    }

    let summary = format!(
        "device failure: {} rows; time underflow: {} rows; time overflow: {} rows; invariants {}",
        n_rows[0],
        n_rows[1],
        n_rows[2],
        if all_ok { "hold" } else { "VIOLATED" }
    );
    Ok(Analysis { table: t, all_ok, summary })
}

// ---------------------------------------------------------------- simulate

fn sweep_spec(file: &ConfigFile, base: SystemConfig) -> SweepSpec {
    SweepSpec {
        schemes: file.sweep_schemes.clone(),
        devices: file.sweep_devices.clone(),
        aps: file.sweep_aps.clone(),
        base_snr_db: file.sweep_snr_db.clone(),
        payload_bytes: file.sweep_payload_bytes.clone(),
        pilots: file.sweep_pilots.clone(),
        backoff: file.sweep_backoff.clone(),
        mode: file.deployment,
        ..SweepSpec::new(base, file.trials, file.seed)
    }
}

/// Estimates at every point of the configured sweep grid.
pub fn simulate(engine: &Engine, file: &ConfigFile) -> Result<Table> {
    let rows = engine.sweep(&sweep_spec(file, file.system()?))?;
    let mut t = Table::new(&SIMULATE_HEADER);
    for r in rows {
        let c = &r.config;
        t.push(vec![
            c.scheme.to_string(),
            c.payload_bytes.to_string(),
            c.pilots.to_string(),
            num(c.backoff),
            c.devices.to_string(),
            c.aps.to_string(),
            num(r.est.te.p_hat),
            num(r.est.to.p_hat),
            num(r.est.so.p_hat),
            num(r.est.te.std_err),
            num(r.est.to.std_err),
            num(r.est.so.std_err),
            r.est.so.n_trials.to_string(),
            file.seed.to_string(),
        ]);
    }
    Ok(t)
}

// ---------------------------------------------------------------- figures

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Bounds,
    Training,
    Payload,
    Backoff,
    Benchmark,
    Diversity,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Bounds,
        Figure::Training,
        Figure::Payload,
        Figure::Backoff,
        Figure::Benchmark,
        Figure::Diversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Bounds => "bounds",
            Figure::Training => "training",
            Figure::Payload => "payload",
            Figure::Backoff => "backoff",
            Figure::Benchmark => "benchmark",
            Figure::Diversity => "diversity",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<_> = Figure::ALL.iter().map(|f| f.name()).collect();
            Error::Config(format!("unknown figure '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// Time-underflow comparison at one NSR profile.
#[derive(Debug, Clone, PartialEq)]
pub struct UnderflowRow {
    pub y: f64,
    pub mc: ProbEstimate,
    pub lower: f64,
    pub upper: f64,
    pub tight_upper: f64,
}

impl UnderflowRow {
    /// `lower <= MC <= tight <= upper`, the MC comparisons allowing `k`
    /// binomial standard errors (taken at the bound when that is larger).
    pub fn ordered(&self, k: f64) -> bool {
        let n = self.mc.n_trials as f64;
        let slack = |b: f64| k * self.mc.std_err.max((b * (1.0 - b) / n).sqrt());
        self.lower <= self.mc.p_hat + slack(self.lower)
            && self.mc.p_hat <= self.tight_upper + slack(self.tight_upper)
            && self.tight_upper <= self.upper * (1.0 + 1e-12)
            && self.lower <= self.upper
    }
}

/// Monte Carlo `P(sum_d Y_d <= y)` for single-AP links with linear SNRs
/// `rho` and error variances `s2`, next to the analytic bounds.
#[allow(clippy::too_many_arguments)]
pub fn underflow_panel(
    engine: &Engine,
    rho: &[f64],
    s2: &[f64],
    ys: &[f64],
    trials: u64,
    seed: u64,
    point: u64,
) -> Result<Vec<UnderflowRow>> {
    if ys.len() > 64 || ys.is_empty() {
        return Err(Error::Config("between 1 and 64 deadline values per panel".into()));
    }
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let nsr = NsrProfile::from_snr(rho, s2)?;
    let counts = engine.tally(trials, seed, point, ys.len(), |rng, _| {
        let total: f64 = rho
            .iter()
            .zip(s2)
            .map(|(&r, &s)| LN_2 / (r * complex_normal(rng, 1.0 - s).norm_sqr()).ln_1p())
            .sum();
        ys.iter().enumerate().fold(0u64, |m, (j, &y)| m | ((total <= y) as u64) << j)
    });
    let mut out = Vec::with_capacity(ys.len());
    for (j, &y) in ys.iter().enumerate() {
        let set = if nsr.len() >= 2 {
            time_underflow_tight(y, &nsr)?
        } else {
            time_underflow_bounds(y, &nsr)?
        };
        out.push(UnderflowRow {
            y,
            mc: ProbEstimate::from_count(counts[j], trials),
            lower: set.lower,
            upper: set.upper,
            tight_upper: set.tight_upper.unwrap_or(set.upper),
        });
    }
    Ok(out)
}

const EST_COLS: [&str; 7] = ["p_te", "p_to", "p_so", "se_te", "se_to", "se_so", "so_ci_hi"];

/// Estimate cells; `so_ci_hi` stands in for P(SO) when no outage was seen.
fn est_cells(e: &Estimates) -> Vec<String> {
    vec![
        num(e.te.p_hat),
        num(e.to.p_hat),
        num(e.so.p_hat),
        num(e.te.std_err),
        num(e.to.std_err),
        num(e.so.std_err),
        num(e.so.ci95.1),
    ]
}

fn header(lead: &[&str], tail: &[&str]) -> Vec<String> {
    lead.iter().chain(tail).map(|s| s.to_string()).collect()
}

fn table(lead: &[&str], tail: &[&str]) -> Table {
    let h = header(lead, tail);
    Table {
        header: h,
        rows: Vec::new(),
    }
}

fn axis_or<T: Clone>(v: &[T], default: &[T]) -> Vec<T> {
    if v.is_empty() {
        default.to_vec()
    } else {
        v.to_vec()
    }
}

/// Pilot lengths from 0.05% to 70% of the longest training that fits in
/// the period.
pub fn default_pilot_grid(cfg: &SystemConfig) -> Vec<u32> {
    let per_device = if cfg.training_overhead_per_device { cfg.devices as f64 } else { 1.0 };
    let l_max = cfg.period / (per_device * cfg.symbol_time());
    let mut out: Vec<u32> = [0.0005, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
        .iter()
        .map(|f| ((f * l_max).round() as u32).max(1))
        .collect();
    out.dedup();
    out
}

const PAYLOAD_GRID: [u32; 8] = [10, 25, 50, 100, 150, 200, 300, 400];
const BACKOFF_GRID: [f64; 8] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
const SNR_GRID: [f64; 6] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
/// Stream blocks reserved per figure panel.
const PANEL_STRIDE: u64 = 1 << 12;

/// Deadline grid for the underflow panels: 30 points spanning 0.5 to 3
/// times the airtime sum at mean channel gain.
pub fn underflow_deadlines(rho: &[f64], s2: &[f64]) -> Result<Vec<f64>> {
    let m = airtime_scale(NsrProfile::from_snr(rho, s2)?.g());
    Ok((0..30).map(|i| m * (0.5 + 2.5 * i as f64 / 29.0)).collect())
}

/// Linear SNRs of `devices` single-AP links drawn uniformly in dB over
/// `[base, base + spread]` from the fixed deployment of `seed`.
pub fn uniform_profile(base_db: f64, spread_db: f64, devices: usize, seed: u64) -> Result<Vec<f64>> {
    let cfg = SystemConfig {
        devices,
        aps: 1,
        snr_model: SnrModel::Uniform { base_db, spread_db },
        ..SystemConfig::default()
    };
    device_snrs(&cfg, seed)
}

fn bounds_figure(engine: &Engine, file: &ConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = file.system()?;
    let devices = 10;
    let mut paths = Vec::new();
    for (i, &base) in axis_or(&file.sweep_snr_db, &[15.0, 20.0, 25.0]).iter().enumerate() {
        let rho = uniform_profile(base, file.snr_spread_db, devices, file.seed)?;
        let s2: Vec<f64> = rho.iter().map(|&r| estimation_error_variance(cfg.pilots, r)).collect::<Result<_>>()?;
        let ys = underflow_deadlines(&rho, &s2)?;
        let rows = underflow_panel(engine, &rho, &s2, &ys, file.trials, file.seed, i as u64 * PANEL_STRIDE)?;
        let mut t = Table::new(&["y", "mc", "mc_se", "mc_ci_lo", "mc_ci_hi", "loose_lower", "loose_upper", "tight_upper", "ordered"]);
        for r in rows {
            t.push(vec![
                num(r.y),
                num(r.mc.p_hat),
                num(r.mc.std_err),
                num(r.mc.ci95.0),
                num(r.mc.ci95.1),
                num(r.lower),
                num(r.upper),
                num(r.tight_upper),
                r.ordered(3.0).to_string(),
            ]);
        }
        let path = out.join(format!("bounds_base{base}.csv"));
        t.write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn training_figure(engine: &Engine, file: &ConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = file.system()?;
    let pilots = axis_or(&file.sweep_pilots, &default_pilot_grid(&cfg));
    let mut paths = Vec::new();
    for (i, &b) in axis_or(&file.sweep_payload_bytes, &[25, 50, 100]).iter().enumerate() {
        let spec = SweepSpec {
            payload_bytes: vec![b],
            pilots: pilots.clone(),
            mode: file.deployment,
            first_point: i as u64 * PANEL_STRIDE,
            ..SweepSpec::new(cfg.clone(), file.trials, file.seed)
        };
        let mut t = table(&["L"], &EST_COLS);
        for r in engine.sweep(&spec)? {
            let mut cells = vec![r.config.pilots.to_string()];
            cells.extend(est_cells(&r.est));
            t.push(cells);
        }
        let path = out.join(format!("training_B{b}.csv"));
        t.write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn payload_figure(engine: &Engine, file: &ConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = SweepSpec {
        payload_bytes: axis_or(&file.sweep_payload_bytes, &PAYLOAD_GRID),
        mode: file.deployment,
        ..SweepSpec::new(file.system()?, file.trials, file.seed)
    };
    let mut t = table(&["B"], &EST_COLS);
    for r in engine.sweep(&spec)? {
        let mut cells = vec![r.config.payload_bytes.to_string()];
        cells.extend(est_cells(&r.est));
        t.push(cells);
    }
    let path = out.join("payload.csv");
    t.write(&path)?;
    Ok(vec![path])
}

fn backoff_figure(engine: &Engine, file: &ConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = file.system()?;
    let pilots = axis_or(&file.sweep_pilots, &[cfg.pilots]);
    let spec = SweepSpec {
        pilots: pilots.clone(),
        backoff: axis_or(&file.sweep_backoff, &BACKOFF_GRID),
        mode: file.deployment,
        ..SweepSpec::new(cfg, file.trials, file.seed)
    };
    let rows = engine.sweep(&spec)?;
    let mut paths = Vec::new();
    for &l in &pilots {
        let mut t = table(&["beta"], &EST_COLS);
        for r in rows.iter().filter(|r| r.config.pilots == l) {
            let mut cells = vec![num(r.config.backoff)];
            cells.extend(est_cells(&r.est));
            t.push(cells);
        }
        let path = out.join(format!("backoff_L{l}.csv"));
        t.write(&path)?;
        paths.push(path);
    }
    let best = best_backoff(&rows).expect("non-empty grid");
    let mut t = Table::new(&["L", "beta", "p_so", "se_so", "so_ci_hi"]);
    t.push(vec![
        best.pilots.to_string(),
        num(best.backoff),
        num(best.so.p_hat),
        num(best.so.std_err),
        num(best.so.ci95.1),
    ]);
    let path = out.join("backoff_best.csv");
    t.write(&path)?;
    paths.push(path);
    Ok(paths)
}

/// Paired estimates of several schemes at one point under the file's
/// deployment policy.
fn compare_with_policy(
    engine: &Engine,
    cfg: &SystemConfig,
    file: &ConfigFile,
    point: u64,
    schemes: &[Scheme],
) -> Result<Vec<Estimates>> {
    match file.deployment {
        DeploymentMode::Redraw => engine.compare_point(cfg, DeploymentPolicy::Redraw, file.trials, file.seed, point, schemes),
        DeploymentMode::Fixed => {
            let dcfg = SystemConfig {
                scheme: if schemes.contains(&Scheme::TwoHop) { Scheme::TwoHop } else { cfg.scheme },
                ..cfg.clone()
            };
            let depl = fixed_deployment(&dcfg, file.seed)?;
            engine.compare_point(cfg, DeploymentPolicy::Fixed(&depl), file.trials, file.seed, point, schemes)
        }
    }
}

fn benchmark_figure(engine: &Engine, file: &ConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = file.system()?;
    let schemes = axis_or(&file.sweep_schemes, &Scheme::ALL);
    let mut t = table(&["scheme", "B"], &EST_COLS);
    let mut by_scheme = vec![Vec::new(); schemes.len()];
    for (i, &b) in axis_or(&file.sweep_payload_bytes, &PAYLOAD_GRID).iter().enumerate() {
        let c = SystemConfig {
            payload_bytes: b,
            ..cfg.clone()
        };
        for (k, e) in compare_with_policy(engine, &c, file, i as u64, &schemes)?.into_iter().enumerate() {
            by_scheme[k].push((b, e));
        }
    }
    for (s, rows) in schemes.iter().zip(&by_scheme) {
        for (b, e) in rows {
            let mut cells = vec![s.to_string(), b.to_string()];
            cells.extend(est_cells(e));
            t.push(cells);
        }
    }
    let path = out.join("benchmark.csv");
    t.write(&path)?;
    Ok(vec![path])
}

/// Local diversity orders over the points with at least one outage; the
/// others are left as `None`.
pub fn orders_where_observed(snr_db: &[f64], so: &[ProbEstimate]) -> Vec<Option<f64>> {
    let idx: Vec<usize> = (0..so.len()).filter(|&i| so[i].count > 0).collect();
    let mut out = vec![None; so.len()];
    if idx.len() >= 3 {
        let x: Vec<f64> = idx.iter().map(|&i| snr_db[i]).collect();
        let p: Vec<f64> = idx.iter().map(|&i| so[i].p_hat).collect();
        if let Ok(orders) = crate::mcengine::diversity_order(&x, &p) {
            for (&i, o) in idx.iter().zip(orders) {
                out[i] = Some(o);
            }
        }
    }
    out
}

fn diversity_figure(engine: &Engine, file: &ConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = file.system()?;
    let schemes = axis_or(&file.sweep_schemes, &[Scheme::FixedRate, Scheme::Vr, Scheme::Mvr]);
    let snrs = axis_or(&file.sweep_snr_db, &SNR_GRID);
    let mut per_scheme: Vec<Vec<Estimates>> = vec![Vec::new(); schemes.len()];
    for (i, &snr_db) in snrs.iter().enumerate() {
        let c = SystemConfig {
            snr_model: SnrModel::Equal { snr_db },
            ..cfg.clone()
        };
        for (k, e) in compare_with_policy(engine, &c, file, i as u64, &schemes)?.into_iter().enumerate() {
            per_scheme[k].push(e);
        }
    }
    let mut t = table(&["scheme", "snr_db"], &EST_COLS);
    t.header.push("diversity_order".into());
    for (s, ests) in schemes.iter().zip(&per_scheme) {
        let so: Vec<ProbEstimate> = ests.iter().map(|e| e.so).collect();
        let orders = orders_where_observed(&snrs, &so);
        for ((snr, e), o) in snrs.iter().zip(ests).zip(orders) {
            let mut cells = vec![s.to_string(), num(*snr)];
            cells.extend(est_cells(e));
            cells.push(opt(o));
            t.push(cells);
        }
    }
    let path = out.join("diversity.csv");
    t.write(&path)?;
    Ok(vec![path])
}

/// Writes the CSV panels of `fig` and a manifest into `out`.
pub fn run_figure(engine: &Engine, fig: Figure, file: &ConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let mut paths = match fig {
        Figure::Bounds => bounds_figure(engine, file, out)?,
        Figure::Training => training_figure(engine, file, out)?,
        Figure::Payload => payload_figure(engine, file, out)?,
        Figure::Backoff => backoff_figure(engine, file, out)?,
        Figure::Benchmark => benchmark_figure(engine, file, out)?,
        Figure::Diversity => diversity_figure(engine, file, out)?,
    };
    let manifest = RunManifest::new(file, &paths).write(out)?;
    paths.push(manifest);
    Ok(paths)
}
