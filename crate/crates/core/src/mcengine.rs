//! Seeded, parallel Monte Carlo estimation.
//!
//! Every trial gets its own ChaCha stream selected by `(point, trial)`, and
//! results are reduced as integer counts, so estimates do not depend on the
//! number of worker threads or on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::config::{DeploymentMode, Scheme, SnrModel, SystemConfig};
use crate::deployment::{build_deployment, Deployment};
use crate::error::{Error, Result};
use crate::protocols::{draw_cycle, evaluate, run_cycle};

const CHUNK: u64 = 1024;
const TRIAL_BITS: u32 = 40;
/// Stream reserved for the deployment of the `Fixed` policy.
const FIXED_STREAM: u64 = u64::MAX;

/// Binomial proportion with standard error and a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbEstimate {
    pub p_hat: f64,
    pub count: u64,
    pub n_trials: u64,
    pub std_err: f64,
    pub ci95: (f64, f64),
}

impl ProbEstimate {
    /// Normal interval, or Clopper-Pearson when fewer than 10 events (or
    /// non-events) were seen.
    pub fn from_count(count: u64, n_trials: u64) -> Self {
        assert!(n_trials > 0 && count <= n_trials);
        let n = n_trials as f64;
        let p = count as f64 / n;
        let std_err = (p * (1.0 - p) / n).sqrt();
        let ci95 = if count < 10 || n_trials - count < 10 {
            clopper_pearson(count, n_trials)
        } else {
            ((p - 1.96 * std_err).max(0.0), (p + 1.96 * std_err).min(1.0))
        };
        ProbEstimate {
            p_hat: p,
            count,
            n_trials,
            std_err,
            ci95,
        }
    }
}

fn clopper_pearson(k: u64, n: u64) -> (f64, f64) {
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0).expect("valid shape").inverse_cdf(0.025)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf).expect("valid shape").inverse_cdf(0.975)
    };
    (lo, hi)
}

/// Estimates of the three outage events at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub te: ProbEstimate,
    pub to: ProbEstimate,
    pub so: ProbEstimate,
}

impl Estimates {
    fn from_counts(c: &[u64], n: u64) -> Self {
        Estimates {
            te: ProbEstimate::from_count(c[0], n),
            to: ProbEstimate::from_count(c[1], n),
            so: ProbEstimate::from_count(c[2], n),
        }
    }
}

/// Trial `trial` of grid point `point`: ChaCha8 keyed by `seed`, on stream
/// `point << 40 | trial`.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    debug_assert!(trial < 1 << TRIAL_BITS && point < 1 << (64 - TRIAL_BITS));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((point << TRIAL_BITS) | trial);
    rng
}

/// The deployment shared by all trials under [`DeploymentMode::Fixed`].
pub fn fixed_deployment(cfg: &SystemConfig, seed: u64) -> Result<Deployment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FIXED_STREAM);
    build_deployment(&mut rng, cfg)
}

#[derive(Debug, Clone, Copy)]
pub enum DeploymentPolicy<'a> {
    /// Every trial reuses this deployment.
    Fixed(&'a Deployment),
    /// Every trial draws its own deployment first.
    Redraw,
}

/// A worker pool with a fixed thread count.
pub struct Engine {
    pool: rayon::ThreadPool,
}

impl Engine {
    /// `threads = 0` uses all available cores.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Engine { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Runs `n` trials of `f` and counts, for each of the low `k` bits, how
    /// many trials returned it set.
    pub fn tally<F>(&self, n: u64, seed: u64, point: u64, k: usize, f: F) -> Vec<u64>
    where
        F: Fn(&mut ChaCha8Rng, u64) -> u64 + Sync,
    {
        assert!(k <= 64);
        let chunks = n.div_ceil(CHUNK);
        self.pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut counts = vec![0u64; k];
                    for t in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                        let mut rng = trial_rng(seed, point, t);
                        let mask = f(&mut rng, t);
                        for (i, slot) in counts.iter_mut().enumerate() {
                            *slot += (mask >> i) & 1;
                        }
                    }
                    counts
                })
                .reduce(
                    || vec![0u64; k],
                    |mut a, b| {
                        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                        a
                    },
                )
        })
    }

    /// P(TE), P(TO), P(SO) of `cfg.scheme` over `n` cycles.
    pub fn estimate(&self, cfg: &SystemConfig, policy: DeploymentPolicy<'_>, n: u64, seed: u64) -> Result<Estimates> {
        self.estimate_point(cfg, policy, n, seed, 0)
    }

    pub fn estimate_point(
        &self,
        cfg: &SystemConfig,
        policy: DeploymentPolicy<'_>,
        n: u64,
        seed: u64,
        point: u64,
    ) -> Result<Estimates> {
        Ok(self.compare_point(cfg, policy, n, seed, point, &[cfg.scheme])?[0])
    }

    /// Evaluates several schemes on the same deployments and fades.
    pub fn compare(
        &self,
        cfg: &SystemConfig,
        policy: DeploymentPolicy<'_>,
        n: u64,
        seed: u64,
        schemes: &[Scheme],
    ) -> Result<Vec<Estimates>> {
        self.compare_point(cfg, policy, n, seed, 0, schemes)
    }

    /// [`Engine::compare`] on stream block `point`.
    pub fn compare_point(
        &self,
        cfg: &SystemConfig,
        policy: DeploymentPolicy<'_>,
        n: u64,
        seed: u64,
        point: u64,
        schemes: &[Scheme],
    ) -> Result<Vec<Estimates>> {
        if n == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        if schemes.is_empty() || schemes.len() > 21 {
            return Err(Error::Config("between 1 and 21 schemes per comparison".into()));
        }
        let cfgs: Vec<SystemConfig> = schemes.iter().map(|&s| SystemConfig { scheme: s, ..cfg.clone() }).collect();
        for c in &cfgs {
            c.validate()?;
        }
        let relays = schemes.contains(&Scheme::TwoHop);
        // relay links are only built for relaying scenarios
        let build_cfg = if relays {
            SystemConfig {
                scheme: Scheme::TwoHop,
                ..cfg.clone()
            }
        } else {
            cfg.clone()
        };
        if let DeploymentPolicy::Fixed(d) = policy {
            if d.devices() != cfg.devices || d.aps() != cfg.aps {
                return Err(Error::Config(format!(
                    "deployment has {}x{} links, config expects {}x{}",
                    d.devices(),
                    d.aps(),
                    cfg.devices,
                    cfg.aps
                )));
            }
            if relays && d.d2d_snr.is_none() {
                return Err(Error::Config("two-hop relaying needs device-to-device SNRs".into()));
            }
        }
        let single = schemes.len() == 1;
        let counts = self.tally(n, seed, point, 3 * schemes.len(), |rng, _| {
            let owned;
            let depl = match policy {
                DeploymentPolicy::Fixed(d) => d,
                DeploymentPolicy::Redraw => {
                    owned = build_deployment(rng, &build_cfg).expect("validated config");
                    &owned
                }
            };
            let mut mask = 0u64;
            if single {
                let out = run_cycle(&cfgs[0], depl, rng).expect("validated deployment");
                mask = out.te as u64 | (out.to as u64) << 1 | (out.so as u64) << 2;
            } else {
                let draw = draw_cycle(cfg, depl, rng);
                for (i, c) in cfgs.iter().enumerate() {
                    let out = evaluate(c.scheme, c, depl, &draw, rng).expect("validated deployment");
                    mask |= (out.te as u64 | (out.to as u64) << 1 | (out.so as u64) << 2) << (3 * i);
                }
            }
            mask
        });
        Ok(counts.chunks(3).map(|c| Estimates::from_counts(c, n)).collect())
    }

    /// Estimates every point of a sweep grid; point `i` uses stream block `i`.
    pub fn sweep(&self, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
        let points = spec.points()?;
        let mut rows = Vec::with_capacity(points.len());
        for (i, cfg) in points.into_iter().enumerate() {
            let i = spec.first_point + i as u64;
            let est = match spec.mode {
                DeploymentMode::Fixed => {
                    let depl = fixed_deployment(&cfg, spec.seed)?;
                    self.estimate_point(&cfg, DeploymentPolicy::Fixed(&depl), spec.trials, spec.seed, i)?
                }
                DeploymentMode::Redraw => {
                    self.estimate_point(&cfg, DeploymentPolicy::Redraw, spec.trials, spec.seed, i)?
                }
            };
            rows.push(SweepRow { config: cfg, est });
        }
        Ok(rows)
    }

    /// Grid search over `(beta, L)` for the smallest P(SO). Ties go to the
    /// smaller `L`, then to the larger `beta`.
    pub fn optimize_backoff(
        &self,
        cfg: &SystemConfig,
        betas: &[f64],
        pilots: &[u32],
        trials: u64,
        seed: u64,
        mode: DeploymentMode,
    ) -> Result<BackoffChoice> {
        let spec = SweepSpec {
            pilots: pilots.to_vec(),
            backoff: betas.to_vec(),
            mode,
            ..SweepSpec::new(cfg.clone(), trials, seed)
        };
        if betas.is_empty() || pilots.is_empty() {
            return Err(Error::Config("backoff and pilot grids must be non-empty".into()));
        }
        Ok(best_backoff(&self.sweep(&spec)?).expect("non-empty grid"))
    }
}

/// The row with the smallest P(SO); ties go to the smaller `L`, then to the
/// larger `beta`.
pub fn best_backoff(rows: &[SweepRow]) -> Option<BackoffChoice> {
    rows.iter()
        .min_by(|a, b| {
            a.est
                .so
                .p_hat
                .total_cmp(&b.est.so.p_hat)
                .then(a.config.pilots.cmp(&b.config.pilots))
                .then(b.config.backoff.total_cmp(&a.config.backoff))
        })
        .map(|best| BackoffChoice {
            backoff: best.config.backoff,
            pilots: best.config.pilots,
            so: best.est.so,
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackoffChoice {
    pub backoff: f64,
    pub pilots: u32,
    pub so: ProbEstimate,
}

/// A grid over scenario parameters. Empty axes keep the base value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub schemes: Vec<Scheme>,
    pub devices: Vec<usize>,
    pub aps: Vec<usize>,
    /// Sets `snr_db` of the equal model or the base of the uniform model.
    pub base_snr_db: Vec<f64>,
    pub payload_bytes: Vec<u32>,
    pub pilots: Vec<u32>,
    pub backoff: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub mode: DeploymentMode,
    /// Stream block of the first grid point.
    pub first_point: u64,
}

impl SweepSpec {
    pub fn new(base: SystemConfig, trials: u64, seed: u64) -> Self {
        SweepSpec {
            base,
            schemes: Vec::new(),
            devices: Vec::new(),
            aps: Vec::new(),
            base_snr_db: Vec::new(),
            payload_bytes: Vec::new(),
            pilots: Vec::new(),
            backoff: Vec::new(),
            trials,
            seed,
            mode: DeploymentMode::Redraw,
            first_point: 0,
        }
    }

    /// Grid points with the scheme varying slowest and the backoff fastest.
    pub fn points(&self) -> Result<Vec<SystemConfig>> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let b = &self.base;
        let base_snr = match b.snr_model {
            SnrModel::Equal { snr_db } => Some(snr_db),
            SnrModel::Uniform { base_db, .. } => Some(base_db),
            SnrModel::Geometric => None,
        };
        if !self.base_snr_db.is_empty() && base_snr.is_none() {
            return Err(Error::Config("an SNR sweep needs the equal or uniform SNR model".into()));
        }
        let mut out = Vec::new();
        for &scheme in &axis(&self.schemes, b.scheme) {
            for &devices in &axis(&self.devices, b.devices) {
                for &aps in &axis(&self.aps, b.aps) {
                    for &snr in &axis(&self.base_snr_db, base_snr.unwrap_or(0.0)) {
                        for &payload_bytes in &axis(&self.payload_bytes, b.payload_bytes) {
                            for &pilots in &axis(&self.pilots, b.pilots) {
                                for &backoff in &axis(&self.backoff, b.backoff) {
                                    let snr_model = match b.snr_model {
                                        SnrModel::Equal { .. } => SnrModel::Equal { snr_db: snr },
                                        SnrModel::Uniform { spread_db, .. } => SnrModel::Uniform {
                                            base_db: snr,
                                            spread_db,
                                        },
                                        SnrModel::Geometric => SnrModel::Geometric,
                                    };
                                    let cfg = SystemConfig {
                                        scheme,
                                        devices,
                                        aps,
                                        snr_model,
                                        payload_bytes,
                                        pilots,
                                        backoff,
                                        ..b.clone()
                                    };
                                    cfg.validate()?;
                                    out.push(cfg);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: SystemConfig,
    pub est: Estimates,
}

/// Local diversity order `-d log10 p / d log10 rho` by centred differences
/// (one-sided at the ends).
pub fn diversity_order(snr_db: &[f64], p_out: &[f64]) -> Result<Vec<f64>> {
    if snr_db.len() != p_out.len() {
        return Err(Error::Dimension {
            expected: snr_db.len(),
            got: p_out.len(),
        });
    }
    if snr_db.len() < 3 {
        return Err(Error::domain("diversity_order", "needs at least three points"));
    }
    if p_out.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::domain("diversity_order", "outage probabilities must be positive"));
    }
    let x: Vec<f64> = snr_db.iter().map(|s| s / 10.0).collect();
    let y: Vec<f64> = p_out.iter().map(|p| p.log10()).collect();
    let n = x.len();
    Ok((0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            -(y[b] - y[a]) / (x[b] - x[a])
        })
        .collect())
}
