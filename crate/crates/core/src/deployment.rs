//! Floor geometry, LOS blockage and path loss, and the resulting matrix of
//! average link SNRs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ApPlacement, Scheme, SnrModel, SystemConfig};
use crate::error::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Floor {
    pub width: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Dual-slope path loss: `(lambda/4pi)^2 r^-alpha_near` up to the
/// breakpoint, then `c r^-alpha` with `c` chosen for continuity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    pub c_los: f64,
    pub c_nlos: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub alpha_near: f64,
    pub lambda: f64,
    pub breakpoint: f64,
}

impl PathLossParams {
    /// Breakpoint at ten wavelengths, free-space anchor below it.
    pub fn from_carrier(carrier_hz: f64, alpha_near: f64, alpha_los: f64, alpha_nlos: f64) -> Result<Self> {
        if !(carrier_hz > 0.0) {
            return Err(Error::domain("PathLossParams", "carrier frequency must be positive"));
        }
        if !(2.0 <= alpha_near && alpha_near <= alpha_los && alpha_los <= alpha_nlos) {
            return Err(Error::domain(
                "PathLossParams",
                format!("exponents must satisfy 2 <= near <= los <= nlos, got {alpha_near}, {alpha_los}, {alpha_nlos}"),
            ));
        }
        let lambda = SPEED_OF_LIGHT / carrier_hz;
        let breakpoint = 10.0 * lambda;
        let near_at_bp = Self::near_coefficient(lambda) * breakpoint.powf(-alpha_near);
        Ok(PathLossParams {
            c_los: near_at_bp * breakpoint.powf(alpha_los),
            c_nlos: near_at_bp * breakpoint.powf(alpha_nlos),
            alpha_los,
            alpha_nlos,
            alpha_near,
            lambda,
            breakpoint,
        })
    }

    fn near_coefficient(lambda: f64) -> f64 {
        let k = lambda / (4.0 * std::f64::consts::PI);
        k * k
    }
}

/// Probability that a link of length `r` is line of sight.
pub fn los_probability(r: f64, p0: f64, d0: f64) -> Result<f64> {
    if !(d0 > 0.0) {
        return Err(Error::domain("los_probability", format!("cutoff {d0} must be > 0")));
    }
    if !(r >= 0.0) {
        return Err(Error::domain("los_probability", format!("distance {r} must be >= 0")));
    }
    let extra = if r <= d0 {
        (1.0 - p0) * (r - d0) * (r - d0) / (d0 * d0)
    } else {
        0.0
    };
    Ok((p0 + extra).clamp(0.0, 1.0))
}

/// Linear power gain (at most 1) over distance `r`.
pub fn path_loss(r: f64, is_los: bool, p: &PathLossParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain("path_loss", format!("distance {r} must be > 0")));
    }
    let g = if r <= p.breakpoint {
        PathLossParams::near_coefficient(p.lambda) * r.powf(-p.alpha_near)
    } else if is_los {
        p.c_los * r.powf(-p.alpha_los)
    } else {
        p.c_nlos * r.powf(-p.alpha_nlos)
    };
    Ok(g.min(1.0))
}

/// Linear average SNR `P_T loss / (N0 W)`.
pub fn average_snr(p_tx_dbm: f64, loss: f64, n0_dbm_hz: f64, bandwidth: f64) -> f64 {
    let noise_dbm = n0_dbm_hz + 10.0 * bandwidth.log10();
    10f64.powf((p_tx_dbm - noise_dbm) / 10.0) * loss
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn place_uniform<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: Floor) -> Vec<Point> {
    (0..n)
        .map(|_| Point {
            x: rng.random::<f64>() * floor.width,
            y: rng.random::<f64>() * floor.depth,
        })
        .collect()
}

/// Cell centres of the smallest near-square grid holding `n` points, filled
/// row by row.
pub fn place_grid(n: usize, floor: Floor) -> Vec<Point> {
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let rows = n.div_ceil(cols);
    (0..n)
        .map(|i| Point {
            x: (i % cols) as f64 * floor.width / cols as f64 + 0.5 * floor.width / cols as f64,
            y: (i / cols) as f64 * floor.depth / rows as f64 + 0.5 * floor.depth / rows as f64,
        })
        .collect()
}

/// Positions, link states and average SNRs of one scenario draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub ap_xy: Vec<Point>,
    pub dev_xy: Vec<Point>,
    /// `los[d][a]` for device `d` and AP `a`.
    pub los: Vec<Vec<bool>>,
    /// Linear average SNR `snr[d][a]`.
    pub snr: Vec<Vec<f64>>,
    /// Device-to-device SNRs, present when the scenario relays.
    pub d2d_snr: Option<Vec<Vec<f64>>>,
}

impl Deployment {
    /// Deployment with a prescribed SNR matrix and no geometry.
    pub fn from_snr(snr: Vec<Vec<f64>>) -> Result<Self> {
        let aps = snr.first().map_or(0, |r| r.len());
        if aps == 0 {
            return Err(Error::domain("Deployment::from_snr", "empty SNR matrix"));
        }
        for row in &snr {
            if row.len() != aps {
                return Err(Error::Dimension {
                    expected: aps,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !(*v > 0.0) || v.is_infinite()) {
                return Err(Error::domain("Deployment::from_snr", "SNR entries must be finite and > 0"));
            }
        }
        let origin = Point { x: 0.0, y: 0.0 };
        Ok(Deployment {
            ap_xy: vec![origin; aps],
            dev_xy: vec![origin; snr.len()],
            los: vec![vec![true; aps]; snr.len()],
            snr,
            d2d_snr: None,
        })
    }

    /// `devices x aps` links all at `snr_db`.
    pub fn equal(devices: usize, aps: usize, snr_db: f64) -> Self {
        Self::from_snr(vec![vec![db_to_linear(snr_db); aps]; devices]).expect("valid equal deployment")
    }

    pub fn devices(&self) -> usize {
        self.snr.len()
    }

    pub fn aps(&self) -> usize {
        self.ap_xy.len()
    }

    pub fn to_json(&self) -> String {
        let doc = DeploymentDoc {
            ap_xy: self.ap_xy.clone(),
            dev_xy: self.dev_xy.clone(),
            los: self.los.clone(),
            snr_db: self.snr.iter().map(|r| r.iter().map(|&v| linear_to_db(v)).collect()).collect(),
            d2d_snr_db: self.d2d_snr.as_ref().map(|m| {
                m.iter()
                    .enumerate()
                    .map(|(i, r)| {
                        r.iter()
                            .enumerate()
                            .map(|(j, &v)| (i != j).then(|| linear_to_db(v)))
                            .collect()
                    })
                    .collect()
            }),
        };
        serde_json::to_string_pretty(&doc).expect("deployment serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DeploymentDoc =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("deployment JSON: {e}")))?;
        let snr: Vec<Vec<f64>> = doc.snr_db.iter().map(|r| r.iter().map(|&v| db_to_linear(v)).collect()).collect();
        let mut depl = Self::from_snr(snr)?;
        let (d, a) = (depl.devices(), depl.aps());
        if doc.ap_xy.len() != a {
            return Err(Error::Dimension {
                expected: a,
                got: doc.ap_xy.len(),
            });
        }
        if doc.dev_xy.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: doc.dev_xy.len(),
            });
        }
        if doc.los.len() != d || doc.los.iter().any(|r| r.len() != a) {
            return Err(Error::Config("deployment JSON: LOS matrix shape mismatch".into()));
        }
        depl.ap_xy = doc.ap_xy;
        depl.dev_xy = doc.dev_xy;
        depl.los = doc.los;
        if let Some(m) = doc.d2d_snr_db {
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                return Err(Error::Config("deployment JSON: d2d matrix shape mismatch".into()));
            }
            depl.d2d_snr = Some(
                m.iter()
                    .map(|r| r.iter().map(|v| v.map_or(0.0, db_to_linear)).collect())
                    .collect(),
            );
        }
        Ok(depl)
    }
}

#[derive(Serialize, Deserialize)]
struct DeploymentDoc {
    ap_xy: Vec<Point>,
    dev_xy: Vec<Point>,
    los: Vec<Vec<bool>>,
    snr_db: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d2d_snr_db: Option<Vec<Vec<Option<f64>>>>,
}

/// Average SNR of one link under the configured model.
fn link_snr<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    params: &PathLossParams,
    r: f64,
    los: bool,
    p_tx_dbm: f64,
) -> f64 {
    match cfg.snr_model {
        SnrModel::Geometric => {
            let loss = path_loss(r.max(1e-6), los, params).expect("positive distance");
            average_snr(p_tx_dbm, loss, cfg.noise_dbm_hz, cfg.bandwidth)
        }
        SnrModel::Equal { snr_db } => db_to_linear(snr_db),
        SnrModel::Uniform { base_db, spread_db } => db_to_linear(base_db + spread_db * rng.random::<f64>()),
    }
}

/// Draws a scenario: AP and device positions, LOS states and SNRs.
///
/// The device-to-device matrix is only built for relaying schemes. It comes
/// from its own sub-stream so the AP links do not depend on the scheme.
pub fn build_deployment<R: Rng + ?Sized>(rng: &mut R, cfg: &SystemConfig) -> Result<Deployment> {
    let params = cfg.path_loss_params()?;
    let relay_seed = rng.next_u64();
    let ap_xy = match cfg.ap_placement {
        ApPlacement::Uniform => place_uniform(rng, cfg.aps, cfg.floor),
        ApPlacement::Grid => place_grid(cfg.aps, cfg.floor),
    };
    let dev_xy = place_uniform(rng, cfg.devices, cfg.floor);
    let mut los = Vec::with_capacity(cfg.devices);
    let mut snr = Vec::with_capacity(cfg.devices);
    for dev in &dev_xy {
        let mut los_row = Vec::with_capacity(cfg.aps);
        let mut snr_row = Vec::with_capacity(cfg.aps);
        for ap in &ap_xy {
            let r = dev.distance(*ap);
            let is_los = rng.random::<f64>() < los_probability(r, cfg.los_p0, cfg.los_cutoff)?;
            snr_row.push(link_snr(rng, cfg, &params, r, is_los, cfg.ap_power_dbm));
            los_row.push(is_los);
        }
        los.push(los_row);
        snr.push(snr_row);
    }
    let mut depl = Deployment {
        ap_xy,
        dev_xy,
        los,
        snr,
        d2d_snr: None,
    };
    if cfg.scheme == Scheme::TwoHop {
        depl.d2d_snr = Some(device_links(&mut ChaCha8Rng::seed_from_u64(relay_seed), cfg, &params, &depl.dev_xy)?);
    }
    Ok(depl)
}

/// Symmetric device-to-device SNR matrix with a zero diagonal.
fn device_links<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    params: &PathLossParams,
    dev_xy: &[Point],
) -> Result<Vec<Vec<f64>>> {
    let n = dev_xy.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = dev_xy[i].distance(dev_xy[j]);
            let is_los = rng.random::<f64>() < los_probability(r, cfg.los_p0, cfg.los_cutoff)?;
            let v = link_snr(rng, cfg, params, r, is_los, cfg.device_power_dbm);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}
