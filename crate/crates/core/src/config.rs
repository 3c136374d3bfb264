//! Scenario parameters and the flat TOML configuration file.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deployment::{Floor, PathLossParams};
use crate::error::{Error, Result};

/// Downlink scheme run in each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Variable rate from the estimated channel with a fixed backoff.
    Vr,
    /// Variable rate rescaled so the airtimes fill the data phase exactly.
    Mvr,
    /// One common rate `DB/T` for every device.
    #[serde(rename = "fr")]
    FixedRate,
    /// Strongest-AP association, all APs on the same band.
    Cellular,
    /// Broadcast then cooperative retransmission by successful devices.
    #[serde(rename = "twohop")]
    TwoHop,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Vr, Scheme::Mvr, Scheme::FixedRate, Scheme::Cellular, Scheme::TwoHop];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Vr => "vr",
            Scheme::Mvr => "mvr",
            Scheme::FixedRate => "fr",
            Scheme::Cellular => "cellular",
            Scheme::TwoHop => "twohop",
        }
    }

    /// Whether the scheme trains before transmitting.
    pub fn trains(self) -> bool {
        matches!(self, Scheme::Vr | Scheme::Mvr)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}' (expected vr, mvr, fr, cellular or twohop)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApPlacement {
    Uniform,
    Grid,
}

/// How the average SNR of each link is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SnrModel {
    /// Path loss and blockage from random positions.
    Geometric,
    /// Every link at the same SNR.
    Equal { snr_db: f64 },
    /// Each link drawn uniformly in `[base_db, base_db + spread_db]` dB.
    Uniform { base_db: f64, spread_db: f64 },
}

/// All parameters of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Cycle duration `T` in seconds.
    pub period: f64,
    /// Bandwidth `W` in Hz.
    pub bandwidth: f64,
    pub devices: usize,
    pub aps: usize,
    pub payload_bytes: u32,
    /// Pilot symbols per device.
    pub pilots: u32,
    pub backoff: f64,
    pub ap_power_dbm: f64,
    pub device_power_dbm: f64,
    pub noise_dbm_hz: f64,
    pub carrier_hz: f64,
    pub floor: Floor,
    pub los_p0: f64,
    pub los_cutoff: f64,
    pub exponent_near: f64,
    pub exponent_los: f64,
    pub exponent_nlos: f64,
    pub ap_placement: ApPlacement,
    pub snr_model: SnrModel,
    pub scheme: Scheme,
    /// Training lasts `D L T_s` when set, `L T_s` otherwise.
    pub training_overhead_per_device: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            period: 1e-3,
            bandwidth: 20e6,
            devices: 50,
            aps: 5,
            payload_bytes: 50,
            pilots: 10,
            backoff: 0.8,
            ap_power_dbm: 23.0,
            device_power_dbm: 23.0,
            noise_dbm_hz: -174.0,
            carrier_hz: 3.5e9,
            floor: Floor {
                width: 100.0,
                depth: 100.0,
            },
            los_p0: 0.25,
            los_cutoff: 15.0,
            exponent_near: 2.0,
            exponent_los: 3.26,
            exponent_nlos: 3.93,
            ap_placement: ApPlacement::Uniform,
            snr_model: SnrModel::Geometric,
            scheme: Scheme::Vr,
            training_overhead_per_device: true,
        }
    }
}

impl SystemConfig {
    /// Symbol time `1/W`.
    pub fn symbol_time(&self) -> f64 {
        1.0 / self.bandwidth
    }

    /// Payload per device in bits.
    pub fn bits(&self) -> f64 {
        8.0 * self.payload_bytes as f64
    }

    /// Duration `T_P` of the training phase.
    pub fn training_time(&self) -> f64 {
        let per = if self.training_overhead_per_device {
            self.devices as f64
        } else {
            1.0
        };
        per * self.pilots as f64 * self.symbol_time()
    }

    /// Downlink budget `T_D`; benchmark schemes skip training and get all of `T`.
    pub fn data_time(&self) -> f64 {
        if self.scheme.trains() {
            self.period - self.training_time()
        } else {
            self.period
        }
    }

    /// Deadline in the normalized airtime units `W / R` used by the analysis.
    pub fn normalized_deadline(&self) -> f64 {
        self.backoff * self.data_time() * self.bandwidth / self.bits()
    }

    pub fn path_loss_params(&self) -> Result<PathLossParams> {
        PathLossParams::from_carrier(self.carrier_hz, self.exponent_near, self.exponent_los, self.exponent_nlos)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.period > 0.0) || !self.period.is_finite() {
            return fail(format!("period_s must be positive, got {}", self.period));
        }
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return fail(format!("bandwidth_hz must be positive, got {}", self.bandwidth));
        }
        if self.devices == 0 || self.aps == 0 {
            return fail("devices and aps must be at least 1".into());
        }
        if self.payload_bytes == 0 {
            return fail("payload_bytes must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.backoff) {
            return fail(format!("backoff must lie in [0, 1], got {}", self.backoff));
        }
        if !(self.data_time() > 0.0) {
            return fail(format!(
                "training phase {:.3e} s leaves no time in a {:.3e} s cycle",
                self.training_time(),
                self.period
            ));
        }
        if !(self.floor.width > 0.0) || !(self.floor.depth > 0.0) {
            return fail("floor dimensions must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.los_p0) || !(self.los_cutoff > 0.0) {
            return fail("los_p0 must lie in [0, 1] and los_cutoff_m must be positive".into());
        }
        match self.snr_model {
            SnrModel::Equal { snr_db } if !snr_db.is_finite() => return fail("snr_db must be finite".into()),
            SnrModel::Uniform { base_db, spread_db } if !base_db.is_finite() || !(spread_db >= 0.0) => {
                return fail("snr_db must be finite and snr_spread_db non-negative".into())
            }
            _ => {}
        }
        self.path_loss_params().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Deployment handling across trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeploymentMode {
    /// One deployment drawn from the seed and reused by every trial.
    Fixed,
    /// A new deployment per trial.
    Redraw,
}

/// The on-disk configuration: a flat table of typed scalars plus optional
/// `sweep_*` arrays. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub period_s: f64,
    pub bandwidth_hz: f64,
    pub devices: usize,
    pub aps: usize,
    pub payload_bytes: u32,
    pub pilots: u32,
    pub backoff: f64,
    pub ap_power_dbm: f64,
    pub device_power_dbm: f64,
    pub noise_dbm_hz: f64,
    pub carrier_hz: f64,
    pub floor_width_m: f64,
    pub floor_depth_m: f64,
    pub los_p0: f64,
    pub los_cutoff_m: f64,
    pub exponent_near: f64,
    pub exponent_los: f64,
    pub exponent_nlos: f64,
    pub ap_placement: ApPlacement,
    /// "geometric", "equal" or "uniform".
    pub snr_model: String,
    pub snr_db: f64,
    pub snr_spread_db: f64,
    pub scheme: Scheme,
    pub training_overhead_per_device: bool,
    pub deployment: DeploymentMode,
    pub trials: u64,
    pub seed: u64,
    pub sweep_payload_bytes: Vec<u32>,
    pub sweep_pilots: Vec<u32>,
    pub sweep_backoff: Vec<f64>,
    pub sweep_snr_db: Vec<f64>,
    pub sweep_devices: Vec<usize>,
    pub sweep_aps: Vec<usize>,
    pub sweep_schemes: Vec<Scheme>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from_system(&SystemConfig::default())
    }
}

impl ConfigFile {
    pub fn from_system(cfg: &SystemConfig) -> Self {
        let (snr_model, snr_db, snr_spread_db) = match cfg.snr_model {
            SnrModel::Geometric => ("geometric", 20.0, 5.0),
            SnrModel::Equal { snr_db } => ("equal", snr_db, 5.0),
            SnrModel::Uniform { base_db, spread_db } => ("uniform", base_db, spread_db),
        };
        ConfigFile {
            period_s: cfg.period,
            bandwidth_hz: cfg.bandwidth,
            devices: cfg.devices,
            aps: cfg.aps,
            payload_bytes: cfg.payload_bytes,
            pilots: cfg.pilots,
            backoff: cfg.backoff,
            ap_power_dbm: cfg.ap_power_dbm,
            device_power_dbm: cfg.device_power_dbm,
            noise_dbm_hz: cfg.noise_dbm_hz,
            carrier_hz: cfg.carrier_hz,
            floor_width_m: cfg.floor.width,
            floor_depth_m: cfg.floor.depth,
            los_p0: cfg.los_p0,
            los_cutoff_m: cfg.los_cutoff,
            exponent_near: cfg.exponent_near,
            exponent_los: cfg.exponent_los,
            exponent_nlos: cfg.exponent_nlos,
            ap_placement: cfg.ap_placement,
            snr_model: snr_model.into(),
            snr_db,
            snr_spread_db,
            scheme: cfg.scheme,
            training_overhead_per_device: cfg.training_overhead_per_device,
            deployment: DeploymentMode::Redraw,
            trials: 10_000,
            seed: 1,
            sweep_payload_bytes: Vec::new(),
            sweep_pilots: Vec::new(),
            sweep_backoff: Vec::new(),
            sweep_snr_db: Vec::new(),
            sweep_devices: Vec::new(),
            sweep_aps: Vec::new(),
            sweep_schemes: Vec::new(),
        }
    }

    /// Parses TOML text; errors carry the line and key from the parser.
    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.system()?;
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn system(&self) -> Result<SystemConfig> {
        let snr_model = match self.snr_model.as_str() {
            "geometric" => SnrModel::Geometric,
            "equal" => SnrModel::Equal { snr_db: self.snr_db },
            "uniform" => SnrModel::Uniform {
                base_db: self.snr_db,
                spread_db: self.snr_spread_db,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown snr_model '{other}' (expected geometric, equal or uniform)"
                )))
            }
        };
        let cfg = SystemConfig {
            period: self.period_s,
            bandwidth: self.bandwidth_hz,
            devices: self.devices,
            aps: self.aps,
            payload_bytes: self.payload_bytes,
            pilots: self.pilots,
            backoff: self.backoff,
            ap_power_dbm: self.ap_power_dbm,
            device_power_dbm: self.device_power_dbm,
            noise_dbm_hz: self.noise_dbm_hz,
            carrier_hz: self.carrier_hz,
            floor: Floor {
                width: self.floor_width_m,
                depth: self.floor_depth_m,
            },
            los_p0: self.los_p0,
            los_cutoff: self.los_cutoff_m,
            exponent_near: self.exponent_near,
            exponent_los: self.exponent_los,
            exponent_nlos: self.exponent_nlos,
            ap_placement: self.ap_placement,
            snr_model,
            scheme: self.scheme,
            training_overhead_per_device: self.training_overhead_per_device,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON form. Independent of key order and
    /// of whether defaults were written out.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
