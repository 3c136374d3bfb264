//! Rayleigh block fading with MMSE channel estimates.
//!
//! Each AP-to-device link is a unit-power circularly symmetric Gaussian
//! coefficient split as `h = h_hat + h_err`, where the estimate and the error
//! are independent with variances `1 - s2` and `s2`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One realization of a device's channel towards every AP.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub h: Vec<Complex64>,
    pub h_hat: Vec<Complex64>,
    pub h_err: Vec<Complex64>,
}

/// Average received SNR (linear) of a device from each AP.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrDiag {
    rho: Vec<f64>,
}

impl SnrDiag {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() || rho.iter().any(|r| !(*r > 0.0) || r.is_infinite()) {
            return Err(Error::domain("SnrDiag::new", "SNR entries must be finite and > 0"));
        }
        Ok(SnrDiag { rho })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// MMSE error variance `1 / (1 + rho L)` after `pilots` training symbols.
pub fn estimation_error_variance(pilots: u32, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::domain("estimation_error_variance", format!("SNR {rho} must be > 0")));
    }
    Ok(1.0 / (1.0 + rho * pilots as f64))
}

/// `CN(0, var)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws a channel towards `aps` APs with a common error variance.
pub fn draw_channel<R: Rng + ?Sized>(rng: &mut R, sigma2_e: f64, aps: usize) -> ChannelDraw {
    draw_channel_per_link(rng, &vec![sigma2_e; aps])
}

/// Draws a channel with one error variance per AP link.
pub fn draw_channel_per_link<R: Rng + ?Sized>(rng: &mut R, sigma2_e: &[f64]) -> ChannelDraw {
    let n = sigma2_e.len();
    let mut h = Vec::with_capacity(n);
    let mut h_hat = Vec::with_capacity(n);
    let mut h_err = Vec::with_capacity(n);
    for &s2 in sigma2_e {
        debug_assert!((0.0..=1.0).contains(&s2));
        let est = complex_normal(rng, 1.0 - s2);
        let err = complex_normal(rng, s2);
        h_hat.push(est);
        h_err.push(err);
        h.push(est + err);
    }
    ChannelDraw { h, h_hat, h_err }
}

/// Effective SNR `sum_a rho_a |h_a|^2` of a beamformed link.
pub fn beamformed_snr(h: &[Complex64], rho: &[f64]) -> f64 {
    h.iter().zip(rho).map(|(c, r)| r * c.norm_sqr()).sum()
}

/// `W log2(1 + h* G h)` in bit/s.
pub fn mutual_information(h: &[Complex64], snr: &SnrDiag, bandwidth: f64) -> Result<f64> {
    if h.len() != snr.len() {
        return Err(Error::Dimension {
            expected: snr.len(),
            got: h.len(),
        });
    }
    Ok(bandwidth * beamformed_snr(h, snr.as_slice()).ln_1p() / std::f64::consts::LN_2)
}

/// Rate chosen from the estimate, derated by the backoff factor `beta`.
pub fn select_rate(h_hat: &[Complex64], snr: &SnrDiag, bandwidth: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain("select_rate", format!("backoff {beta} not in [0, 1]")));
    }
    Ok(beta * mutual_information(h_hat, snr, bandwidth)?)
}
