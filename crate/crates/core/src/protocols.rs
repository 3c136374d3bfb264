//! One downlink cycle under each scheme.
//!
//! A cycle is split into drawing the channels ([`draw_cycle`]) and evaluating
//! a scheme on them, so that several schemes can be compared on the very same
//! fades.

use rand::Rng;

use crate::channel::{beamformed_snr, complex_normal, draw_channel_per_link, ChannelDraw};
pub use crate::config::{Scheme, SystemConfig};
use crate::deployment::Deployment;
use crate::error::{Error, Result};

/// Per-device results and the outage flags of one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    /// Selected rates in bit/s.
    pub rates: Vec<f64>,
    /// Mutual information of the true channel in bit/s.
    pub capacities: Vec<f64>,
    /// `B / R_d` in seconds; infinite for a zero rate.
    pub airtimes: Vec<f64>,
    pub total_airtime: f64,
    /// Transmission error: some device got a rate above its capacity.
    pub te: bool,
    /// Time overflow: the airtimes do not fit in the data phase.
    pub to: bool,
    /// System outage, `te || to`.
    pub so: bool,
    pub failed_devices: Vec<usize>,
}

impl CycleOutcome {
    fn new(rates: Vec<f64>, capacities: Vec<f64>, bits: f64, failed: Vec<usize>, total: Option<f64>, budget: f64) -> Self {
        let airtimes: Vec<f64> = rates.iter().map(|&r| if r > 0.0 { bits / r } else { f64::INFINITY }).collect();
        let total_airtime = total.unwrap_or_else(|| airtimes.iter().sum());
        let te = !failed.is_empty();
        let to = total_airtime > budget;
        CycleOutcome {
            rates,
            capacities,
            airtimes,
            total_airtime,
            te,
            to,
            so: te || to,
            failed_devices: failed,
        }
    }
}

/// Channels of all devices in one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleDraw {
    /// Estimation error variance of every device-AP link.
    pub sigma2: Vec<Vec<f64>>,
    pub channels: Vec<ChannelDraw>,
}

/// `1 / (1 + rho L)` for every link of the deployment.
pub fn error_variances(cfg: &SystemConfig, depl: &Deployment) -> Vec<Vec<f64>> {
    let l = cfg.pilots as f64;
    depl.snr
        .iter()
        .map(|row| row.iter().map(|&rho| 1.0 / (1.0 + rho * l)).collect())
        .collect()
}

/// Draws every device's channel with the error variances left by training.
pub fn draw_cycle<R: Rng + ?Sized>(cfg: &SystemConfig, depl: &Deployment, rng: &mut R) -> CycleDraw {
    draw_cycle_with(error_variances(cfg, depl), rng)
}

/// Draws channels for prescribed per-link error variances.
pub fn draw_cycle_with<R: Rng + ?Sized>(sigma2: Vec<Vec<f64>>, rng: &mut R) -> CycleDraw {
    let channels = sigma2.iter().map(|row| draw_channel_per_link(rng, row)).collect();
    CycleDraw { sigma2, channels }
}

fn rate_of(bandwidth: f64, snr: f64) -> f64 {
    bandwidth * snr.ln_1p() / std::f64::consts::LN_2
}

/// `beta W log2(1 + h_hat* G h_hat)` per device.
pub fn selected_rates(cfg: &SystemConfig, depl: &Deployment, draw: &CycleDraw, beta: f64) -> Vec<f64> {
    draw.channels
        .iter()
        .zip(&depl.snr)
        .map(|(ch, rho)| beta * rate_of(cfg.bandwidth, beamformed_snr(&ch.h_hat, rho)))
        .collect()
}

/// `W log2(1 + h* G h)` per device, all APs transmitting jointly.
pub fn joint_capacities(cfg: &SystemConfig, depl: &Deployment, draw: &CycleDraw) -> Vec<f64> {
    draw.channels
        .iter()
        .zip(&depl.snr)
        .map(|(ch, rho)| rate_of(cfg.bandwidth, beamformed_snr(&ch.h, rho)))
        .collect()
}

fn over_capacity(rates: &[f64], caps: &[f64]) -> Vec<usize> {
    (0..rates.len()).filter(|&d| rates[d] > caps[d]).collect()
}

pub fn evaluate_vr(cfg: &SystemConfig, depl: &Deployment, draw: &CycleDraw) -> CycleOutcome {
    let rates = selected_rates(cfg, depl, draw, cfg.backoff);
    let caps = joint_capacities(cfg, depl, draw);
    let failed = over_capacity(&rates, &caps);
    CycleOutcome::new(rates, caps, cfg.bits(), failed, None, cfg.data_time())
}

/// Rescales pre-backoff rates by `alpha = sum(B / R_d) / T_D` so that the
/// airtimes add up to `data_time`. Zero rates stay zero.
pub fn mvr_rates(rates: &[f64], bits: f64, data_time: f64) -> Vec<f64> {
    let alpha = rates.iter().filter(|&&r| r > 0.0).map(|r| bits / r).sum::<f64>() / data_time;
    rates.iter().map(|&r| alpha * r).collect()
}

pub fn evaluate_mvr(cfg: &SystemConfig, depl: &Deployment, draw: &CycleDraw) -> CycleOutcome {
    let pre = selected_rates(cfg, depl, draw, 1.0);
    let rates = mvr_rates(&pre, cfg.bits(), cfg.data_time());
    let caps = joint_capacities(cfg, depl, draw);
    // a device with a zero estimate cannot be served at any rate
    let failed = (0..rates.len()).filter(|&d| rates[d] == 0.0 || rates[d] > caps[d]).collect();
    let mut out = CycleOutcome::new(rates, caps, cfg.bits(), failed, None, cfg.data_time());
    out.total_airtime = out.airtimes.iter().filter(|t| t.is_finite()).sum();
    out.to = false;
    out.so = out.te;
    out
}

pub fn evaluate_fixed_rate(cfg: &SystemConfig, depl: &Deployment, draw: &CycleDraw) -> CycleOutcome {
    let rate = cfg.devices as f64 * cfg.bits() / cfg.period;
    let caps = joint_capacities(cfg, depl, draw);
    let failed = (0..caps.len()).filter(|&d| caps[d] < rate).collect();
    CycleOutcome::new(vec![rate; caps.len()], caps, cfg.bits(), failed, Some(cfg.period), cfg.period)
}

/// AP with the strongest average SNR; ties go to the lower index.
pub fn serving_ap(rho: &[f64]) -> usize {
    let mut best = 0;
    for (a, &r) in rho.iter().enumerate() {
        if r > rho[best] {
            best = a;
        }
    }
    best
}

pub fn evaluate_cellular(cfg: &SystemConfig, depl: &Deployment, draw: &CycleDraw) -> CycleOutcome {
    let rate = cfg.devices as f64 * cfg.bits() / (depl.aps() as f64 * cfg.period);
    let caps: Vec<f64> = draw
        .channels
        .iter()
        .zip(&depl.snr)
        .map(|(ch, rho)| {
            let s = serving_ap(rho);
            let mut interference = 0.0;
            for (a, (h, r)) in ch.h.iter().zip(rho).enumerate() {
                if a != s {
                    interference += r * h.norm_sqr();
                }
            }
            rate_of(cfg.bandwidth, rho[s] * ch.h[s].norm_sqr() / (1.0 + interference))
        })
        .collect();
    let failed = (0..caps.len()).filter(|&d| caps[d] < rate).collect();
    CycleOutcome::new(vec![rate; caps.len()], caps, cfg.bits(), failed, Some(cfg.period), cfg.period)
}

/// AP with the largest mean SNR over all devices.
pub fn designated_ap(depl: &Deployment) -> usize {
    let means: Vec<f64> = (0..depl.aps()).map(|a| depl.snr.iter().map(|row| row[a]).sum::<f64>()).collect();
    serving_ap(&means)
}

/// Two rounds: the designated AP broadcasts everything at `2DB/T`; the
/// `D - k` devices that missed it are served again at `2(D-k)B/T` by the AP
/// (same fade) together with the `k` successful devices (fresh fades drawn
/// from `rng`), combining as a joint transmission.
pub fn evaluate_twohop<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    depl: &Deployment,
    draw: &CycleDraw,
    rng: &mut R,
) -> Result<CycleOutcome> {
    let d_count = depl.devices();
    let ap = designated_ap(depl);
    let bits = cfg.bits();
    let rate1 = 2.0 * d_count as f64 * bits / cfg.period;
    let direct: Vec<f64> = (0..d_count)
        .map(|d| depl.snr[d][ap] * draw.channels[d].h[ap].norm_sqr())
        .collect();
    let mut caps: Vec<f64> = direct.iter().map(|&s| rate_of(cfg.bandwidth, s)).collect();
    let mut rates = vec![rate1; d_count];
    let successful: Vec<usize> = (0..d_count).filter(|&d| caps[d] >= rate1).collect();
    let missed: Vec<usize> = (0..d_count).filter(|&d| caps[d] < rate1).collect();
    if missed.is_empty() {
        return Ok(CycleOutcome::new(rates, caps, bits, Vec::new(), Some(0.5 * cfg.period), cfg.period));
    }
    let rate2 = 2.0 * missed.len() as f64 * bits / cfg.period;
    let relay = match (&depl.d2d_snr, successful.is_empty()) {
        (Some(m), _) => Some(m),
        (None, true) => None,
        (None, false) => return Err(Error::Config("two-hop relaying needs device-to-device SNRs".into())),
    };
    let mut failed = Vec::new();
    for &d in &missed {
        let mut gain = direct[d];
        if let Some(m) = relay {
            for &s in &successful {
                gain += m[s][d] * complex_normal(rng, 1.0).norm_sqr();
            }
        }
        caps[d] = rate_of(cfg.bandwidth, gain);
        rates[d] = rate2;
        if caps[d] < rate2 {
            failed.push(d);
        }
    }
    Ok(CycleOutcome::new(rates, caps, bits, failed, Some(cfg.period), cfg.period))
}

pub fn run_cycle_vr<R: Rng + ?Sized>(cfg: &SystemConfig, depl: &Deployment, rng: &mut R) -> CycleOutcome {
    evaluate_vr(cfg, depl, &draw_cycle(cfg, depl, rng))
}

pub fn run_cycle_mvr<R: Rng + ?Sized>(cfg: &SystemConfig, depl: &Deployment, rng: &mut R) -> CycleOutcome {
    evaluate_mvr(cfg, depl, &draw_cycle(cfg, depl, rng))
}

pub fn run_cycle_fixed_rate<R: Rng + ?Sized>(cfg: &SystemConfig, depl: &Deployment, rng: &mut R) -> CycleOutcome {
    evaluate_fixed_rate(cfg, depl, &draw_cycle(cfg, depl, rng))
}

pub fn run_cycle_cellular<R: Rng + ?Sized>(cfg: &SystemConfig, depl: &Deployment, rng: &mut R) -> CycleOutcome {
    evaluate_cellular(cfg, depl, &draw_cycle(cfg, depl, rng))
}

pub fn run_cycle_twohop<R: Rng + ?Sized>(cfg: &SystemConfig, depl: &Deployment, rng: &mut R) -> Result<CycleOutcome> {
    let draw = draw_cycle(cfg, depl, rng);
    evaluate_twohop(cfg, depl, &draw, rng)
}

/// Evaluates `scheme` on an existing draw.
pub fn evaluate<R: Rng + ?Sized>(
    scheme: Scheme,
    cfg: &SystemConfig,
    depl: &Deployment,
    draw: &CycleDraw,
    rng: &mut R,
) -> Result<CycleOutcome> {
    Ok(match scheme {
        Scheme::Vr => evaluate_vr(cfg, depl, draw),
        Scheme::Mvr => evaluate_mvr(cfg, depl, draw),
        Scheme::FixedRate => evaluate_fixed_rate(cfg, depl, draw),
        Scheme::Cellular => evaluate_cellular(cfg, depl, draw),
        Scheme::TwoHop => evaluate_twohop(cfg, depl, draw, rng)?,
    })
}

/// One cycle of `cfg.scheme`.
pub fn run_cycle<R: Rng + ?Sized>(cfg: &SystemConfig, depl: &Deployment, rng: &mut R) -> Result<CycleOutcome> {
    let draw = draw_cycle(cfg, depl, rng);
    evaluate(cfg.scheme, cfg, depl, &draw, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(devices: usize, aps: usize) -> SystemConfig {
        SystemConfig {
            devices,
            aps,
            ..SystemConfig::default()
        }
    }

    fn log2_1p(x: f64) -> f64 {
        (1.0 + x).log2()
    }

    #[test]
    fn perfect_estimates_never_overshoot() {
        let c = SystemConfig { backoff: 1.0, ..cfg(8, 3) };
        let depl = Deployment::equal(8, 3, 15.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let draw = draw_cycle_with(vec![vec![0.0; 3]; 8], &mut rng);
            let out = evaluate_vr(&c, &depl, &draw);
            assert!(!out.te);
            assert_eq!(out.so, out.to);
        }
    }

    #[test]
    fn zero_backoff_always_overflows() {
        let c = SystemConfig { backoff: 0.0, ..cfg(4, 2) };
        let depl = Deployment::equal(4, 2, 20.0);
        let out = run_cycle_vr(&c, &depl, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(out.rates.iter().all(|&r| r == 0.0));
        assert!(out.airtimes.iter().all(|t| t.is_infinite()));
        assert!(out.to && out.so);
    }

    #[test]
    fn vr_trace_two_devices() {
        let c = cfg(2, 1);
        let depl = Deployment::from_snr(vec![vec![3.0], vec![40.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let draw = draw_cycle(&c, &depl, &mut rng);
            let out = evaluate_vr(&c, &depl, &draw);
            let mut te = false;
            let mut total = 0.0;
            for d in 0..2 {
                let rho = depl.snr[d][0];
                assert!((draw.sigma2[d][0] - 1.0 / (1.0 + rho * 10.0)).abs() < 1e-15);
                let r = 0.8 * 20e6 * log2_1p(rho * draw.channels[d].h_hat[0].norm_sqr());
                let cap = 20e6 * log2_1p(rho * draw.channels[d].h[0].norm_sqr());
                te |= r > cap;
                total += 400.0 / r;
            }
            let budget = 1e-3 - 2.0 * 10.0 / 20e6;
            assert_eq!(out.te, te);
            assert_eq!(out.to, total > budget);
            assert_eq!(out.so, te || total > budget);
        }
    }

    #[test]
    fn mvr_fills_the_budget_and_never_overflows() {
        let c = cfg(10, 3);
        let depl = Deployment::from_snr((0..10).map(|d| vec![2.0 + d as f64, 5.0, 30.0 - d as f64]).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let draw = draw_cycle(&c, &depl, &mut rng);
            let out = evaluate_mvr(&c, &depl, &draw);
            assert!(!out.to);
            assert!(((out.total_airtime - c.data_time()) / c.data_time()).abs() < 1e-9);
            let vr = evaluate_vr(&c, &depl, &draw);
            assert!(!out.so || vr.so);
            let vr1 = evaluate_vr(&SystemConfig { backoff: 1.0, ..c.clone() }, &depl, &draw);
            let alpha = vr1.total_airtime / c.data_time();
            if alpha <= 1.0 {
                assert!(!out.te || vr1.te);
            }
        }
    }

    #[test]
    fn mvr_rates_ignore_backoff() {
        let pre = [3.1e6, 7.7e6, 1.2e7, 4.4e5];
        let a = mvr_rates(&pre, 400.0, 9e-4);
        let half: Vec<f64> = pre.iter().map(|r| 0.5 * r).collect();
        let b = mvr_rates(&half, 400.0, 9e-4);
        for (x, y) in a.iter().zip(&b) {
            assert!(((x - y) / x).abs() < 1e-12);
        }
        let with_zero = mvr_rates(&[0.0, 1e6], 400.0, 1e-3);
        assert_eq!(with_zero[0], 0.0);
        assert!((400.0 / with_zero[1] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn fixed_rate_flags() {
        let c = cfg(5, 2);
        let rate = 5.0 * 400.0 / 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let strong = Deployment::equal(5, 2, 60.0);
        let out = run_cycle_fixed_rate(&c, &strong, &mut rng);
        assert!(out.capacities.iter().all(|&x| x >= rate));
        assert!(!out.so);
        for _ in 0..100 {
            let out = run_cycle_fixed_rate(&c, &Deployment::equal(5, 2, 0.0), &mut rng);
            assert_eq!(out.so, out.capacities.iter().any(|&x| x < rate));
            assert!(!out.to);
            assert!((out.airtimes.iter().sum::<f64>() - c.period).abs() < 1e-15);
        }
    }

    #[test]
    fn single_cell_matches_fixed_rate() {
        let c = cfg(6, 1);
        let depl = Deployment::equal(6, 1, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let draw = draw_cycle(&c, &depl, &mut rng);
            let a = evaluate_cellular(&c, &depl, &draw);
            let b = evaluate_fixed_rate(&c, &depl, &draw);
            assert_eq!(a.so, b.so);
            assert_eq!(a.failed_devices, b.failed_devices);
        }
    }

    #[test]
    fn cellular_trace_with_interference() {
        let c = cfg(4, 2);
        let depl = Deployment::from_snr(vec![vec![100.0, 1.0], vec![1.0, 100.0], vec![50.0, 1e12], vec![20.0, 20.0]]).unwrap();
        assert_eq!(serving_ap(&depl.snr[3]), 0);
        let rate = 4.0 * 400.0 / (2.0 * 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let draw = draw_cycle(&c, &depl, &mut rng);
            let out = evaluate_cellular(&c, &depl, &draw);
            let mut failed = Vec::new();
            for d in 0..4 {
                let h = &draw.channels[d].h;
                let s = if depl.snr[d][0] >= depl.snr[d][1] { 0 } else { 1 };
                let i = 1 - s;
                let sinr = depl.snr[d][s] * h[s].norm_sqr() / (1.0 + depl.snr[d][i] * h[i].norm_sqr());
                if 20e6 * log2_1p(sinr) < rate {
                    failed.push(d);
                }
            }
            assert_eq!(out.failed_devices, failed);
            assert!(!out.to);
        }
    }

    #[test]
    fn overwhelming_interference_fails() {
        let c = cfg(1, 2);
        let depl = Deployment::from_snr(vec![vec![1e3, 1e2]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draw = CycleDraw {
            sigma2: vec![vec![1.0; 2]],
            channels: vec![ChannelDraw {
                h: vec![complex_normal(&mut rng, 1.0), num_complex::Complex64::new(1e6, 0.0)],
                h_hat: vec![Default::default(); 2],
                h_err: vec![Default::default(); 2],
            }],
        };
        assert!(evaluate_cellular(&c, &depl, &draw).so);
    }

    fn relay_deployment(snr_db: f64, d2d_db: f64, devices: usize) -> Deployment {
        let mut d = Deployment::equal(devices, 2, snr_db);
        let v = 10f64.powf(d2d_db / 10.0);
        d.d2d_snr = Some((0..devices).map(|i| (0..devices).map(|j| if i == j { 0.0 } else { v }).collect()).collect());
        d
    }

    #[test]
    fn twohop_everyone_decodes_first_round() {
        let c = cfg(3, 2);
        let depl = relay_deployment(80.0, 10.0, 3);
        let out = run_cycle_twohop(&c, &depl, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(!out.so && !out.to);
        assert!(out.rates.iter().all(|&r| r == 2.0 * 3.0 * 400.0 / 1e-3));
    }

    #[test]
    fn twohop_nobody_decodes() {
        let c = cfg(3, 2);
        let depl = relay_deployment(-40.0, 10.0, 3);
        let out = run_cycle_twohop(&c, &depl, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert!(out.so);
        assert_eq!(out.failed_devices, vec![0, 1, 2]);
        assert!(out.rates.iter().all(|&r| r == 2.0 * 3.0 * 400.0 / 1e-3));
    }

    #[test]
    fn twohop_trace_three_devices() {
        let c = cfg(3, 2);
        let depl = relay_deployment(3.0, 15.0, 3);
        let mut seen_partial = false;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw = draw_cycle(&c, &depl, &mut rng);
            let mut replay = rng.clone();
            let out = evaluate_twohop(&c, &depl, &draw, &mut rng).unwrap();
            let rate1 = 2.0 * 3.0 * 400.0 / 1e-3;
            let direct: Vec<f64> = (0..3).map(|d| depl.snr[d][0] * draw.channels[d].h[0].norm_sqr()).collect();
            let ok: Vec<usize> = (0..3).filter(|&d| 20e6 * log2_1p(direct[d]) >= rate1).collect();
            let k = ok.len();
            let mut failed = Vec::new();
            if k < 3 {
                let rate2 = 2.0 * (3 - k) as f64 * 400.0 / 1e-3;
                for d in (0..3).filter(|d| !ok.contains(d)) {
                    assert_eq!(out.rates[d], rate2);
                    let mut g = direct[d];
                    for &s in &ok {
                        g += depl.d2d_snr.as_ref().unwrap()[s][d] * complex_normal(&mut replay, 1.0).norm_sqr();
                    }
                    if 20e6 * log2_1p(g) < rate2 {
                        failed.push(d);
                    }
                }
                seen_partial |= k > 0;
            }
            assert_eq!(out.failed_devices, failed);
            assert_eq!(out.so, !failed.is_empty());
            assert!(!out.to);
        }
        assert!(seen_partial);
    }

    #[test]
    fn twohop_requires_relay_links() {
        let c = cfg(3, 2);
        let depl = Deployment::equal(3, 2, 3.0);
        let mut hit = false;
        for seed in 0..100 {
            if run_cycle_twohop(&c, &depl, &mut ChaCha8Rng::seed_from_u64(seed)).is_err() {
                hit = true;
            }
        }
        assert!(hit);
    }

    #[test]
    fn outcome_flags_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for scheme in Scheme::ALL {
            let c = SystemConfig { scheme, ..cfg(5, 2) };
            let depl = relay_deployment(8.0, 8.0, 5);
            for _ in 0..200 {
                let out = run_cycle(&c, &depl, &mut rng).unwrap();
                assert_eq!(out.so, out.te || out.to);
                if scheme != Scheme::Vr {
                    assert!(!out.to);
                }
            }
        }
    }
}
