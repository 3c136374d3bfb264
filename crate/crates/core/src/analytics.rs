//! Closed forms and bounds for device failure, time underflow and time
//! overflow.
//!
//! Time-underflow results are stated for the normalized airtimes
//! `Y_d = 1 / log2(1 + rho_d |h_hat_d|^2)` with a single AP. With
//! `G_d = 1 / (rho_d (1 - s2_d))` each `Y_d` has CDF
//! `exp(-G_d (2^{1/y} - 1))`, and the deadline `y` is `beta T_D W / B`.

use std::f64::consts::LN_2;

use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::specfun::{integrate, marcum_q, maximize_1d, on_cut, Quadrature};

/// Measurement NSRs `G_d = 1/(rho_d (1 - s2_d))` of a device population.
#[derive(Debug, Clone, PartialEq)]
pub struct NsrProfile {
    g: Vec<f64>,
    g_bar: f64,
}

impl NsrProfile {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.is_empty() || g.iter().any(|v| !(*v > 0.0) || v.is_infinite()) {
            return Err(Error::domain("NsrProfile::new", "NSRs must be finite and > 0"));
        }
        let g_bar = g.iter().sum::<f64>() / g.len() as f64;
        Ok(NsrProfile { g, g_bar })
    }

    /// `D` devices sharing the same NSR.
    pub fn equal(devices: usize, g: f64) -> Result<Self> {
        Self::new(vec![g; devices])
    }

    /// Profile from linear SNRs and estimation error variances.
    pub fn from_snr(rho: &[f64], sigma2_e: &[f64]) -> Result<Self> {
        if rho.len() != sigma2_e.len() {
            return Err(Error::Dimension {
                expected: rho.len(),
                got: sigma2_e.len(),
            });
        }
        Self::new(rho.iter().zip(sigma2_e).map(|(r, s)| 1.0 / (r * (1.0 - s))).collect())
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn g_bar(&self) -> f64 {
        self.g_bar
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

/// Lower and upper probability bounds, optionally with the tightened upper
/// bound and the per-device `J_d` values behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSet {
    pub lower: f64,
    pub upper: f64,
    pub tight_upper: Option<f64>,
    pub j_values: Option<Vec<f64>>,
}

fn check_variance(func: &'static str, s2: f64) -> Result<()> {
    if !(s2 > 0.0 && s2 <= 1.0) {
        return Err(Error::domain(func, format!("error variance {s2} not in (0, 1]")));
    }
    Ok(())
}

/// `P(R > C)` for one AP at backoff 1: `(1 - s / sqrt(4 - 3 s^2)) / 2`.
pub fn p_device_failure_a1(sigma2_e: f64) -> Result<f64> {
    check_variance("p_device_failure_a1", sigma2_e)?;
    Ok(0.5 * (1.0 - (sigma2_e / (4.0 - 3.0 * sigma2_e)).sqrt()))
}

/// `P(R > C)` with `aps` equal-SNR APs at backoff 1.
///
/// With `s = s2 / (4 - 3 s2)` and `x = (2 - s2) / sqrt(4 s2 - 3 s2^2)`:
///
/// ```text
/// 1/2 - s^{A/2} [ P_{A-1}(x) / 2 + sum_{k=1}^{A-1} (A+k-1)!/(A-1)! |P_{A-1}^{-k}(x)| ]
/// ```
pub fn p_device_failure(sigma2_e: f64, aps: u32) -> Result<f64> {
    check_variance("p_device_failure", sigma2_e)?;
    if aps == 0 {
        return Err(Error::domain("p_device_failure", "need at least one AP"));
    }
    if sigma2_e == 1.0 {
        return Ok(0.0);
    }
    let s = sigma2_e / (4.0 - 3.0 * sigma2_e);
    let x = (2.0 - sigma2_e) / (4.0 * sigma2_e - 3.0 * sigma2_e * sigma2_e).sqrt();
    let n = aps - 1;
    let mut bracket = 0.5 * on_cut(n, 0, x).abs();
    let mut rising = 1.0;
    for k in 1..aps {
        // (A+k-1)!/(A-1)! built up one factor at a time
        rising *= (n + k) as f64;
        bracket += rising * on_cut(n, -(k as i32), x).abs();
    }
    Ok((0.5 - s.powf(0.5 * aps as f64) * bracket).max(0.0))
}

/// Failure probability given the estimate norm: `1 - Q_A(c, c)` with
/// `c = sqrt(2) |h_hat| / s`.
pub fn p_device_failure_given_estimate(h_hat_norm: f64, sigma2_e: f64, aps: u32) -> Result<f64> {
    check_variance("p_device_failure_given_estimate", sigma2_e)?;
    let c = std::f64::consts::SQRT_2 * h_hat_norm / sigma2_e.sqrt();
    Ok(1.0 - marcum_q(aps, c, c)?)
}

/// `1 - prod(1 - p_d)`.
pub fn p_transmission_error(p_df: &[f64]) -> Result<f64> {
    if p_df.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::domain("p_transmission_error", "probabilities must lie in [0, 1]"));
    }
    let survive: f64 = p_df.iter().map(|p| 1.0 - p).product();
    Ok(1.0 - survive)
}

fn check_deadline(func: &'static str, y: f64, g: f64) -> Result<()> {
    if !(y > 0.0) || !(g > 0.0) {
        return Err(Error::domain(func, format!("need y > 0 and G > 0, got ({y}, {g})")));
    }
    Ok(())
}

/// CDF of one normalized airtime: `exp(-G (2^{1/y} - 1))`.
pub fn scaled_airtime_cdf(y: f64, g: f64) -> Result<f64> {
    check_deadline("scaled_airtime_cdf", y, g)?;
    Ok((-g * (LN_2 / y).exp_m1()).exp())
}

/// Density of one normalized airtime.
pub fn scaled_airtime_pdf(y: f64, g: f64) -> Result<f64> {
    check_deadline("scaled_airtime_pdf", y, g)?;
    let e = LN_2 / y;
    let log_f = g.ln() + LN_2.ln() + e - g * e.exp_m1() - 2.0 * y.ln();
    Ok(if log_f.is_nan() { 0.0 } else { log_f.exp() })
}

/// `c (w(v) - c)` rewritten as `c expm1(ln2^2 / (y^2 ln(v/c)))`, the excess
/// of the second airtime threshold over `c = 2^{1/y}` when the first device
/// has `1 + X_1 = v`. Infinite while `v <= c`.
fn threshold_excess(v: f64, y: f64, c: f64) -> f64 {
    let q = ((v - c) / c).ln_1p();
    if !(q > 0.0) {
        return f64::INFINITY;
    }
    let e = LN_2 * LN_2 / (y * y * q);
    if e > 700.0 {
        f64::INFINITY
    } else {
        c * e.exp_m1()
    }
}

/// Exact `P(Y_1 + Y_2 <= y)` for two devices with the same NSR `g`.
///
/// Conditioning on the first device and substituting `v = c + u/G`:
/// `P = F(y)^2 int_0^inf exp(-u - G c expm1(...)) du` with `F` the single
/// airtime CDF.
pub fn time_underflow_exact_d2(y: f64, g: f64) -> Result<f64> {
    check_deadline("time_underflow_exact_d2", y, g)?;
    let f = scaled_airtime_cdf(y, g)?;
    if f == 0.0 {
        return Ok(0.0);
    }
    let c = (LN_2 / y).exp();
    let integrand = |u: f64| {
        let z = g * threshold_excess(c + u / g, y, c);
        if z.is_infinite() {
            0.0
        } else {
            (-u - z).exp()
        }
    };
    let q = Quadrature::new(1e-15, 1e-11, 4000)?;
    Ok(f * f * integrate(integrand, 0.0, f64::INFINITY, &q)?)
}

/// Loose bracket on `P(sum Y_d <= y)`:
/// `exp(-D G_bar (2^{D/y} - 1)) <= P <= exp(-D G_bar (2^{1/y} - 1))`.
pub fn time_underflow_bounds(y: f64, nsr: &NsrProfile) -> Result<BoundSet> {
    check_deadline("time_underflow_bounds", y, nsr.g_bar())?;
    let total = nsr.len() as f64 * nsr.g_bar();
    let lower = (-total * (nsr.len() as f64 * LN_2 / y).exp_m1()).exp();
    let upper = (-total * (LN_2 / y).exp_m1()).exp();
    Ok(BoundSet {
        lower,
        upper,
        tight_upper: None,
        j_values: None,
    })
}

/// The function maximized for `J_d`: `ln(1 - exp(-G' (w(v) - c))) / (c - v)`
/// with `G'` the summed NSR of the devices already included.
pub fn tight_objective(v: f64, y: f64, g_prev: f64) -> f64 {
    let c = (LN_2 / y).exp();
    let z = g_prev * threshold_excess(v, y, c);
    if z.is_infinite() {
        return 0.0;
    }
    let log_term = if z < LN_2 { (-(-z).exp_m1()).ln() } else { (-(-z).exp()).ln_1p() };
    log_term / (c - v)
}

/// Loose bracket plus the tightened upper bound
/// `exp(-D G_bar (2^{1/y} - 1)) prod_{d>=2} J_d / (J_d + G_d)`.
pub fn time_underflow_tight(y: f64, nsr: &NsrProfile) -> Result<BoundSet> {
    if nsr.len() < 2 {
        return Err(Error::domain("time_underflow_tight", "needs at least two devices"));
    }
    let mut set = time_underflow_bounds(y, nsr)?;
    let c = (LN_2 / y).exp();
    let lo = c * (1.0 + 1e-6);
    let mut j_values = Vec::with_capacity(nsr.len() - 1);
    let mut factor = 1.0;
    let mut g_prev = nsr.g()[0];
    for &g_d in &nsr.g()[1..] {
        let (_, j) = maximize_1d(|v| tight_objective(v, y, g_prev), lo)?;
        factor *= j / (j + g_d);
        j_values.push(j);
        g_prev += g_d;
    }
    set.tight_upper = Some(set.upper * factor);
    set.j_values = Some(j_values);
    Ok(set)
}

/// `prod P(R_d <= thr) <= P(TO) <= 1 - prod P(R_d > thr)` from per-device
/// `(P(R_d <= thr), P(R_d > thr))` pairs.
pub fn time_overflow_sandwich(pairs: &[(f64, f64)]) -> Result<BoundSet> {
    let mut lower = 1.0;
    let mut all_above = 1.0;
    for &(le, gt) in pairs {
        if !(0.0..=1.0).contains(&le) || !(0.0..=1.0).contains(&gt) || (le + gt - 1.0).abs() > 1e-12 {
            return Err(Error::domain(
                "time_overflow_sandwich",
                format!("({le}, {gt}) is not a complementary pair"),
            ));
        }
        lower *= le;
        all_above *= gt;
    }
    Ok(BoundSet {
        lower,
        upper: 1.0 - all_above,
        tight_upper: None,
        j_values: None,
    })
}

/// `(P(R <= rate), P(R > rate))` for `R = beta W log2(1 + rho |h_hat|^2)` with
/// `aps` equal-SNR APs, where `|h_hat|^2` is Gamma(A, 1 - s2).
pub fn rate_cdf_equal_snr(rate: f64, aps: u32, rho: f64, sigma2_e: f64, beta: f64, bandwidth: f64) -> Result<(f64, f64)> {
    if aps == 0 || !(rho > 0.0) || !(0.0..=1.0).contains(&sigma2_e) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain("rate_cdf_equal_snr", "invalid arguments"));
    }
    if beta == 0.0 || sigma2_e == 1.0 {
        // the selected rate is identically zero
        return Ok(if rate >= 0.0 { (1.0, 0.0) } else { (0.0, 1.0) });
    }
    if rate <= 0.0 {
        return Ok((0.0, 1.0));
    }
    let x = (rate * LN_2 / (beta * bandwidth)).exp_m1() / (rho * (1.0 - sigma2_e));
    let gamma = Gamma::new(aps as f64, 1.0).map_err(|e| Error::domain("rate_cdf_equal_snr", e.to_string()))?;
    Ok((gamma.cdf(x), gamma.sf(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ap_failure_values() {
        assert_eq!(p_device_failure_a1(1.0).unwrap(), 0.0);
        assert!((p_device_failure_a1(1e-14).unwrap() - 0.5).abs() < 1e-7);
        let want = 0.5 * (1.0 - 0.5f64.sqrt() / 2.5f64.sqrt());
        assert!((p_device_failure_a1(0.5).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.27639).abs() < 1e-5);
        assert!(p_device_failure_a1(0.0).is_err());
        assert!(p_device_failure_a1(1.2).is_err());
    }

    #[test]
    fn single_ap_failure_slope() {
        // d/ds of the closed form is -s^{-1/2} (4 - 3s)^{-3/2}
        for &s in &[0.05, 0.2, 0.5, 0.9] {
            let h = 1e-6;
            let fd = (p_device_failure_a1(s + h).unwrap() - p_device_failure_a1(s - h).unwrap()) / (2.0 * h);
            let exact = -1.0 / (s.sqrt() * (4.0 - 3.0 * s).powf(1.5));
            assert!((fd - exact).abs() < 1e-6, "s={s}: {fd} vs {exact}");
        }
    }

    #[test]
    fn multi_ap_failure_reduces_to_single_ap() {
        for i in 1..=50 {
            let s = i as f64 / 50.0;
            let a = p_device_failure(s, 1).unwrap();
            let b = p_device_failure_a1(s).unwrap();
            assert!((a - b).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn two_ap_failure_matches_corrected_closed_form() {
        // 1/2 - s (6 - 5 s^2) / (2 (4 - 3 s^2)^{3/2}) with s the error std
        for &s2 in &[0.05f64, 0.2, 0.5, 0.75, 0.95] {
            let s = s2.sqrt();
            let want = 0.5 - s * (6.0 - 5.0 * s2) / (2.0 * (4.0 - 3.0 * s2).powf(1.5));
            let got = p_device_failure(s2, 2).unwrap();
            assert!((got - want).abs() < 1e-13, "s2={s2}: {got} vs {want}");
        }
    }

    #[test]
    fn failure_probability_range_and_limits() {
        for a in 1..=6 {
            assert_eq!(p_device_failure(1.0, a).unwrap(), 0.0);
            let mut prev = 0.5;
            for i in 1..40 {
                let p = p_device_failure(i as f64 / 40.0, a).unwrap();
                assert!((0.0..0.5).contains(&p));
                assert!(p <= prev + 1e-15, "A={a} not decreasing");
                prev = p;
            }
        }
        assert!(p_device_failure(0.5, 0).is_err());
    }

    #[test]
    fn conditional_failure_limits() {
        // a vanishing estimate never overshoots
        assert!(p_device_failure_given_estimate(0.0, 0.5, 2).unwrap().abs() < 1e-15);
        let p = p_device_failure_given_estimate(3.0, 0.01, 1).unwrap();
        assert!(p > 0.4 && p < 0.6, "{p}");
    }

    #[test]
    fn transmission_error_values() {
        assert_eq!(p_transmission_error(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(p_transmission_error(&[0.37]).unwrap(), 0.37);
        assert!((p_transmission_error(&[0.1, 0.2]).unwrap() - 0.28).abs() < 1e-15);
        assert!((p_transmission_error(&[0.2, 0.1]).unwrap() - 0.28).abs() < 1e-15);
        assert!(p_transmission_error(&[1.5]).is_err());
    }

    #[test]
    fn airtime_density_integrates_to_cdf() {
        let q = Quadrature::default();
        for &g in &[0.05, 0.3, 2.0] {
            for &y in &[0.5, 1.0, 3.0] {
                let cdf = scaled_airtime_cdf(y, g).unwrap();
                let int = integrate(|t| scaled_airtime_pdf(t, g).unwrap(), 0.0, y, &q).unwrap();
                assert!((cdf - int).abs() < 1e-8, "y={y} g={g}: {cdf} vs {int}");
            }
        }
        assert!(scaled_airtime_cdf(1e9, 0.1).unwrap() > 1.0 - 1e-9);
        assert_eq!(scaled_airtime_cdf(1e-3, 0.1).unwrap(), 0.0);
        assert_eq!(scaled_airtime_pdf(1e-3, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn exact_two_device_value_limits_and_bracket() {
        assert!((time_underflow_exact_d2(1e7, 0.1).unwrap() - 1.0).abs() < 1e-6);
        assert!(time_underflow_exact_d2(0.01, 0.1).unwrap() < 1e-300);
        let v = time_underflow_exact_d2(2.0, 0.1).unwrap();
        let lo = (-0.2 * (2f64.powf(1.0) - 1.0)).exp();
        let hi = (-0.2 * (2f64.powf(0.5) - 1.0)).exp();
        assert!(lo <= v && v <= hi, "{lo} <= {v} <= {hi}");
        assert!((lo - 0.8187).abs() < 1e-4 && (hi - 0.9204).abs() < 1e-4);
    }

    #[test]
    fn exact_two_device_value_matches_convolution() {
        // independent route: integrate F(y - t) f(t) over the first airtime
        let q = Quadrature::new(1e-14, 1e-10, 4000).unwrap();
        for &(y, g) in &[(1.0, 0.1), (2.0, 0.5), (4.0, 0.05)] {
            let conv = integrate(
                |t| scaled_airtime_pdf(t, g).unwrap() * scaled_airtime_cdf(y - t, g).unwrap_or(0.0),
                0.0,
                y,
                &q,
            )
            .unwrap();
            let exact = time_underflow_exact_d2(y, g).unwrap();
            assert!((conv - exact).abs() < 1e-8, "y={y} g={g}: {conv} vs {exact}");
        }
    }

    #[test]
    fn loose_bounds_properties() {
        let one = NsrProfile::equal(1, 0.2).unwrap();
        let b = time_underflow_bounds(1.5, &one).unwrap();
        assert_eq!(b.lower, b.upper);
        assert!((b.upper - scaled_airtime_cdf(1.5, 0.2).unwrap()).abs() < 1e-15);

        let two = NsrProfile::equal(2, 0.1).unwrap();
        let b = time_underflow_bounds(2.0, &two).unwrap();
        assert!((b.lower - (-0.2f64 * 1.0).exp()).abs() < 1e-15);
        assert!((b.upper - (-0.2 * (2f64.sqrt() - 1.0)).exp()).abs() < 1e-15);

        let far = time_underflow_bounds(1e9, &NsrProfile::equal(5, 0.3).unwrap()).unwrap();
        assert!(far.lower > 1.0 - 1e-6 && far.upper > 1.0 - 1e-6);

        // unequal NSRs enter only through their mean
        let mixed = NsrProfile::new(vec![0.1, 0.3]).unwrap();
        let same = NsrProfile::equal(2, 0.2).unwrap();
        assert_eq!(time_underflow_bounds(1.0, &mixed).unwrap(), time_underflow_bounds(1.0, &same).unwrap());
    }

    #[test]
    fn objective_maximizer_matches_grid_scan() {
        let (y, g) = (2.0, 0.1);
        let c = 2f64.sqrt();
        let (v_star, j) = maximize_1d(|v| tight_objective(v, y, g), c * (1.0 + 1e-6)).unwrap();
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut v = c + 1e-4;
        while v < c + 200.0 {
            let val = tight_objective(v, y, g);
            if val > best.1 {
                best = (v, val);
            }
            v += 1e-4;
        }
        assert!((v_star - best.0).abs() < 2e-4, "{v_star} vs {}", best.0);
        // a grid sample can only undershoot the true maximum, by O(step^2)
        assert!(j >= best.1 - 1e-12 && j - best.1 < 1e-6, "{j} vs {}", best.1);
        assert_eq!(j, tight_objective(v_star, y, g));
    }

    #[test]
    fn tight_bound_never_exceeds_loose_upper() {
        for &y in &[0.5, 1.0, 2.0, 5.0] {
            for g in [vec![0.1, 0.1], vec![0.05, 0.3, 0.2], vec![0.02; 6]] {
                let nsr = NsrProfile::new(g).unwrap();
                let b = time_underflow_tight(y, &nsr).unwrap();
                let t = b.tight_upper.unwrap();
                assert!(t <= b.upper && t >= 0.0);
                assert_eq!(b.j_values.as_ref().unwrap().len(), nsr.len() - 1);
            }
        }
        assert!(time_underflow_tight(1.0, &NsrProfile::equal(1, 0.1).unwrap()).is_err());
    }

    #[test]
    fn tight_bound_dominates_exact_two_device_value() {
        for &y in &[0.5, 1.0, 2.0, 4.0] {
            for &g in &[0.05, 0.1, 0.5] {
                let exact = time_underflow_exact_d2(y, g).unwrap();
                let b = time_underflow_tight(y, &NsrProfile::equal(2, g).unwrap()).unwrap();
                assert!(exact <= b.tight_upper.unwrap() * (1.0 + 1e-9), "y={y} g={g}");
                assert!(b.lower <= exact);
            }
        }
    }

    #[test]
    fn tight_factor_vanishes_with_new_device_nsr() {
        let y = 2.0;
        let tiny = NsrProfile::new(vec![0.1, 1e-12]).unwrap();
        let b = time_underflow_tight(y, &tiny).unwrap();
        assert!((b.tight_upper.unwrap() / b.upper - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sandwich_values() {
        let b = time_overflow_sandwich(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        let b = time_overflow_sandwich(&[(1.0, 0.0), (1.0, 0.0)]).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        let b = time_overflow_sandwich(&[(0.1, 0.9), (0.2, 0.8)]).unwrap();
        assert!((b.lower - 0.02).abs() < 1e-15);
        assert!((b.upper - 0.28).abs() < 1e-15);
        assert!(time_overflow_sandwich(&[(0.1, 0.8)]).is_err());
    }

    #[test]
    fn equal_snr_rate_distribution() {
        // single AP: P(R <= r) = 1 - exp(-(2^{r/(bW)} - 1) / (rho (1 - s2)))
        let (r, rho, s2, b, w) = (1.5e7, 10.0, 0.2, 0.8, 20e6);
        let (le, gt) = rate_cdf_equal_snr(r, 1, rho, s2, b, w).unwrap();
        let want = 1.0 - (-(2f64.powf(r / (b * w)) - 1.0) / (rho * (1.0 - s2))).exp();
        assert!((le - want).abs() < 1e-12);
        assert!((le + gt - 1.0).abs() < 1e-14);
        assert_eq!(rate_cdf_equal_snr(r, 3, rho, s2, 0.0, w).unwrap(), (1.0, 0.0));
        assert_eq!(rate_cdf_equal_snr(r, 3, rho, 1.0, b, w).unwrap(), (1.0, 0.0));
        // more APs push the rate up
        let (le3, _) = rate_cdf_equal_snr(r, 3, rho, s2, b, w).unwrap();
        assert!(le3 < le);
    }

    proptest::proptest! {
        #[test]
        fn bounds_monotone(y in 0.3f64..6.0, dy in 0.01f64..1.0, g in proptest::collection::vec(0.01f64..1.0, 1..6), bump in 0.0f64..0.5) {
            let nsr = NsrProfile::new(g.clone()).unwrap();
            let b0 = time_underflow_bounds(y, &nsr).unwrap();
            let b1 = time_underflow_bounds(y + dy, &nsr).unwrap();
            proptest::prop_assert!(b0.lower <= b0.upper);
            proptest::prop_assert!(b1.lower >= b0.lower && b1.upper >= b0.upper);
            let mut worse = g;
            worse[0] += bump;
            let b2 = time_underflow_bounds(y, &NsrProfile::new(worse).unwrap()).unwrap();
            proptest::prop_assert!(b2.lower <= b0.lower && b2.upper <= b0.upper);
        }
    }
}
