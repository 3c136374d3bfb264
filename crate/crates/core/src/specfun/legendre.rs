//! Associated Legendre functions of integer degree and order on the cut `x > 1`.
//!
//! Convention: for `0 <= m <= n`,
//!
//! ```text
//! P_n^m(x)  = (x^2 - 1)^{m/2} d^m/dx^m P_n(x)
//! P_n^-m(x) = (n - m)! / (n + m)! * P_n^m(x)
//! ```
//!
//! i.e. no Condon-Shortley phase and `(x^2 - 1)` rather than `(1 - x^2)`.
//! This is the branch for which
//! `∫_0^∞ u^n e^{-pu} I_m(au) du = (n+m)! (p^2-a^2)^{-(n+1)/2} P_n^-m(p / sqrt(p^2-a^2))`
//! holds for `p > a > 0`, and every value is non-negative.

use crate::error::{Error, Result};

/// `P_degree^order(x)` for `x > 1` and `|order| <= degree`.
pub fn assoc_legendre(degree: u32, order: i32, x: f64) -> Result<f64> {
    if !(x > 1.0) || x.is_infinite() {
        return Err(Error::domain("assoc_legendre", format!("argument {x} must lie in (1, inf)")));
    }
    if order.unsigned_abs() > degree {
        return Err(Error::domain(
            "assoc_legendre",
            format!("unsupported (degree, order) = ({degree}, {order})"),
        ));
    }
    Ok(on_cut(degree, order, x))
}

/// Same as [`assoc_legendre`] but also accepts the branch point `x = 1`.
pub(crate) fn on_cut(degree: u32, order: i32, x: f64) -> f64 {
    let n = degree;
    let m = order.unsigned_abs();
    let w = (x * x - 1.0).max(0.0).sqrt();

    // P_m^m = (2m-1)!! w^m
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= (2 * i - 1) as f64 * w;
    }
    let value = if n == m {
        pmm
    } else {
        let mut prev = pmm;
        let mut cur = x * (2 * m + 1) as f64 * pmm;
        for l in (m + 2)..=n {
            let next = ((2 * l - 1) as f64 * x * cur - (l + m - 1) as f64 * prev) / (l - m) as f64;
            prev = cur;
            cur = next;
        }
        cur
    };
    if order < 0 {
        // (n-m)!/(n+m)!
        let mut ratio = 1.0;
        for k in (n - m + 1)..=(n + m) {
            ratio /= k as f64;
        }
        value * ratio
    } else {
        value
    }
}
