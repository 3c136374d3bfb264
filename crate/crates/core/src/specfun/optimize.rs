use crate::error::{Error, Result};

const SCAN_FACTOR: f64 = 1.15;
const SCAN_POINTS: usize = 420;
const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Maximizes `g` over the open half-line `(lo, +∞)`.
///
/// The search first scans geometrically spaced offsets from `lo` (relative
/// spacing 15%, spanning roughly 1e-9 to 1e16 times `max(1, |lo|)`) to locate
/// the best sample, narrows the surrounding bracket by golden-section search
/// and finishes with bisection on the sign of a fourth-order difference slope.
/// Returns `(argmax, max)`.
pub fn maximize_1d<G: Fn(f64) -> f64>(g: G, lo: f64) -> Result<(f64, f64)> {
    if !lo.is_finite() {
        return Err(Error::Maximize(format!("lower bound {lo} is not finite")));
    }
    let scale = lo.abs().max(1.0);
    let mut xs = Vec::with_capacity(SCAN_POINTS);
    let mut h = 1e-9 * scale;
    for _ in 0..SCAN_POINTS {
        xs.push(lo + h);
        h *= SCAN_FACTOR;
    }
    let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut best = None;
    for (i, &v) in vals.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b: usize| v > vals[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::Maximize("objective is nowhere finite".into()))?;
    if !(vals[best] > 0.0) && vals.iter().all(|v| !(*v > vals[best])) && best == 0 {
        return Err(Error::Maximize("no positive interior value found".into()));
    }
    if best + 1 == xs.len() {
        return Err(Error::Maximize("objective still increasing at the end of the scan".into()));
    }
    let mut a = if best == 0 { lo } else { xs[best - 1] };
    let mut b = xs[best + 1];
    // difference step for the slope stage, tied to the scan bracket so that
    // rounding noise stays far below the truncation error
    let step = 1e-3 * (b - a);

    // golden section
    let mut x1 = a + GOLDEN * (b - a);
    let mut x2 = b - GOLDEN * (b - a);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    for _ in 0..200 {
        if b - a <= 1e-7 * (1.0 + x1.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - GOLDEN * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + GOLDEN * (b - a);
            f1 = g(x1);
        }
    }

    // slope bisection
    let slope = |x: f64| {
        let h = step.min(0.25 * (x - lo));
        (8.0 * (g(x + h) - g(x - h)) - (g(x + 2.0 * h) - g(x - 2.0 * h))) / (12.0 * h)
    };
    let mut left = a;
    let mut right = b;
    for _ in 0..200 {
        if right - left <= 1e-11 * (1.0 + left.abs()) {
            break;
        }
        let mid = 0.5 * (left + right);
        let s = slope(mid);
        if s > 0.0 {
            left = mid;
        } else if s < 0.0 {
            right = mid;
        } else {
            left = mid;
            right = mid;
        }
    }
    let x = 0.5 * (left + right);
    let fx = g(x);
    if !fx.is_finite() || x <= lo {
        return Err(Error::Maximize("refinement left the domain".into()));
    }
    Ok((x, fx))
}
