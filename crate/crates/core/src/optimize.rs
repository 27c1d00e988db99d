//! One-dimensional minimisation: bracket scan followed by golden section.

use crate::error::{invalid, Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
/// Stops once the bracket is narrower than `rel_tol * max(1, |x|)`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Minimum {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..500 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= rel_tol * mid.abs().max(1.0) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        Minimum { x: c, value: fc }
    } else {
        Minimum { x: d, value: fd }
    }
}

/// Evenly spaced points on `[lo, hi]`, endpoints exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

/// Scans `points` evenly spaced values, then refines the best interior
/// bracket by golden section. A minimum on either end of the scan is
/// reported as [`Error::BoundarySolution`] with `x` mapped through `to_lambda`.
pub fn scan_then_golden<F, G>(
    f: F,
    lo: f64,
    hi: f64,
    points: usize,
    rel_tol: f64,
    to_lambda: G,
) -> Result<Minimum>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if points < 3 || !(lo < hi) {
        return Err(invalid("points", "need at least 3 scan points on a nonempty interval"));
    }
    let xs = linspace(lo, hi, points);
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    if let Some(bad) = vals.iter().find(|v| v.is_nan()) {
        return Err(Error::Numeric(format!("objective returned {bad}")));
    }
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[best] {
            best = i;
        }
    }
    if best == 0 || best + 1 == points {
        return Err(Error::BoundarySolution {
            lambda: to_lambda(xs[best]),
            value: vals[best],
        });
    }
    Ok(golden_section(&f, xs[best - 1], xs[best + 1], rel_tol))
}

/// Bisection on the sign of `df` over a bracket where it changes sign.
pub fn bisect_sign<F: Fn(f64) -> f64>(df: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = df(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = df(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
