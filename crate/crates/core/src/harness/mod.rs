//! Experiment runners: U-curve sweeps, bias-variance sweeps and bound
//! contour grids, plus their config file and CSV/JSON output.

pub mod config;
pub mod emit;

mod contour;
mod ucurve;

pub use contour::*;
pub use ucurve::*;

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `jobs` threads (0 means the rayon default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    pool.install(f)
}

/// `10^e`, exact for integral `e` in range.
pub(crate) fn pow10(e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 300.0 {
        format!("1e{}", e as i64).parse().unwrap_or_else(|_| 10f64.powf(e))
    } else {
        10f64.powf(e)
    }
}

/// `count` log-spaced values from `10^lo` to `10^hi`.
pub fn log_grid(lo_exp: f64, hi_exp: f64, count: usize) -> Vec<f64> {
    crate::optimize::linspace(lo_exp, hi_exp, count)
        .into_iter()
        .map(pow10)
        .collect()
}
