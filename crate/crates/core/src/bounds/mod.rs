//! Generalization bounds, ratio planners and mixing conversions.

mod kernel;
mod stability;
mod traditional;

pub use kernel::*;
pub use stability::*;
pub use traditional::*;

use crate::error::{invalid, Result};

/// Mixing weight from a synthetic-to-real ratio: `lambda / (1 + lambda)`.
pub fn ratio_to_tilde(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || lambda.is_nan() {
        return Err(invalid("lambda", format!("ratio must be >= 0, got {lambda}")));
    }
    if lambda.is_infinite() {
        return Ok(1.0);
    }
    Ok(lambda / (1.0 + lambda))
}

/// Inverse of [`ratio_to_tilde`]: `t / (1 - t)`.
pub fn tilde_to_ratio(lambda_tilde: f64) -> Result<f64> {
    if lambda_tilde == 1.0 {
        return Err(invalid("lambda_tilde", "mixing weight 1 corresponds to an infinite ratio"));
    }
    if !(0.0..1.0).contains(&lambda_tilde) {
        return Err(invalid("lambda_tilde", format!("must lie in [0, 1), got {lambda_tilde}")));
    }
    Ok(lambda_tilde / (1.0 - lambda_tilde))
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

pub(crate) fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}
