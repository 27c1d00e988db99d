use serde::{Deserialize, Serialize};

use super::{check_nonneg, check_positive};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    UseNone,
    UseAll,
    Mix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraditionalPlan {
    /// Exact minimiser of [`rho`] over `[0, 1]`.
    pub alpha_star: f64,
    /// Mixing weight prescribed by the threshold rule: 0, 1, or `alpha_star`.
    pub alpha_rule: f64,
    /// `(c Delta / (2 IPM))^(2/3)`; absent when it is infinite or undefined.
    pub n_star: Option<f64>,
    pub m_bal: f64,
    pub delta: f64,
    pub decision: Decision,
    /// `M == N`: the mixing weight does not change the sample size.
    pub degenerate: bool,
}

/// `c / sqrt((1-a) N + a M) + a IPM`
pub fn rho(alpha: f64, c: f64, n: f64, m: f64, ipm: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    check_counts(c, n, m, ipm)?;
    Ok(c / ((1.0 - alpha) * n + alpha * m).sqrt() + alpha * ipm)
}

fn check_counts(c: f64, n: f64, m: f64, ipm: f64) -> Result<()> {
    check_nonneg("c", c)?;
    check_nonneg("ipm", ipm)?;
    if !(n.is_finite() && n >= 1.0) {
        return Err(invalid("n", format!("must be >= 1, got {n}")));
    }
    if !(m.is_finite() && m >= 1.0) {
        return Err(invalid("m", format!("must be >= 1, got {m}")));
    }
    Ok(())
}

fn at_least(a: f64, b: f64) -> bool {
    a >= b * (1.0 - 4.0 * f64::EPSILON)
}

fn at_most(a: f64, b: f64) -> bool {
    a <= b * (1.0 + 4.0 * f64::EPSILON)
}

pub fn traditional_plan(c: f64, n: f64, m: f64, ipm: f64) -> Result<TraditionalPlan> {
    check_positive("c", c)?;
    check_counts(c, n, m, ipm)?;
    let delta = m - n;
    let degenerate = delta == 0.0;

    let (alpha_star, n_star) = if ipm == 0.0 {
        // more samples never hurt and cost nothing
        (if delta > 0.0 { 1.0 } else { 0.0 }, None)
    } else if delta > 0.0 {
        let ns = (c * delta / (2.0 * ipm)).powf(2.0 / 3.0);
        (((ns - n) / delta).clamp(0.0, 1.0), Some(ns))
    } else {
        (0.0, None)
    };

    let decision = if ipm == 0.0 {
        if delta >= 0.0 { Decision::UseAll } else { Decision::UseNone }
    } else if delta <= 0.0 || at_least(ipm, c / n.sqrt()) {
        Decision::UseNone
    } else if at_most(ipm, c / m.sqrt()) {
        Decision::UseAll
    } else {
        Decision::Mix
    };
    let alpha_rule = match decision {
        Decision::UseNone => 0.0,
        Decision::UseAll => 1.0,
        Decision::Mix => alpha_star,
    };

    let m_bal = if ipm == 0.0 {
        f64::INFINITY
    } else {
        let ratio = 2.0 * c / (ipm * n.sqrt());
        let q = ratio * ratio;
        if (q - 1.0).abs() <= 8.0 * f64::EPSILON { 0.0 } else { n * (q - 1.0).max(0.0) }
    };

    Ok(TraditionalPlan { alpha_star, alpha_rule, n_star, m_bal, delta, decision, degenerate })
}
