use serde::{Deserialize, Serialize};

use super::{check_nonneg, check_positive};
use crate::error::{invalid, Error, Result};
use crate::optimize::{golden_section, linspace};

/// Constants of the stability-based bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub m: f64,
    pub m1: f64,
    pub m2: f64,
    pub l: f64,
    pub d_diam: f64,
    pub d_star: f64,
    pub c: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self { m: 1.0, m1: 1.0, m2: 1.0, l: 1.0, d_diam: 1.0, d_star: 1.0, c: 1.0 }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("m", self.m)?;
        check_positive("m1", self.m1)?;
        check_positive("m2", self.m2)?;
        check_positive("l", self.l)?;
        check_positive("d_diam", self.d_diam)?;
        check_nonneg("d_star", self.d_star)?;
        check_nonneg("c", self.c)
    }

    /// `M1 L^2 + M2`
    pub fn xi(&self) -> f64 {
        self.m1 * self.l * self.l + self.m2
    }

    /// `M1 / m^2`
    pub fn eta(&self) -> f64 {
        self.m1 / (self.m * self.m)
    }

    /// `D^2 sqrt(M1 M2) / m`
    pub fn tau(&self) -> f64 {
        self.d_diam * self.d_diam * (self.m1 * self.m2).sqrt() / self.m
    }

    fn exponent(&self) -> f64 {
        1.0 / (self.d_star + 1.0)
    }
}

fn check_mixing(lambda: f64, n: usize) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid("lambda", format!("mixing weight must lie in (0, 1), got {lambda}")));
    }
    if n == 0 {
        return Err(invalid("n", "need at least one real sample"));
    }
    Ok(())
}

/// `R/l + C xi (eta R/(L^2 l) + tau (1-l)/(L^2 l N))^(1/(d+1))`
pub fn stability_constant(p: &BoundParams, lambda: f64, n: usize, mixed_risk: f64) -> Result<f64> {
    p.validate()?;
    check_mixing(lambda, n)?;
    check_nonneg("mixed_risk", mixed_risk)?;
    let l2 = p.l * p.l;
    let inner = p.eta() * mixed_risk / (l2 * lambda) + p.tau() * (1.0 - lambda) / (l2 * lambda * n as f64);
    Ok(mixed_risk / lambda + p.c * p.xi() * inner.powf(p.exponent()))
}

/// `l xi w^2 + C (1-l) xi (eta R*/(L^2 l) + eta xi w^2/L^2 + tau (1-l)/(L^2 l N))^(1/(d+1))`
pub fn mixed_gap_bound(p: &BoundParams, lambda: f64, n: usize, w2: f64, r_star: f64) -> Result<f64> {
    p.validate()?;
    check_mixing(lambda, n)?;
    check_nonneg("w2", w2)?;
    check_nonneg("r_star", r_star)?;
    let (xi, eta, l2) = (p.xi(), p.eta(), p.l * p.l);
    let w = w2 * w2;
    let inner = eta * r_star / (l2 * lambda) + eta * xi * w / l2 + p.tau() * (1.0 - lambda) / (l2 * lambda * n as f64);
    Ok(lambda * xi * w + p.c * (1.0 - lambda) * xi * inner.powf(p.exponent()))
}

/// `l xi a^2 + (1-l) xi b^2 + C (1-l) xi (R*/(L^2 l) + xi b^2/L^2 + tau (1-l)/(L^2 l N))^(1/(d+1))`
/// with `a` the target-synthetic and `b` the target-source distance.
pub fn domain_shift_gap_bound(
    p: &BoundParams,
    lambda: f64,
    n: usize,
    w2_target_synth: f64,
    w2_target_source: f64,
    r_star: f64,
) -> Result<f64> {
    p.validate()?;
    check_mixing(lambda, n)?;
    check_nonneg("w2_target_synth", w2_target_synth)?;
    check_nonneg("w2_target_source", w2_target_source)?;
    check_nonneg("r_star", r_star)?;
    let (xi, l2) = (p.xi(), p.l * p.l);
    let a = w2_target_synth * w2_target_synth;
    let b = w2_target_source * w2_target_source;
    let inner = r_star / (l2 * lambda) + xi * b / l2 + p.tau() * (1.0 - lambda) / (l2 * lambda * n as f64);
    Ok(lambda * xi * a + (1.0 - lambda) * xi * b + p.c * (1.0 - lambda) * xi * inner.powf(p.exponent()))
}

/// Mixing weight minimising `f` on `(0, 1)`.
///
/// Scans `points` values of the logit, then refines by golden section.
/// A minimum at either end of the scan returns [`Error::BoundarySolution`].
pub fn minimize_mixing<F: Fn(f64) -> Result<f64>>(f: F, points: usize) -> Result<(f64, f64)> {
    let logistic = |t: f64| 1.0 / (1.0 + (-t).exp());
    let g = |t: f64| f(logistic(t)).unwrap_or(f64::NAN);
    let ts = linspace(-30.0, 30.0, points.max(3));
    let vals = ts.iter().map(|&t| f(logistic(t))).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[best] {
            best = i;
        }
    }
    if best == 0 || best + 1 == ts.len() {
        return Err(Error::BoundarySolution { lambda: logistic(ts[best]), value: vals[best] });
    }
    let m = golden_section(g, ts[best - 1], ts[best + 1], 1e-10);
    Ok((logistic(m.x), m.value))
}
