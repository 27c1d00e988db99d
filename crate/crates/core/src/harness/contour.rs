use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_grid, with_jobs};
use crate::bounds::{domain_shift_kernel_bound, kernel_bound, KernelBoundInputs};
use crate::error::{invalid, Result};
use crate::optimize::linspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourKind {
    /// Rows vary the generator discrepancy.
    InDomain,
    /// Rows vary the shift discrepancy at a fixed generator discrepancy.
    OutDomain,
}

impl ContourKind {
    pub fn y_label(&self) -> &'static str {
        match self {
            ContourKind::InDomain => "discrepancy",
            ContourKind::OutDomain => "shift_discrepancy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub kind: ContourKind,
    /// Ratio axis `M/N`, log-spaced between `10^lo` and `10^hi`.
    pub ratio_lo_exp: f64,
    pub ratio_hi_exp: f64,
    pub ratio_count: usize,
    /// Discrepancy axis, evenly spaced.
    pub d_lo: f64,
    pub d_hi: f64,
    pub d_count: usize,
    pub n: usize,
    pub r: f64,
    pub sigma2: f64,
    /// Generator discrepancy held fixed on out-of-domain grids.
    pub d_gen: f64,
    /// Largest eigenvalue of the kernel; recorded, the bounds are normalised to 1.
    pub mu_max: f64,
}

impl ContourSpec {
    pub fn new(kind: ContourKind) -> Self {
        Self {
            kind,
            ratio_lo_exp: -2.0,
            ratio_hi_exp: 2.0,
            ratio_count: 81,
            d_lo: 0.0,
            d_hi: 10.0,
            d_count: 11,
            n: 100,
            r: 1.0,
            sigma2: 1.0,
            d_gen: 1.0,
            mu_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_lo_exp < self.ratio_hi_exp) || self.ratio_count < 2 {
            return Err(invalid("ratio", "ratio axis needs lo < hi and at least 2 points"));
        }
        if !(self.d_lo >= 0.0 && self.d_lo <= self.d_hi) || self.d_count < 1 {
            return Err(invalid("d", "discrepancy axis needs 0 <= lo <= hi and at least 1 point"));
        }
        KernelBoundInputs::new(self.n, self.r, self.sigma2, self.d_gen, 0.0).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub kind: ContourKind,
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    /// `z[i][j]` at discrepancy `y_axis[i]` and ratio `x_axis[j]`.
    pub z: Vec<Vec<f64>>,
    pub meta: ContourSpec,
}

pub fn run_contour(spec: &ContourSpec, jobs: usize) -> Result<ContourGrid> {
    spec.validate()?;
    let x_axis = log_grid(spec.ratio_lo_exp, spec.ratio_hi_exp, spec.ratio_count);
    let y_axis = if spec.d_count == 1 { vec![spec.d_lo] } else { linspace(spec.d_lo, spec.d_hi, spec.d_count) };
    let z = with_jobs(jobs, || {
        y_axis
            .par_iter()
            .map(|&y| {
                let inputs = match spec.kind {
                    ContourKind::InDomain => KernelBoundInputs::new(spec.n, spec.r, spec.sigma2, y, 0.0)?,
                    ContourKind::OutDomain => KernelBoundInputs::new(spec.n, spec.r, spec.sigma2, spec.d_gen, y)?,
                };
                x_axis
                    .iter()
                    .map(|&x| match spec.kind {
                        ContourKind::InDomain => kernel_bound(&inputs, x),
                        ContourKind::OutDomain => domain_shift_kernel_bound(&inputs, x),
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ContourGrid { kind: spec.kind, x_axis, y_axis, z, meta: spec.clone() })
}

/// Number of sign changes in the forward differences of `row`, ignoring
/// exact zeros.
pub fn derivative_sign_changes(row: &[f64]) -> usize {
    let signs: Vec<bool> = row
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d != 0.0)
        .map(|d| d > 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}
