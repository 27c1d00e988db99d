use serde::{Deserialize, Serialize};

use super::{check_nonneg, check_positive, ratio_to_tilde};
use crate::error::{invalid, Error, Result};
use crate::optimize::{bisect_sign, scan_then_golden};

/// Search interval for numeric planners, in natural log of lambda.
pub const LOG_LAMBDA_RANGE: (f64, f64) = (-12.0, 12.0);
pub const PLANNER_REL_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 241;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundInputs {
    pub n: usize,
    pub r: f64,
    pub sigma2: f64,
    pub d_gen: f64,
    #[serde(default)]
    pub d_shift: f64,
}

impl KernelBoundInputs {
    pub fn new(n: usize, r: f64, sigma2: f64, d_gen: f64, d_shift: f64) -> Result<Self> {
        let v = Self { n, r, sigma2, d_gen, d_shift };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "need at least one real sample"));
        }
        if !(self.r.is_finite() && self.r >= 0.5) {
            return Err(invalid("r", format!("decay exponent must be >= 0.5, got {}", self.r)));
        }
        check_nonneg("sigma2", self.sigma2)?;
        check_nonneg("d", self.d_gen)?;
        check_nonneg("d_shift", self.d_shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    ClosedForm,
    Numeric,
}

/// Which closed form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// `(8r(D+s2) / ((8r-1) N D))^(4r/(16r+1))`
    Main,
    /// `(s2 / (N D))^(4r/(8r+1))`
    NoiseRatio,
    /// Same base as `Main` with the exponent `4r/(16r-1)` that zeroes the
    /// derivative of [`kernel_bound`].
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPlan {
    pub lambda_star: f64,
    pub m_star: f64,
    pub m_star_rounded: u64,
    pub lambda_tilde: f64,
    pub source: PlanSource,
    /// Bound value at `lambda_star`.
    pub bound_value: f64,
}

impl RatioPlan {
    fn new(inp: &KernelBoundInputs, lambda_star: f64, source: PlanSource, bound_value: f64) -> Result<Self> {
        let m_star = inp.n as f64 * lambda_star;
        Ok(Self {
            lambda_star,
            m_star,
            m_star_rounded: m_star.ceil() as u64,
            lambda_tilde: ratio_to_tilde(lambda_star)?,
            source,
            bound_value,
        })
    }
}

/// `sqrt(B(1/(2r), 2 - 1/(2r)) / (2r))`
pub fn c_r(r: f64) -> Result<f64> {
    if !(r.is_finite() && r >= 0.5) {
        return Err(invalid("r", format!("decay exponent must be >= 0.5, got {r}")));
    }
    let a = 1.0 / (2.0 * r);
    Ok((statrs::function::beta::beta(a, 2.0 - a) / (2.0 * r)).sqrt())
}

/// `(D + s2)/(N l^2) + l^(2 - 1/(4r)) D`
pub fn kernel_bound(inp: &KernelBoundInputs, lambda: f64) -> Result<f64> {
    kernel_bound_scaled(inp, lambda, 1.0)
}

/// [`kernel_bound`] with the bias term multiplied by [`c_r`].
pub fn kernel_bound_with_cr(inp: &KernelBoundInputs, lambda: f64) -> Result<f64> {
    kernel_bound_scaled(inp, lambda, c_r(inp.r)?)
}

fn kernel_bound_scaled(inp: &KernelBoundInputs, lambda: f64, c: f64) -> Result<f64> {
    inp.validate()?;
    check_positive("lambda", lambda)?;
    Ok(eval_kernel(inp, lambda, c))
}

#[inline]
fn eval_kernel(inp: &KernelBoundInputs, lambda: f64, c: f64) -> f64 {
    let n = inp.n as f64;
    (inp.d_gen + inp.sigma2) / (n * lambda * lambda)
        + c * lambda.powf(2.0 - 1.0 / (4.0 * inp.r)) * inp.d_gen
}

fn kernel_derivative(inp: &KernelBoundInputs, lambda: f64, c: f64) -> f64 {
    let n = inp.n as f64;
    let b = 2.0 - 1.0 / (4.0 * inp.r);
    -2.0 * (inp.d_gen + inp.sigma2) / (n * lambda.powi(3)) + c * b * lambda.powf(b - 1.0) * inp.d_gen
}

/// `(l^(r+1) + 1/(N l^2)) (D_shift + D_gen) + s2/(N l^2)`
pub fn domain_shift_kernel_bound(inp: &KernelBoundInputs, lambda: f64) -> Result<f64> {
    inp.validate()?;
    check_positive("lambda", lambda)?;
    Ok(eval_shift(inp, lambda))
}

#[inline]
fn eval_shift(inp: &KernelBoundInputs, lambda: f64) -> f64 {
    let n = inp.n as f64;
    let var = 1.0 / (n * lambda * lambda);
    (lambda.powf(inp.r + 1.0) + var) * (inp.d_shift + inp.d_gen) + inp.sigma2 * var
}

/// Closed-form optimal ratio. Zero discrepancy has no finite optimum.
pub fn lambda_star_closed_form(inp: &KernelBoundInputs) -> Result<RatioPlan> {
    lambda_star_closed_form_variant(inp, ClosedForm::Main)
}

pub fn lambda_star_closed_form_variant(inp: &KernelBoundInputs, form: ClosedForm) -> Result<RatioPlan> {
    inp.validate()?;
    if inp.d_gen == 0.0 {
        return Err(Error::UnboundedRegularization);
    }
    let (r, n, d, s2) = (inp.r, inp.n as f64, inp.d_gen, inp.sigma2);
    let lambda = match form {
        ClosedForm::Main => (8.0 * r * (d + s2) / ((8.0 * r - 1.0) * n * d)).powf(4.0 * r / (16.0 * r + 1.0)),
        ClosedForm::Stationary => {
            (8.0 * r * (d + s2) / ((8.0 * r - 1.0) * n * d)).powf(4.0 * r / (16.0 * r - 1.0))
        }
        ClosedForm::NoiseRatio => {
            if s2 == 0.0 {
                return Err(invalid("sigma2", "noise-ratio form needs positive noise variance"));
            }
            (s2 / (n * d)).powf(4.0 * r / (8.0 * r + 1.0))
        }
    };
    RatioPlan::new(inp, lambda, PlanSource::ClosedForm, eval_kernel(inp, lambda, 1.0))
}

/// Numeric minimiser of [`kernel_bound`] over `ln lambda` in [`LOG_LAMBDA_RANGE`].
pub fn lambda_star_numeric(inp: &KernelBoundInputs) -> Result<RatioPlan> {
    numeric_plan(inp, 1.0)
}

/// Numeric minimiser of [`kernel_bound_with_cr`].
pub fn lambda_star_numeric_with_cr(inp: &KernelBoundInputs) -> Result<RatioPlan> {
    numeric_plan(inp, c_r(inp.r)?)
}

fn numeric_plan(inp: &KernelBoundInputs, c: f64) -> Result<RatioPlan> {
    inp.validate()?;
    let (lo, hi) = LOG_LAMBDA_RANGE;
    if inp.d_gen == 0.0 {
        let lambda = hi.exp();
        return Err(Error::BoundarySolution { lambda, value: eval_kernel(inp, lambda, c) });
    }
    let m = scan_then_golden(|t| eval_kernel(inp, t.exp(), c), lo, hi, SCAN_POINTS, PLANNER_REL_TOL, f64::exp)?;
    // the derivative has a single sign change; sharpen the golden estimate on it
    let step = 4.0 * PLANNER_REL_TOL * m.x.abs().max(1.0) + (hi - lo) / SCAN_POINTS as f64;
    let (a, b) = ((m.x - step).max(lo), (m.x + step).min(hi));
    let df = |t: f64| kernel_derivative(inp, t.exp(), c);
    let t = if df(a) < 0.0 && df(b) > 0.0 { bisect_sign(df, a, b) } else { m.x };
    let lambda = t.exp();
    RatioPlan::new(inp, lambda, PlanSource::Numeric, eval_kernel(inp, lambda, c))
}

/// Numeric minimiser of [`domain_shift_kernel_bound`].
pub fn lambda_star_domain_shift(inp: &KernelBoundInputs) -> Result<RatioPlan> {
    inp.validate()?;
    let (lo, hi) = LOG_LAMBDA_RANGE;
    let m = scan_then_golden(|t| eval_shift(inp, t.exp()), lo, hi, SCAN_POINTS, PLANNER_REL_TOL, f64::exp)?;
    let lambda = m.x.exp();
    RatioPlan::new(inp, lambda, PlanSource::Numeric, m.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inputs(n: usize, r: f64, sigma2: f64, d: f64) -> KernelBoundInputs {
        KernelBoundInputs::new(n, r, sigma2, d, 0.0).unwrap()
    }

    #[test]
    fn kernel_bound_examples() {
        assert_eq!(kernel_bound(&inputs(1, 1.0, 1.0, 0.0), 1.0).unwrap(), 1.0);
        assert_relative_eq!(kernel_bound(&inputs(100, 2.0, 0.0, 1.0), 1.0).unwrap(), 1.01, epsilon = 1e-15);
        assert!(kernel_bound(&inputs(1, 1.0, 1.0, 0.0), 0.0).is_err());
        assert!(kernel_bound(&inputs(1, 1.0, 1.0, 0.0), -1.0).is_err());
        assert!(KernelBoundInputs::new(10, 0.4, 0.1, 1.0, 0.0).is_err());
        assert!(KernelBoundInputs::new(0, 1.0, 0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn c_r_closed_forms() {
        // B(1, 1) = 1 and B(1/2, 3/2) = pi / 2
        assert_relative_eq!(c_r(0.5).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(c_r(1.0).unwrap(), std::f64::consts::PI.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn c_r_matches_quadrature() {
        for r in [0.7, 2.0, 5.0] {
            let a = 1.0 / (2.0 * r);
            // integral of v^(1-a) / (1+v)^2 over (0, inf); v = t/(1-t) then 1-t = s^(1/a)
            // leaves the smooth integrand t^(1-a) / a on (0, 1)
            let steps = 200_000;
            let h = 1.0 / steps as f64;
            let mut sum = 0.0;
            for i in 0..steps {
                let s = (i as f64 + 0.5) * h;
                let t = 1.0 - s.powf(1.0 / a);
                sum += t.powf(1.0 - a) / a;
            }
            let quad = (sum * h / (2.0 * r)).sqrt();
            assert_relative_eq!(c_r(r).unwrap(), quad, max_relative = 1e-6);
        }
    }

    #[test]
    fn closed_form_frozen_value() {
        let p = lambda_star_closed_form(&inputs(15, 2.0, 0.1, 1.0)).unwrap();
        assert_relative_eq!(p.lambda_star, 0.5391584299098057975656, max_relative = 1e-14);
        assert_eq!(p.source, PlanSource::ClosedForm);
        assert_relative_eq!(p.m_star, 15.0 * p.lambda_star, max_relative = 1e-15);
        assert_eq!(p.m_star_rounded, 9);
        assert_relative_eq!(p.lambda_tilde, p.lambda_star / (1.0 + p.lambda_star), max_relative = 1e-15);
    }

    #[test]
    fn closed_form_noiseless_and_limits() {
        let r: f64 = 2.0;
        let expected = (8.0 * r / ((8.0 * r - 1.0) * 15.0)).powf(4.0 * r / (16.0 * r + 1.0));
        for d in [0.01, 1.0, 1e6] {
            let p = lambda_star_closed_form(&inputs(15, r, 0.0, d)).unwrap();
            assert_relative_eq!(p.lambda_star, expected, max_relative = 1e-14);
        }
        let mut prev = f64::INFINITY;
        for d in [0.1, 1.0, 10.0, 1e3, 1e6, 1e9] {
            let l = lambda_star_closed_form(&inputs(15, r, 0.1, d)).unwrap().lambda_star;
            assert!(l < prev && l > expected);
            prev = l;
        }
        assert_relative_eq!(prev, expected, max_relative = 1e-8);
        assert!(matches!(
            lambda_star_closed_form(&inputs(15, r, 0.1, 0.0)),
            Err(Error::UnboundedRegularization)
        ));
    }

    #[test]
    fn stationary_variant_agrees_with_numeric() {
        for (n, r, s2, d) in [(15, 2.0, 0.1, 1.0), (100, 0.5, 1.0, 3.0), (7, 4.0, 0.0, 0.2)] {
            let inp = inputs(n, r, s2, d);
            let s = lambda_star_closed_form_variant(&inp, ClosedForm::Stationary).unwrap();
            let num = lambda_star_numeric(&inp).unwrap();
            assert_relative_eq!(s.lambda_star, num.lambda_star, max_relative = 1e-9);
        }
        let a = lambda_star_closed_form_variant(&inputs(15, 2.0, 0.1, 1.0), ClosedForm::NoiseRatio).unwrap();
        assert_relative_eq!(a.lambda_star, (0.1f64 / 15.0).powf(8.0 / 17.0), max_relative = 1e-15);
    }

    #[test]
    fn numeric_zero_discrepancy_hits_upper_boundary() {
        match lambda_star_numeric(&inputs(15, 2.0, 0.1, 0.0)) {
            Err(Error::BoundarySolution { lambda, .. }) => assert_eq!(lambda, 12f64.exp()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn numeric_is_stationary_and_beats_closed_form() {
        let inp = inputs(15, 2.0, 0.1, 1.0);
        let p = lambda_star_numeric(&inp).unwrap();
        let l = p.lambda_star;
        let h = 1e-6 * l;
        let fd = (kernel_bound(&inp, l + h).unwrap() - kernel_bound(&inp, l - h).unwrap()) / (2.0 * h);
        assert!(fd.abs() <= 1e-6, "derivative {fd}");
        let cf = lambda_star_closed_form(&inp).unwrap();
        assert!(kernel_bound(&inp, l).unwrap() <= kernel_bound(&inp, cf.lambda_star).unwrap());
        assert_eq!(p.source, PlanSource::Numeric);
    }

    #[test]
    fn with_cr_moves_optimum_up() {
        let inp = inputs(15, 2.0, 0.1, 1.0);
        let plain = lambda_star_numeric(&inp).unwrap().lambda_star;
        let with = lambda_star_numeric_with_cr(&inp).unwrap().lambda_star;
        // C_r < 1 at r = 2 lightens the bias term
        assert!(c_r(2.0).unwrap() < 1.0);
        assert!(with > plain);
    }

    #[test]
    fn shift_bound_examples() {
        let z = KernelBoundInputs::new(10, 1.0, 0.3, 0.0, 0.0).unwrap();
        assert_relative_eq!(domain_shift_kernel_bound(&z, 0.5).unwrap(), 0.3 / (10.0 * 0.25), epsilon = 1e-15);
        let e = KernelBoundInputs::new(1, 1.0, 0.0, 0.5, 0.5).unwrap();
        assert_eq!(domain_shift_kernel_bound(&e, 1.0).unwrap(), 2.0);
        assert!(domain_shift_kernel_bound(&e, 0.0).is_err());
    }

    #[test]
    fn shift_bound_interior_and_monotone() {
        let inp = KernelBoundInputs::new(100, 1.0, 0.1, 1.0, 2.0).unwrap();
        let p = lambda_star_domain_shift(&inp).unwrap();
        assert!(p.lambda_star > (-12f64).exp() && p.lambda_star < 12f64.exp());
        let grid: Vec<f64> = (0..400).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 399.0)).collect();
        let best = grid.iter().map(|&l| domain_shift_kernel_bound(&inp, l).unwrap()).fold(f64::INFINITY, f64::min);
        assert!(p.bound_value <= best * (1.0 + 1e-12));
        for &l in &[1e-3, 0.1, 1.0, 10.0] {
            let base = domain_shift_kernel_bound(&inp, l).unwrap();
            let more_shift = KernelBoundInputs { d_shift: 3.0, ..inp };
            let more_gen = KernelBoundInputs { d_gen: 1.5, ..inp };
            assert!(domain_shift_kernel_bound(&more_shift, l).unwrap() > base);
            assert!(domain_shift_kernel_bound(&more_gen, l).unwrap() > base);
        }
    }

    #[test]
    fn kernel_bound_monotone_in_inputs() {
        let inp = inputs(20, 1.5, 0.2, 2.0);
        for &l in &[1e-3, 0.3, 5.0] {
            let b = kernel_bound(&inp, l).unwrap();
            assert!(kernel_bound(&KernelBoundInputs { n: 21, ..inp }, l).unwrap() < b);
            assert!(kernel_bound(&KernelBoundInputs { d_gen: 2.1, ..inp }, l).unwrap() > b);
            assert!(kernel_bound(&KernelBoundInputs { sigma2: 0.3, ..inp }, l).unwrap() > b);
        }
    }
}
