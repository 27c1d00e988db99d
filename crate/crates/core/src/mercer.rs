//! Truncated Mercer eigensystem on an interval.
//!
//! The kernel is `K(x, x') = sum_j mu_j phi_j(x) phi_j(x')` with eigenvalues
//! `mu_j = (j+1)^(-2r)` and sine eigenfunctions `phi_j(x) = sin(pi (j+1) x)`,
//! for `j = 1..=j_max`. Functions are represented by their coefficients in the
//! `phi_j` basis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smallest admissible decay exponent.
pub const MIN_DECAY: f64 = 0.5;

pub const DEFAULT_DOMAIN: (f64, f64) = (0.0, 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSpec {
    r: f64,
    j_max: usize,
    domain_lo: f64,
    domain_hi: f64,
}

impl EigenSpec {
    pub fn new(r: f64, j_max: usize, domain_lo: f64, domain_hi: f64) -> Result<Self> {
        if !(r.is_finite() && r >= MIN_DECAY) {
            return Err(invalid("r", format!("decay exponent must be >= {MIN_DECAY}, got {r}")));
        }
        if j_max == 0 {
            return Err(invalid("j_max", "truncation order must be at least 1"));
        }
        if !(domain_lo.is_finite() && domain_hi.is_finite() && domain_lo < domain_hi) {
            return Err(invalid(
                "domain",
                format!("need lo < hi, got [{domain_lo}, {domain_hi}]"),
            ));
        }
        Ok(Self {
            r,
            j_max,
            domain_lo,
            domain_hi,
        })
    }

    /// Spec on the default interval `[0, 3]`.
    pub fn on_default_domain(r: f64, j_max: usize) -> Result<Self> {
        Self::new(r, j_max, DEFAULT_DOMAIN.0, DEFAULT_DOMAIN.1)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.domain_lo && x <= self.domain_hi
    }

    /// `mu_j = (j+1)^(-2r)`, 1-based `j`. Not range checked.
    #[inline]
    pub fn eigenvalue(&self, j: usize) -> f64 {
        ((j + 1) as f64).powf(-2.0 * self.r)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.j_max).map(|j| self.eigenvalue(j)).collect()
    }

    /// Sum of eigenvalues beyond the truncation order, up to `extended`.
    pub fn tail_mass(&self, extended: usize) -> f64 {
        (self.j_max + 1..=extended).map(|j| self.eigenvalue(j)).sum()
    }

    fn check_point(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(invalid(
                "x",
                format!(
                    "{x} outside domain [{}, {}]",
                    self.domain_lo, self.domain_hi
                ),
            ))
        }
    }

    /// `phi_j(x) = sin(pi (j+1) x)`.
    pub fn basis_eval(&self, j: usize, x: f64) -> Result<f64> {
        if j == 0 || j > self.j_max {
            return Err(invalid("j", format!("index {j} outside 1..={}", self.j_max)));
        }
        self.check_point(x)?;
        Ok(basis(j, x))
    }

    /// Kernel value `K(x, y)`.
    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        (1..=self.j_max)
            .map(|j| self.eigenvalue(j) * basis(j, x) * basis(j, y))
            .sum()
    }

    /// `N x N` kernel matrix over `xs`.
    pub fn kernel_matrix(&self, xs: &[f64]) -> DMatrix<f64> {
        let features = self.weighted_features(xs);
        let (sqrt_mu, phi) = features;
        let scaled = DMatrix::from_fn(phi.nrows(), phi.ncols(), |i, j| phi[(i, j)] * sqrt_mu[j]);
        let mut k = &scaled * scaled.transpose();
        // exact symmetry regardless of summation order
        for i in 0..k.nrows() {
            for j in 0..i {
                let v = 0.5 * (k[(i, j)] + k[(j, i)]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Cross-kernel matrix with rows indexed by `rows` and columns by `cols`.
    pub fn cross_kernel(&self, rows: &[f64], cols: &[f64]) -> DMatrix<f64> {
        let (_, a) = self.weighted_features(rows);
        let (_, b) = self.weighted_features(cols);
        let mu = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues()));
        &a * mu * b.transpose()
    }

    fn weighted_features(&self, xs: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let sqrt_mu: Vec<f64> = self.eigenvalues().iter().map(|m| m.sqrt()).collect();
        let phi = DMatrix::from_fn(xs.len(), self.j_max, |i, j| basis(j + 1, xs[i]));
        (sqrt_mu, phi)
    }
}

#[inline]
pub(crate) fn basis(j: usize, x: f64) -> f64 {
    (PI * (j + 1) as f64 * x).sin()
}

/// A function `sum_j c_j phi_j` with finitely many coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFunction {
    coeffs: Vec<f64>,
    spec: EigenSpec,
}

impl SeriesFunction {
    pub fn new(spec: EigenSpec, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() > spec.j_max {
            return Err(invalid(
                "coeffs",
                format!("{} coefficients exceed j_max = {}", coeffs.len(), spec.j_max),
            ));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(invalid("coeffs", format!("non-finite coefficient {bad}")));
        }
        Ok(Self { coeffs, spec })
    }

    pub fn zero(spec: EigenSpec) -> Self {
        Self {
            coeffs: Vec::new(),
            spec,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn spec(&self) -> &EigenSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient `c_j` (1-based), zero past the stored length.
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j.wrapping_sub(1)).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.spec.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * basis(i + 1, x))
            .sum()
    }

    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// Coefficient-wise `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &SeriesFunction) -> Result<SeriesFunction> {
        if self.spec != other.spec {
            return Err(invalid("spec", "series functions use different eigensystems"));
        }
        let len = self.len().max(other.len());
        let coeffs = (1..=len)
            .map(|j| self.coeff(j) + scale * other.coeff(j))
            .collect();
        SeriesFunction::new(self.spec, coeffs)
    }

    pub fn scaled(&self, a: f64) -> SeriesFunction {
        SeriesFunction {
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
            spec: self.spec,
        }
    }
}

/// Coefficients `c_j = (j+1)^(-r s)` for `j = 1..=t`.
pub fn make_series(spec: &EigenSpec, s: f64, t: usize) -> Result<SeriesFunction> {
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid("s", format!("smoothness must be positive, got {s}")));
    }
    if t == 0 || t > spec.j_max {
        return Err(invalid("T", format!("truncation {t} outside 1..={}", spec.j_max)));
    }
    let coeffs = (1..=t)
        .map(|j| ((j + 1) as f64).powf(-spec.r * s))
        .collect();
    SeriesFunction::new(*spec, coeffs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub sigma2: f64,
    pub seed: u64,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// Noise stream for replicate `stream` of a run seeded with `seed`.
/// Stream 0 is reserved for [`sample_training_set`].
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn gaussian_noise(rng: &mut ChaCha8Rng, n: usize, sigma2: f64) -> Vec<f64> {
    let sd = sigma2.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sd * z
        })
        .collect()
}

/// Draws `n` inputs uniformly on the domain and observes `f` with Gaussian
/// noise of variance `sigma2`.
pub fn sample_training_set(
    f: &SeriesFunction,
    n: usize,
    sigma2: f64,
    seed: u64,
) -> Result<TrainingSet> {
    if n == 0 {
        return Err(invalid("N", "need at least one sample"));
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(invalid("sigma2", format!("variance must be >= 0, got {sigma2}")));
    }
    let (lo, hi) = f.spec.domain();
    let mut rng = rng_for(seed, 0);
    let uniform = Uniform::new_inclusive(lo, hi).map_err(|e| invalid("domain", e.to_string()))?;
    let xs: Vec<f64> = (0..n).map(|_| rng.sample(uniform)).collect();
    let noise = gaussian_noise(&mut rng, n, sigma2);
    let ys = xs
        .iter()
        .zip(&noise)
        .map(|(&x, e)| {
            let fx = f.eval_unchecked(x);
            if sigma2 == 0.0 {
                fx
            } else {
                fx + e
            }
        })
        .collect();
    Ok(TrainingSet {
        xs,
        ys,
        sigma2,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(r: f64, j_max: usize) -> EigenSpec {
        EigenSpec::on_default_domain(r, j_max).unwrap()
    }

    #[test]
    fn rejects_small_decay_and_bad_domain() {
        assert!(EigenSpec::on_default_domain(0.49, 10).is_err());
        assert!(EigenSpec::on_default_domain(0.5, 0).is_err());
        assert!(EigenSpec::new(1.0, 10, 3.0, 3.0).is_err());
    }

    #[test]
    fn basis_values() {
        let s = spec(2.0, 10);
        assert_eq!(s.basis_eval(1, 0.0).unwrap(), 0.0);
        assert_relative_eq!(s.basis_eval(1, 0.25).unwrap(), 1.0, epsilon = 1e-15);
        // sin(4 pi / 3)
        assert_relative_eq!(
            s.basis_eval(3, 1.0 / 3.0).unwrap(),
            -0.866_025_403_784_438_6,
            epsilon = 1e-12
        );
        assert!(s.basis_eval(0, 0.5).is_err());
        assert!(s.basis_eval(11, 0.5).is_err());
        assert!(s.basis_eval(1, 3.5).is_err());
    }

    #[test]
    fn eigenvalues_strictly_decrease() {
        let mu = spec(0.5, 200).eigenvalues();
        assert!(mu.windows(2).all(|w| w[0] > w[1] && w[1] > 0.0));
    }

    #[test]
    fn make_series_values() {
        let f = make_series(&spec(2.0, 10), 0.8, 1).unwrap();
        assert_relative_eq!(f.coeffs()[0], 2f64.powf(-1.6), max_relative = 1e-14);
        assert_relative_eq!(f.coeffs()[0], 0.329_876_977_693_223_6, max_relative = 1e-12);
        let g = make_series(&spec(2.0, 10), 1.5, 10).unwrap();
        assert_relative_eq!(g.coeffs()[9], 11f64.powi(-3), max_relative = 1e-14);
        assert!(make_series(&spec(2.0, 10), 1.5, 11).is_err());
        assert!(make_series(&spec(2.0, 10), 1.5, 0).is_err());
        let sharp = make_series(&spec(1.0, 5), 100.0, 5).unwrap();
        assert!(sharp.coeffs().iter().all(|&c| c <= 2f64.powf(-100.0)));
    }

    #[test]
    fn series_eval_matches_extended_precision_sum() {
        // term-by-term sum at 40 digits, r = 2, s = 0.8, T = 100, x = 0.5
        let f = make_series(&spec(2.0, 100), 0.8, 100).unwrap();
        assert_relative_eq!(
            f.eval(0.5).unwrap(),
            -0.123_005_486_899_291_475_453_377_662_854_460_3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn series_eval_basics() {
        let s = spec(2.0, 10);
        let zero = SeriesFunction::new(s, vec![0.0; 5]).unwrap();
        assert_eq!(zero.eval(1.3).unwrap(), 0.0);
        let one = SeriesFunction::new(s, vec![1.0]).unwrap();
        assert_relative_eq!(one.eval(0.25).unwrap(), 1.0, epsilon = 1e-15);
        assert!(SeriesFunction::new(s, vec![0.0; 11]).is_err());
        assert!(SeriesFunction::new(s, vec![f64::NAN]).is_err());
    }

    #[test]
    fn kernel_matrix_edge_cases() {
        let s = spec(2.0, 20);
        let k = s.kernel_matrix(&[0.0]);
        assert_eq!(k[(0, 0)], 0.0);
        let k = s.kernel_matrix(&[0.7, 0.7]);
        assert_eq!(k[(0, 0)], k[(0, 1)]);
        assert_eq!(k[(1, 0)], k[(1, 1)]);
    }

    #[test]
    fn kernel_matrix_matches_double_loop() {
        let s = spec(2.0, 100);
        let xs: Vec<f64> = (0..5).map(|i| 3.0 * i as f64 / 4.0).collect();
        let k = s.kernel_matrix(&xs);
        for (a, &xa) in xs.iter().enumerate() {
            for (b, &xb) in xs.iter().enumerate() {
                let mut acc = 0.0;
                for j in 1..=100 {
                    let mu = ((j + 1) as f64).powf(-4.0);
                    acc += mu * (PI * (j + 1) as f64 * xa).sin() * (PI * (j + 1) as f64 * xb).sin();
                }
                assert!((k[(a, b)] - acc).abs() <= 1e-12, "entry ({a},{b})");
            }
        }
    }

    #[test]
    fn kernel_matrix_is_numerically_psd() {
        let s = spec(1.0, 60);
        let f = make_series(&s, 1.0, 10).unwrap();
        let t = sample_training_set(&f, 25, 0.0, 3).unwrap();
        let k = s.kernel_matrix(&t.xs);
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                assert!((k[(i, j)] - k[(j, i)]).abs() <= 1e-14);
            }
        }
        let eig = k.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10 * k.trace());
    }

    #[test]
    fn truncation_tail_bound() {
        let s = spec(2.0, 100);
        let wide = spec(2.0, 200);
        let xs = [0.1, 0.77, 1.5, 2.2, 2.95];
        let a = s.kernel_matrix(&xs);
        let b = wide.kernel_matrix(&xs);
        let tail = s.tail_mass(200);
        assert!((a - b).amax() <= tail + 1e-15);
    }

    #[test]
    fn cross_kernel_agrees_with_pointwise() {
        let s = spec(1.5, 30);
        let k = s.cross_kernel(&[0.2, 1.1], &[0.5, 2.0, 2.9]);
        assert_relative_eq!(k[(1, 2)], s.kernel(1.1, 2.9), epsilon = 1e-14);
    }

    #[test]
    fn sampling_noiseless_and_deterministic() {
        let s = spec(2.0, 100);
        let f = make_series(&s, 0.8, 100).unwrap();
        let t = sample_training_set(&f, 15, 0.0, 7).unwrap();
        for (x, y) in t.xs.iter().zip(&t.ys) {
            assert_eq!(*y, f.eval(*x).unwrap());
            assert!(s.contains(*x));
        }
        let a = sample_training_set(&f, 15, 0.1, 42).unwrap();
        let b = sample_training_set(&f, 15, 0.1, 42).unwrap();
        assert_eq!(a, b);
        assert!(sample_training_set(&f, 0, 0.1, 42).is_err());
        assert!(sample_training_set(&f, 3, -0.1, 42).is_err());
    }

    #[test]
    fn sampling_noise_variance() {
        let s = spec(2.0, 20);
        let f = make_series(&s, 0.8, 20).unwrap();
        let t = sample_training_set(&f, 10_000, 0.1, 11).unwrap();
        let resid: Vec<f64> = t
            .xs
            .iter()
            .zip(&t.ys)
            .map(|(x, y)| y - f.eval(*x).unwrap())
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((0.09..=0.11).contains(&var), "sample variance {var}");
    }

    proptest! {
        #[test]
        fn series_eval_is_linear(
            a in proptest::collection::vec(-2.0f64..2.0, 1..20),
            b in proptest::collection::vec(-2.0f64..2.0, 1..20),
            x in 0.0f64..3.0,
        ) {
            let s = spec(1.0, 20);
            let fa = SeriesFunction::new(s, a).unwrap();
            let fb = SeriesFunction::new(s, b).unwrap();
            let sum = fa.axpy(1.0, &fb).unwrap();
            let lhs = sum.eval(x).unwrap();
            let rhs = fa.eval(x).unwrap() + fb.eval(x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}
