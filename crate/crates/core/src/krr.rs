//! Kernel ridge regression regularised toward a synthetic generator `g`.
//!
//! Minimises `(1/N) sum_n (y_n - f(x_n))^2 + lambda ||f - g||^2` over the
//! RKHS. Writing `g = sum_n beta_n K(., x_n) + g_perp`, the minimiser is
//! `f_N = sum_n alpha_n K(., x_n) + g_perp` with
//! `alpha = (K_N + N lambda I)^(-1) (y + N lambda beta)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mercer::{gaussian_noise, rng_for, sample_training_set, EigenSpec, SeriesFunction, TrainingSet};

/// Relative diagonal jitter, scaled by `trace(K_N) / N`.
pub const JITTER_SCALE: f64 = 1e-12;
/// Below this effective ridge `N lambda` the jitter is added to the system.
pub const JITTER_THRESHOLD: f64 = 1e-10;
/// Points in the uniform test grid.
pub const DEFAULT_TEST_GRID: usize = 500;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrrSolution {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub xs: Vec<f64>,
    pub spec: EigenSpec,
    /// The generator `g`; its component orthogonal to the kernel sections is
    /// carried into predictions.
    pub generator: SeriesFunction,
    /// `alpha - beta`, solved for directly rather than by subtraction.
    delta: Vec<f64>,
}

impl KrrSolution {
    /// Assemble a solution from given coefficients.
    pub fn from_coefficients(
        spec: EigenSpec,
        xs: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        lambda: f64,
        generator: SeriesFunction,
    ) -> Result<Self> {
        if alpha.len() != xs.len() || beta.len() != xs.len() {
            return Err(invalid("alpha", "alpha, beta and xs must have equal length"));
        }
        if *generator.spec() != spec {
            return Err(invalid("g", "generator uses a different eigensystem"));
        }
        let delta = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
        Ok(Self {
            alpha,
            beta,
            lambda,
            xs,
            spec,
            generator,
            delta,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `f_N(x) = g(x) + sum_n (alpha_n - beta_n) K(x, x_n)`, which equals
    /// `sum_n alpha_n K(x, x_n) + g_perp(x)`.
    pub fn predict(&self, x: f64) -> Result<f64> {
        let g = self.generator.eval(x)?;
        let sum: f64 = self
            .xs
            .iter()
            .zip(&self.delta)
            .map(|(&xn, d)| d * self.spec.kernel(x, xn))
            .sum();
        Ok(g + sum)
    }

    pub fn predict_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if let Some(&bad) = xs.iter().find(|&&x| !self.spec.contains(x)) {
            return Err(invalid("x", format!("{bad} outside the domain")));
        }
        let cross = self.spec.cross_kernel(xs, &self.xs);
        let delta = DVector::from_column_slice(&self.delta);
        let part = cross * delta;
        Ok(xs
            .iter()
            .zip(part.iter())
            .map(|(&x, p)| self.generator.eval_unchecked(x) + p)
            .collect())
    }

    /// Value of the fitted quadratic
    /// `(1/N)||y - K alpha||^2 + lambda (alpha - beta)^T K (alpha - beta)`.
    pub fn objective(&self, ys: &[f64], alpha: &[f64]) -> f64 {
        let k = self.spec.kernel_matrix(&self.xs);
        quadratic_objective(&k, ys, alpha, &self.beta, self.lambda)
    }

    /// Norm of the objective gradient at the fitted `alpha`.
    pub fn stationarity_residual(&self, ys: &[f64]) -> f64 {
        let k = self.spec.kernel_matrix(&self.xs);
        let n = self.xs.len() as f64;
        let a = DVector::from_column_slice(&self.alpha);
        let y = DVector::from_column_slice(ys);
        let d = DVector::from_column_slice(&self.delta);
        let grad = (&k * (&k * &a - y)) * (2.0 / n) + (&k * d) * (2.0 * self.lambda);
        grad.norm()
    }
}

/// `(1/N)||y - K a||^2 + lambda (a - b)^T K (a - b)`.
pub fn quadratic_objective(k: &DMatrix<f64>, ys: &[f64], a: &[f64], b: &[f64], lambda: f64) -> f64 {
    let n = ys.len() as f64;
    let a = DVector::from_column_slice(a);
    let r = DVector::from_column_slice(ys) - k * &a;
    let d = a - DVector::from_column_slice(b);
    r.norm_squared() / n + lambda * d.dot(&(k * &d))
}

/// Per-input-set state shared by fits at different `lambda` or noise draws.
pub(crate) struct FitContext {
    spec: EigenSpec,
    xs: Vec<f64>,
    k: DMatrix<f64>,
    jitter: f64,
    beta: DVector<f64>,
    g_at_xs: DVector<f64>,
    /// `g(xs) - K beta`
    beta_residual: DVector<f64>,
    generator: SeriesFunction,
}

impl FitContext {
    pub(crate) fn new(spec: &EigenSpec, xs: &[f64], g: &SeriesFunction) -> Result<Self> {
        if xs.is_empty() {
            return Err(invalid("N", "training set is empty"));
        }
        if g.spec() != spec {
            return Err(invalid("g", "generator uses a different eigensystem"));
        }
        if let Some(&bad) = xs.iter().find(|&&x| !spec.contains(x)) {
            return Err(invalid("xs", format!("{bad} outside the domain")));
        }
        let n = xs.len();
        let k = spec.kernel_matrix(xs);
        let jitter = JITTER_SCALE * k.trace() / n as f64;
        let g_at_xs = DVector::from_iterator(n, xs.iter().map(|&x| g.eval_unchecked(x)));

        let shifted = &k + DMatrix::identity(n, n) * jitter;
        let (beta, beta_residual) = match Cholesky::new(shifted.clone()) {
            Some(chol) => {
                let beta = chol.solve(&g_at_xs);
                let resid = &beta * jitter;
                (beta, resid)
            }
            None => {
                // rank deficient even after jitter: minimum-norm solution
                let svd = shifted.svd(true, true);
                let beta = svd
                    .solve(&g_at_xs, 1e-14 * k.amax().max(f64::MIN_POSITIVE))
                    .map_err(|e| Error::Numeric(e.to_string()))?;
                let resid = &g_at_xs - &k * &beta;
                (beta, resid)
            }
        };
        Ok(Self {
            spec: *spec,
            xs: xs.to_vec(),
            k,
            jitter,
            beta,
            g_at_xs,
            beta_residual,
            generator: g.clone(),
        })
    }

    fn system(&self, lambda: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        let n = self.xs.len();
        let ridge = n as f64 * lambda;
        let extra = if ridge < JITTER_THRESHOLD { self.jitter } else { 0.0 };
        let a = &self.k + DMatrix::identity(n, n) * (ridge + extra);
        let chol = Cholesky::new(a).ok_or_else(|| {
            Error::Numeric(format!("kernel system singular after jitter at lambda = {lambda:e}"))
        })?;
        Ok((chol, extra))
    }

    /// Solves for `alpha - beta`.
    pub(crate) fn solve_delta(&self, ys: &[f64], lambda: f64) -> Result<DVector<f64>> {
        let (chol, extra) = self.system(lambda)?;
        let y = DVector::from_column_slice(ys);
        let rhs = y - &self.g_at_xs + &self.beta_residual - &self.beta * extra;
        Ok(chol.solve(&rhs))
    }

    pub(crate) fn fit(&self, ys: &[f64], lambda: f64) -> Result<KrrSolution> {
        if ys.len() != self.xs.len() {
            return Err(invalid("ys", "observation count differs from input count"));
        }
        let delta = self.solve_delta(ys, lambda)?;
        let alpha = &self.beta + &delta;
        Ok(KrrSolution {
            alpha: alpha.as_slice().to_vec(),
            beta: self.beta.as_slice().to_vec(),
            lambda,
            xs: self.xs.clone(),
            spec: self.spec,
            generator: self.generator.clone(),
            delta: delta.as_slice().to_vec(),
        })
    }
}

/// Closed-form fit of the generator-regularised ridge regression.
pub fn fit(
    spec: &EigenSpec,
    train: &TrainingSet,
    g: &SeriesFunction,
    lambda: f64,
) -> Result<KrrSolution> {
    if train.xs.len() != train.ys.len() {
        return Err(invalid("train", "xs and ys differ in length"));
    }
    FitContext::new(spec, &train.xs, g)?.fit(&train.ys, lambda)
}

/// Coefficients of the population-limit estimator:
/// `c_j = (mu_j theta_j + lambda omega_j) / (mu_j + lambda)`.
pub fn population_limit_coeffs(
    theta: &SeriesFunction,
    omega: &SeriesFunction,
    lambda: f64,
) -> Result<Vec<f64>> {
    if theta.spec() != omega.spec() {
        return Err(invalid("omega", "functions use different eigensystems"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    let spec = theta.spec();
    let len = theta.len().max(omega.len());
    if lambda == 0.0 {
        return Ok((1..=len).map(|j| theta.coeff(j)).collect());
    }
    Ok((1..=len)
        .map(|j| {
            let mu = spec.eigenvalue(j);
            (mu * theta.coeff(j) + lambda * omega.coeff(j)) / (mu + lambda)
        })
        .collect())
}

/// Uniform grid of `n` points covering the domain, endpoints included.
pub fn uniform_grid(spec: &EigenSpec, n: usize) -> Vec<f64> {
    let (lo, hi) = spec.domain();
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

/// Trapezoid weights for a uniform grid on `[lo, hi]`.
pub(crate) fn trapezoid_weights(n: usize, width: f64) -> Vec<f64> {
    let h = width / (n - 1) as f64;
    (0..n)
        .map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h })
        .collect()
}

pub(crate) fn l2_distance_on_grid(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `sqrt( integral over the domain of (f_N - f_true)^2 )` by the trapezoid rule.
pub fn empirical_l2_error(sol: &KrrSolution, f_true: &SeriesFunction, grid_size: usize) -> Result<f64> {
    if grid_size < 2 {
        return Err(invalid("grid_size", "need at least 2 grid points"));
    }
    if *f_true.spec() != sol.spec {
        return Err(invalid("f_true", "function uses a different eigensystem"));
    }
    let grid = uniform_grid(&sol.spec, grid_size);
    let pred = sol.predict_many(&grid)?;
    let truth: Vec<f64> = grid.iter().map(|&x| f_true.eval_unchecked(x)).collect();
    let (lo, hi) = sol.spec.domain();
    let w = trapezoid_weights(grid_size, hi - lo);
    Ok(l2_distance_on_grid(&w, &pred, &truth))
}

/// Test-grid quantities shared by every fit on one input set.
pub(crate) struct GridEvaluator {
    cross: DMatrix<f64>,
    g_grid: Vec<f64>,
    pub(crate) truth: Vec<f64>,
    pub(crate) weights: Vec<f64>,
}

impl GridEvaluator {
    pub(crate) fn new(ctx: &FitContext, f_true: &SeriesFunction, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(invalid("grid_size", "need at least 2 grid points"));
        }
        let grid = uniform_grid(&ctx.spec, grid_size);
        let (lo, hi) = ctx.spec.domain();
        Ok(Self {
            cross: ctx.spec.cross_kernel(&grid, &ctx.xs),
            g_grid: grid.iter().map(|&x| ctx.generator.eval_unchecked(x)).collect(),
            truth: grid.iter().map(|&x| f_true.eval_unchecked(x)).collect(),
            weights: trapezoid_weights(grid_size, hi - lo),
        })
    }

    pub(crate) fn predictions(&self, delta: &DVector<f64>) -> Vec<f64> {
        let part = &self.cross * delta;
        self.g_grid.iter().zip(part.iter()).map(|(g, p)| g + p).collect()
    }

    pub(crate) fn l2_error(&self, delta: &DVector<f64>) -> f64 {
        l2_distance_on_grid(&self.weights, &self.predictions(delta), &self.truth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceReport {
    pub bias2: f64,
    pub variance: f64,
    pub risk: f64,
    pub mc_replicates: usize,
    pub mc_std_err: f64,
    /// Mean over replicates of the empirical L2 error.
    pub mean_l2_error: f64,
}

/// Parameters of a Monte Carlo bias-variance estimate.
#[derive(Debug, Clone)]
pub struct BiasVarianceSetup<'a> {
    pub spec: &'a EigenSpec,
    pub f_true: &'a SeriesFunction,
    pub g: &'a SeriesFunction,
    pub n: usize,
    pub sigma2: f64,
    pub replicates: usize,
    pub seed: u64,
    pub grid_size: usize,
}

/// Monte Carlo estimate of the noise-conditional bias and variance.
///
/// Inputs are drawn once from `seed`; each replicate redraws only the noise,
/// from its own stream, so results do not depend on scheduling. Expectations
/// over `x` are taken under the uniform density on the domain.
pub fn bias_variance_mc(setup: &BiasVarianceSetup<'_>, lambda: f64) -> Result<BiasVarianceReport> {
    Ok(bias_variance_sweep(setup, &[lambda])?.remove(0))
}

/// [`bias_variance_mc`] over several `lambda`, sharing inputs and noise draws.
pub fn bias_variance_sweep(
    setup: &BiasVarianceSetup<'_>,
    lambdas: &[f64],
) -> Result<Vec<BiasVarianceReport>> {
    if setup.replicates < 2 {
        return Err(invalid("replicates", "need at least 2 replicates"));
    }
    let spec = setup.spec;
    let base = sample_training_set(setup.f_true, setup.n, setup.sigma2, setup.seed)?;
    let ctx = FitContext::new(spec, &base.xs, setup.g)?;
    let f_at_xs: Vec<f64> = base.xs.iter().map(|&x| setup.f_true.eval_unchecked(x)).collect();

    let eval = GridEvaluator::new(&ctx, setup.f_true, setup.grid_size)?;
    let (lo, hi) = spec.domain();
    let density: Vec<f64> = eval.weights.iter().map(|wi| wi / (hi - lo)).collect();

    let noises: Vec<Vec<f64>> = (0..setup.replicates)
        .map(|k| {
            let mut rng = rng_for(setup.seed, k as u64 + 1);
            gaussian_noise(&mut rng, setup.n, setup.sigma2)
        })
        .collect();

    lambdas
        .iter()
        .map(|&lambda| {
            let preds: Vec<Vec<f64>> = noises
                .par_iter()
                .map(|eps| {
                    let ys: Vec<f64> = if setup.sigma2 == 0.0 {
                        f_at_xs.clone()
                    } else {
                        f_at_xs.iter().zip(eps).map(|(f, e)| f + e).collect()
                    };
                    let delta = ctx
                        .solve_delta(&ys, lambda)
                        .map_err(|e| Error::Fit { lambda, source: Box::new(e) })?;
                    Ok(eval.predictions(&delta))
                })
                .collect::<Result<_>>()?;
            Ok(summarize(&preds, &eval.truth, &density, &eval.weights))
        })
        .collect()
}

fn summarize(preds: &[Vec<f64>], truth: &[f64], density: &[f64], weights: &[f64]) -> BiasVarianceReport {
    let reps = preds.len();
    let m = truth.len();
    // offsets from the first replicate keep the mean exact when all agree
    let base = &preds[0];
    let mut mean = vec![0.0; m];
    for p in &preds[1..] {
        for ((acc, v), b) in mean.iter_mut().zip(p).zip(base) {
            *acc += v - b;
        }
    }
    for (v, b) in mean.iter_mut().zip(base) {
        *v = b + *v / reps as f64;
    }
    let bias2: f64 = (0..m).map(|i| density[i] * (truth[i] - mean[i]).powi(2)).sum();
    let variance: f64 = preds
        .iter()
        .map(|p| (0..m).map(|i| density[i] * (p[i] - mean[i]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / reps as f64;
    let per_rep: Vec<f64> = preds
        .iter()
        .map(|p| (0..m).map(|i| density[i] * (truth[i] - p[i]).powi(2)).sum())
        .collect();
    let risk = per_rep.iter().sum::<f64>() / reps as f64;
    let spread = per_rep.iter().map(|r| (r - risk).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let mean_l2_error = preds
        .iter()
        .map(|p| l2_distance_on_grid(weights, p, truth))
        .sum::<f64>()
        / reps as f64;
    BiasVarianceReport {
        bias2,
        variance,
        risk,
        mc_replicates: reps,
        mc_std_err: (spread / reps as f64).sqrt(),
        mean_l2_error,
    }
}
