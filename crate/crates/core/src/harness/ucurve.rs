use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_grid, with_jobs};
use crate::bounds::{kernel_bound, lambda_star_numeric, KernelBoundInputs};
use crate::discrepancy::discrepancy;
use crate::error::{invalid, Error, Result};
use crate::krr::{bias_variance_sweep, BiasVarianceSetup, FitContext, GridEvaluator, DEFAULT_TEST_GRID};
use crate::mercer::{make_series, sample_training_set, EigenSpec, SeriesFunction, DEFAULT_DOMAIN};

/// Parameters of a lambda sweep. Defaults are the mismatched-generator setting
/// `r = 2, s = 0.8, s' = 1.5, T_f = 100, T_g = 10, N = 15, sigma^2 = 0.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcurveConfig {
    pub r: f64,
    pub s: f64,
    pub s_prime: f64,
    pub t_f: usize,
    pub t_g: usize,
    pub n: usize,
    pub sigma2: f64,
    pub lambda_lo_exp: f64,
    pub lambda_hi_exp: f64,
    pub lambda_count: usize,
    pub grid_size: usize,
    pub seeds: Vec<u64>,
    pub domain_lo: f64,
    pub domain_hi: f64,
    pub replicates: usize,
}

impl Default for UcurveConfig {
    fn default() -> Self {
        Self {
            r: 2.0,
            s: 0.8,
            s_prime: 1.5,
            t_f: 100,
            t_g: 10,
            n: 15,
            sigma2: 0.1,
            lambda_lo_exp: -10.0,
            lambda_hi_exp: 10.0,
            lambda_count: 50,
            grid_size: DEFAULT_TEST_GRID,
            seeds: vec![42, 43, 44],
            domain_lo: DEFAULT_DOMAIN.0,
            domain_hi: DEFAULT_DOMAIN.1,
            replicates: 200,
        }
    }
}

impl UcurveConfig {
    /// The matched-generator control (`s' = s`, `T_g = T_f`).
    pub fn matched() -> Self {
        Self { s_prime: 0.8, t_g: 100, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_lo_exp < self.lambda_hi_exp) {
            return Err(invalid("lambda_lo_exp", "lambda grid needs lo < hi"));
        }
        if self.lambda_count < 3 {
            return Err(invalid("lambda_count", "lambda grid needs at least 3 points"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        if self.n == 0 {
            return Err(invalid("n", "need at least one sample"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(invalid("sigma2", format!("must be >= 0, got {}", self.sigma2)));
        }
        if self.grid_size < 2 {
            return Err(invalid("grid_size", "need at least 2 grid points"));
        }
        self.functions().map(|_| ())
    }

    pub fn spec(&self) -> Result<EigenSpec> {
        EigenSpec::new(self.r, self.t_f.max(self.t_g), self.domain_lo, self.domain_hi)
    }

    /// Target `f` and generator `g`.
    pub fn functions(&self) -> Result<(SeriesFunction, SeriesFunction)> {
        let spec = self.spec()?;
        Ok((make_series(&spec, self.s, self.t_f)?, make_series(&spec, self.s_prime, self.t_g)?))
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        log_grid(self.lambda_lo_exp, self.lambda_hi_exp, self.lambda_count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub empirical_error: Option<f64>,
    pub bound_value: Option<f64>,
    pub bias2: Option<f64>,
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_std_err: Option<f64>,
}

impl SweepRow {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, empirical_error: None, bound_value: None, bias2: None, variance: None, risk: None, mc_std_err: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub lambda_empirical_opt: f64,
    /// Numeric minimiser of the in-domain bound; absent when it has none.
    pub lambda_theory: Option<f64>,
    pub lambda_theory_note: Option<String>,
    pub discrepancy: f64,
    pub seeds: Vec<u64>,
    /// `per_seed_errors[s][i]`: error of seed `s` at the `i`-th lambda.
    pub per_seed_errors: Vec<Vec<f64>>,
    pub meta: UcurveConfig,
}

impl SweepResult {
    pub fn mean_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.empirical_error.unwrap_or(f64::NAN)).collect()
    }
}

/// True when the minimum of `values` lies strictly below both endpoints.
pub fn has_interior_minimum(values: &[f64]) -> bool {
    let (Some(&first), Some(&last)) = (values.first(), values.last()) else {
        return false;
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    min < first && min < last
}

/// Index of the smallest value; ties go to the earliest.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn theory(cfg: &UcurveConfig, d: f64) -> Result<(Option<f64>, Option<String>)> {
    let inputs = KernelBoundInputs::new(cfg.n, cfg.r, cfg.sigma2, d, 0.0)?;
    Ok(match lambda_star_numeric(&inputs) {
        Ok(plan) => (Some(plan.lambda_star), None),
        Err(e @ (Error::BoundarySolution { .. } | Error::UnboundedRegularization)) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    })
}

fn bound_column(cfg: &UcurveConfig, d: f64, lambdas: &[f64]) -> Result<Vec<f64>> {
    let inputs = KernelBoundInputs::new(cfg.n, cfg.r, cfg.sigma2, d, 0.0)?;
    lambdas.iter().map(|&l| kernel_bound(&inputs, l)).collect()
}

/// Empirical L2 error over the lambda grid for each seed, averaged across
/// seeds. Each seed samples its training set once.
pub fn run_ucurve(cfg: &UcurveConfig, jobs: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let (f, g) = cfg.functions()?;
    let lambdas = cfg.lambda_grid();
    let d = discrepancy(&f, &g)?.value;

    let per_seed_errors = with_jobs(jobs, || {
        let setups = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let train = sample_training_set(&f, cfg.n, cfg.sigma2, seed)?;
                let ctx = FitContext::new(&spec, &train.xs, &g)?;
                let eval = GridEvaluator::new(&ctx, &f, cfg.grid_size)?;
                Ok((train, ctx, eval))
            })
            .collect::<Result<Vec<_>>>()?;
        let tasks: Vec<(usize, f64)> =
            (0..setups.len()).flat_map(|s| lambdas.iter().map(move |&l| (s, l))).collect();
        let flat = tasks
            .par_iter()
            .map(|&(s, lambda)| {
                let (train, ctx, eval) = &setups[s];
                let delta = ctx
                    .solve_delta(&train.ys, lambda)
                    .map_err(|e| Error::Fit { lambda, source: Box::new(e) })?;
                Ok(eval.l2_error(&delta))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(flat.chunks(lambdas.len()).map(<[f64]>::to_vec).collect::<Vec<_>>())
    })?;

    let seeds = cfg.seeds.len() as f64;
    let mean: Vec<f64> = (0..lambdas.len())
        .map(|i| per_seed_errors.iter().map(|e| e[i]).sum::<f64>() / seeds)
        .collect();
    let bounds = bound_column(cfg, d, &lambdas)?;
    let rows = lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| SweepRow { empirical_error: Some(mean[i]), bound_value: Some(bounds[i]), ..SweepRow::new(lambda) })
        .collect();
    let (lambda_theory, lambda_theory_note) = theory(cfg, d)?;
    Ok(SweepResult {
        rows,
        lambda_empirical_opt: lambdas[argmin(&mean)],
        lambda_theory,
        lambda_theory_note,
        discrepancy: d,
        seeds: cfg.seeds.clone(),
        per_seed_errors,
        meta: cfg.clone(),
    })
}

/// Monte Carlo bias, variance and risk per lambda, averaged across seeds.
/// The error column holds the mean L2 error over replicates.
pub fn run_bias_variance(cfg: &UcurveConfig, replicates: usize, jobs: usize) -> Result<SweepResult> {
    cfg.validate()?;
    if replicates < 10 {
        return Err(invalid("replicates", format!("need at least 10, got {replicates}")));
    }
    let spec = cfg.spec()?;
    let (f, g) = cfg.functions()?;
    let lambdas = cfg.lambda_grid();
    let d = discrepancy(&f, &g)?.value;

    let reports = with_jobs(jobs, || {
        cfg.seeds
            .iter()
            .map(|&seed| {
                let setup = BiasVarianceSetup {
                    spec: &spec,
                    f_true: &f,
                    g: &g,
                    n: cfg.n,
                    sigma2: cfg.sigma2,
                    replicates,
                    seed,
                    grid_size: cfg.grid_size,
                };
                bias_variance_sweep(&setup, &lambdas)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let k = reports.len() as f64;
    let bounds = bound_column(cfg, d, &lambdas)?;
    let avg = |i: usize, pick: fn(&crate::krr::BiasVarianceReport) -> f64| {
        reports.iter().map(|r| pick(&r[i])).sum::<f64>() / k
    };
    let rows: Vec<SweepRow> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| SweepRow {
            lambda,
            empirical_error: Some(avg(i, |r| r.mean_l2_error)),
            bound_value: Some(bounds[i]),
            bias2: Some(avg(i, |r| r.bias2)),
            variance: Some(avg(i, |r| r.variance)),
            risk: Some(avg(i, |r| r.risk)),
            mc_std_err: Some(reports.iter().map(|r| r[i].mc_std_err.powi(2)).sum::<f64>().sqrt() / k),
        })
        .collect();
    let mean: Vec<f64> = rows.iter().map(|r| r.empirical_error.unwrap_or(f64::NAN)).collect();
    let per_seed_errors = reports.iter().map(|r| r.iter().map(|x| x.mean_l2_error).collect()).collect();
    let (lambda_theory, lambda_theory_note) = theory(cfg, d)?;
    Ok(SweepResult {
        rows,
        lambda_empirical_opt: lambdas[argmin(&mean)],
        lambda_theory,
        lambda_theory_note,
        discrepancy: d,
        seeds: cfg.seeds.clone(),
        per_seed_errors,
        meta: cfg.clone(),
    })
}
