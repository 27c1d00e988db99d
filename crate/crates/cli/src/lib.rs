//! Argument parsing and dispatch for the `synthmix` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use synthmix::bounds::{
    domain_shift_gap_bound, domain_shift_kernel_bound, kernel_bound, kernel_bound_with_cr,
    lambda_star_closed_form_variant, lambda_star_numeric, lambda_star_numeric_with_cr,
    mixed_gap_bound, stability_constant, traditional_plan, BoundParams, ClosedForm,
    KernelBoundInputs, RatioPlan, TraditionalPlan,
};
use synthmix::harness::config::{parse_seed_list, ConfigFile};
use synthmix::harness::emit::{contour_csv, sweep_csv, to_json, write_text, Format};
use synthmix::harness::{
    has_interior_minimum, run_bias_variance, run_contour, run_ucurve, ContourKind, ContourSpec,
    UcurveConfig,
};
use synthmix::spectral::{load_dir, plan_from_images, SigmaSource, SpectralPlan};
use synthmix::Error;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "synthmix", version, about = "Plan and simulate mixtures of real and synthetic training data")]
pub struct Cli {
    /// Experiment config file (sections [mercer], [experiment], [grid])
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Write machine-readable output here
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    pub format: OutFormat,

    /// Single seed
    #[arg(long, global = true, conflicts_with = "seeds")]
    pub seed: Option<u64>,

    /// Comma-separated seed list
    #[arg(long, global = true, value_name = "LIST")]
    pub seeds: Option<String>,

    /// Worker threads (0 = one per core)
    #[arg(long, global = true, env = "SYNTHMIX_JOBS", hide_env_values = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run a lambda sweep of the generator-regularised kernel regression
    Simulate(SimulateArgs),
    /// Evaluate one generalization bound
    Bound(BoundArgs),
    /// Optimal synthetic-to-real ratio
    Plan(PlanArgs),
    /// Plan a ratio from real and synthetic image directories
    Estimate(EstimateArgs),
    /// Bound contour grid over ratio and discrepancy
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    Ucurve,
    BiasVariance,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = SimMode::Ucurve)]
    pub mode: SimMode,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub s_prime: Option<f64>,
    #[arg(long)]
    pub t_f: Option<usize>,
    #[arg(long)]
    pub t_g: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub lambda_lo_exp: Option<f64>,
    #[arg(long)]
    pub lambda_hi_exp: Option<f64>,
    #[arg(long)]
    pub lambda_count: Option<usize>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Monte Carlo replicates per seed (bias-variance mode)
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    /// In-domain kernel bound
    #[value(alias = "2.2")]
    Kernel,
    /// Mixed-data generalization gap
    #[value(alias = "3.1")]
    MixedGap,
    /// Uniform stability constant of the mixed-data learner
    StabilityConstant,
    /// Kernel bound under domain shift
    #[value(alias = "5.1")]
    DomainShift,
    /// Mixed-data gap under domain shift
    #[value(alias = "5.2")]
    ShiftGap,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, value_enum)]
    pub theorem: Theorem,
    /// Ratio M/N for kernel bounds, mixing weight in (0, 1) otherwise
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 15)]
    pub n: usize,
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma2: f64,
    /// Generator discrepancy
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    #[arg(long, default_value_t = 0.0)]
    pub d_shift: f64,
    /// Include the eigendecay constant in the bias term
    #[arg(long)]
    pub include_cr: bool,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub d_diam: f64,
    #[arg(long, default_value_t = 1.0)]
    pub d_star: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub w2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub r_star: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mixed_risk: f64,
    #[arg(long, default_value_t = 0.0)]
    pub w2_target_synth: f64,
    #[arg(long, default_value_t = 0.0)]
    pub w2_target_source: f64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub d: f64,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long)]
    pub include_cr: bool,
    /// Also evaluate the traditional sample-size plan
    #[arg(long)]
    pub compare_traditional: bool,
    /// Complexity constant of the traditional bound
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Synthetic samples available to the traditional plan (default: rounded M*)
    #[arg(long)]
    pub m_avail: Option<f64>,
    /// Distributional distance between real and synthetic data
    #[arg(long)]
    pub ipm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_name = "PATH")]
    pub real_dir: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub synth_dir: PathBuf,
    #[arg(long, conflicts_with = "sigma2_from_pixels")]
    pub sigma2: Option<f64>,
    /// Use the pooled pixel variance of the real images as sigma^2
    #[arg(long)]
    pub sigma2_from_pixels: bool,
    /// Real sample count (default: number of real images)
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, requires = "fit_hi")]
    pub fit_lo: Option<usize>,
    #[arg(long, requires = "fit_lo")]
    pub fit_hi: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    #[value(name = "in_domain", alias = "in-domain")]
    InDomain,
    #[value(name = "out_domain", alias = "out-domain")]
    OutDomain,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub ratio_lo_exp: Option<f64>,
    #[arg(long)]
    pub ratio_hi_exp: Option<f64>,
    #[arg(long)]
    pub ratio_count: Option<usize>,
    #[arg(long)]
    pub d_lo: Option<f64>,
    #[arg(long)]
    pub d_hi: Option<f64>,
    #[arg(long)]
    pub d_count: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Fixed generator discrepancy for out_domain grids
    #[arg(long)]
    pub d_gen: Option<f64>,
    #[arg(long)]
    pub mu_max: Option<f64>,
}

/// A fully validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Simulate { cfg: UcurveConfig, mode: SimMode },
    Bound(BoundRequest),
    Plan { inputs: KernelBoundInputs, include_cr: bool, traditional: Option<TraditionalArgs> },
    Estimate { real_dir: PathBuf, synth_dir: PathBuf, n: Option<usize>, sigma: SigmaSource, fit_range: Option<[usize; 2]> },
    Sweep { spec: ContourSpec },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraditionalArgs {
    pub c: f64,
    pub m_avail: Option<f64>,
    pub ipm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundRequest {
    Kernel { inputs: KernelBoundInputs, lambda: f64, include_cr: bool },
    DomainShift { inputs: KernelBoundInputs, lambda: f64 },
    MixedGap { params: BoundParams, lambda: f64, n: usize, w2: f64, r_star: f64 },
    StabilityConstant { params: BoundParams, lambda: f64, n: usize, mixed_risk: f64 },
    ShiftGap { params: BoundParams, lambda: f64, n: usize, w2_target_synth: f64, w2_target_source: f64, r_star: f64 },
}

/// Bad invocation; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl From<Error> for UsageError {
    fn from(e: Error) -> Self {
        UsageError(e.to_string())
    }
}

fn usage(name: &str, reason: impl std::fmt::Display) -> UsageError {
    UsageError(format!("invalid argument `{name}`: {reason}"))
}

fn positive(name: &str, v: f64) -> Result<(), UsageError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(usage(name, format!("must be > 0, got {v}")))
    }
}

fn unit_open(name: &str, v: f64) -> Result<(), UsageError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(usage(name, format!("must lie in (0, 1), got {v}")))
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Parses `argv` (program name first) into a validated [`CliConfig`].
pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseOutcome::Clap)?;
    build(cli).map_err(ParseOutcome::Usage)
}

#[derive(Debug)]
pub enum ParseOutcome {
    /// clap's own result, including `--help` and `--version`.
    Clap(clap::Error),
    Usage(UsageError),
}

fn build(cli: Cli) -> Result<CliConfig, UsageError> {
    let file = match &cli.config {
        Some(p) => Some(ConfigFile::load(p)?),
        None => None,
    };
    let mut warnings = Vec::new();
    let flag_seeds = match (&cli.seeds, cli.seed) {
        (Some(list), _) => Some(parse_seed_list(list)?),
        (None, Some(s)) => Some(vec![s]),
        (None, None) => None,
    };

    let command = match cli.command {
        Cmd::Simulate(a) => {
            let mut cfg = UcurveConfig::default();
            let mut file_seeds = None;
            if let Some(f) = &file {
                f.apply_ucurve(&mut cfg)?;
                file_seeds = f.seeds()?;
            }
            set(&mut cfg.r, a.r);
            set(&mut cfg.s, a.s);
            set(&mut cfg.s_prime, a.s_prime);
            set(&mut cfg.t_f, a.t_f);
            set(&mut cfg.t_g, a.t_g);
            set(&mut cfg.n, a.n);
            set(&mut cfg.sigma2, a.sigma2);
            set(&mut cfg.lambda_lo_exp, a.lambda_lo_exp);
            set(&mut cfg.lambda_hi_exp, a.lambda_hi_exp);
            set(&mut cfg.lambda_count, a.lambda_count);
            set(&mut cfg.grid_size, a.grid_size);
            set(&mut cfg.replicates, a.replicates);
            cfg.seeds = match (flag_seeds, file_seeds) {
                (Some(s), _) | (None, Some(s)) => s,
                (None, None) => {
                    warnings.push(format!("no seed given; using {DEFAULT_SEED}"));
                    vec![DEFAULT_SEED]
                }
            };
            cfg.validate()?;
            if a.mode == SimMode::BiasVariance && cfg.replicates < 10 {
                return Err(usage("replicates", format!("need at least 10, got {}", cfg.replicates)));
            }
            Command::Simulate { cfg, mode: a.mode }
        }
        Cmd::Bound(a) => Command::Bound(bound_request(&a)?),
        Cmd::Plan(a) => {
            let inputs = KernelBoundInputs::new(a.n, a.r, a.sigma2, a.d, 0.0)?;
            let traditional = if a.compare_traditional {
                let ipm = a.ipm.ok_or_else(|| usage("ipm", "required with --compare-traditional"))?;
                if !(ipm.is_finite() && ipm >= 0.0) {
                    return Err(usage("ipm", format!("must be >= 0, got {ipm}")));
                }
                positive("c", a.c)?;
                if let Some(m) = a.m_avail {
                    if !(m.is_finite() && m >= 1.0) {
                        return Err(usage("m_avail", format!("must be >= 1, got {m}")));
                    }
                }
                Some(TraditionalArgs { c: a.c, m_avail: a.m_avail, ipm })
            } else {
                None
            };
            Command::Plan { inputs, include_cr: a.include_cr, traditional }
        }
        Cmd::Estimate(a) => {
            let sigma = match (a.sigma2, a.sigma2_from_pixels) {
                (Some(s), false) => {
                    positive("sigma2", s)?;
                    SigmaSource::Given(s)
                }
                (None, true) => SigmaSource::FromPixels,
                _ => return Err(usage("sigma2", "pass either --sigma2 or --sigma2-from-pixels")),
            };
            if a.n == Some(0) {
                return Err(usage("n", "must be >= 1"));
            }
            let fit_range = match (a.fit_lo, a.fit_hi) {
                (Some(lo), Some(hi)) if lo <= hi => Some([lo, hi]),
                (Some(lo), Some(hi)) => return Err(usage("fit_lo", format!("{lo} exceeds fit_hi {hi}"))),
                _ => None,
            };
            Command::Estimate { real_dir: a.real_dir, synth_dir: a.synth_dir, n: a.n, sigma, fit_range }
        }
        Cmd::Sweep(a) => {
            let kind = match a.kind {
                KindArg::InDomain => ContourKind::InDomain,
                KindArg::OutDomain => ContourKind::OutDomain,
            };
            let mut spec = ContourSpec::new(kind);
            if let Some(f) = &file {
                f.apply_contour(&mut spec)?;
            }
            set(&mut spec.ratio_lo_exp, a.ratio_lo_exp);
            set(&mut spec.ratio_hi_exp, a.ratio_hi_exp);
            set(&mut spec.ratio_count, a.ratio_count);
            set(&mut spec.d_lo, a.d_lo);
            set(&mut spec.d_hi, a.d_hi);
            set(&mut spec.d_count, a.d_count);
            set(&mut spec.n, a.n);
            set(&mut spec.r, a.r);
            set(&mut spec.sigma2, a.sigma2);
            set(&mut spec.d_gen, a.d_gen);
            set(&mut spec.mu_max, a.mu_max);
            spec.validate()?;
            Command::Sweep { spec }
        }
    };

    Ok(CliConfig {
        command,
        out: cli.out,
        format: cli.format.into(),
        jobs: cli.jobs.unwrap_or(0),
        warnings,
    })
}

fn bound_request(a: &BoundArgs) -> Result<BoundRequest, UsageError> {
    let params = BoundParams { m: a.m, m1: a.m1, m2: a.m2, l: a.l, d_diam: a.d_diam, d_star: a.d_star, c: a.c };
    Ok(match a.theorem {
        Theorem::Kernel | Theorem::DomainShift => {
            positive("lambda", a.lambda)?;
            let inputs = KernelBoundInputs::new(a.n, a.r, a.sigma2, a.d, a.d_shift)?;
            if a.theorem == Theorem::Kernel {
                BoundRequest::Kernel { inputs, lambda: a.lambda, include_cr: a.include_cr }
            } else {
                BoundRequest::DomainShift { inputs, lambda: a.lambda }
            }
        }
        Theorem::MixedGap | Theorem::StabilityConstant | Theorem::ShiftGap => {
            unit_open("lambda", a.lambda)?;
            params.validate()?;
            if a.n == 0 {
                return Err(usage("n", "must be >= 1"));
            }
            match a.theorem {
                Theorem::MixedGap => BoundRequest::MixedGap { params, lambda: a.lambda, n: a.n, w2: a.w2, r_star: a.r_star },
                Theorem::StabilityConstant => {
                    BoundRequest::StabilityConstant { params, lambda: a.lambda, n: a.n, mixed_risk: a.mixed_risk }
                }
                _ => BoundRequest::ShiftGap {
                    params,
                    lambda: a.lambda,
                    n: a.n,
                    w2_target_synth: a.w2_target_synth,
                    w2_target_source: a.w2_target_source,
                    r_star: a.r_star,
                },
            }
        }
    })
}

#[derive(Debug, Serialize)]
pub struct BoundReport {
    pub theorem: &'static str,
    pub lambda: f64,
    pub value: f64,
}

pub fn evaluate_bound(req: &BoundRequest) -> synthmix::Result<BoundReport> {
    Ok(match *req {
        BoundRequest::Kernel { ref inputs, lambda, include_cr } => {
            let value = if include_cr { kernel_bound_with_cr(inputs, lambda)? } else { kernel_bound(inputs, lambda)? };
            BoundReport { theorem: "kernel", lambda, value }
        }
        BoundRequest::DomainShift { ref inputs, lambda } => {
            BoundReport { theorem: "domain_shift", lambda, value: domain_shift_kernel_bound(inputs, lambda)? }
        }
        BoundRequest::MixedGap { ref params, lambda, n, w2, r_star } => {
            BoundReport { theorem: "mixed_gap", lambda, value: mixed_gap_bound(params, lambda, n, w2, r_star)? }
        }
        BoundRequest::StabilityConstant { ref params, lambda, n, mixed_risk } => BoundReport {
            theorem: "stability_constant",
            lambda,
            value: stability_constant(params, lambda, n, mixed_risk)?,
        },
        BoundRequest::ShiftGap { ref params, lambda, n, w2_target_synth, w2_target_source, r_star } => BoundReport {
            theorem: "shift_gap",
            lambda,
            value: domain_shift_gap_bound(params, lambda, n, w2_target_synth, w2_target_source, r_star)?,
        },
    })
}

#[derive(Debug, Serialize)]
pub struct PlanReport {
    pub inputs: KernelBoundInputs,
    pub numeric: RatioPlan,
    pub closed_form: RatioPlan,
    pub closed_form_noise_ratio: Option<RatioPlan>,
    pub closed_form_stationary: RatioPlan,
    pub traditional: Option<TraditionalPlan>,
}

pub fn plan_report(
    inputs: &KernelBoundInputs,
    include_cr: bool,
    traditional: Option<TraditionalArgs>,
) -> synthmix::Result<PlanReport> {
    if inputs.d_gen == 0.0 {
        return Err(Error::UnboundedRegularization);
    }
    let numeric = if include_cr { lambda_star_numeric_with_cr(inputs)? } else { lambda_star_numeric(inputs)? };
    let closed_form = lambda_star_closed_form_variant(inputs, ClosedForm::Main)?;
    let closed_form_noise_ratio = lambda_star_closed_form_variant(inputs, ClosedForm::NoiseRatio).ok();
    let closed_form_stationary = lambda_star_closed_form_variant(inputs, ClosedForm::Stationary)?;
    let traditional = traditional
        .map(|t| {
            let m = t.m_avail.unwrap_or((numeric.m_star_rounded as f64).max(1.0));
            traditional_plan(t.c, inputs.n as f64, m, t.ipm)
        })
        .transpose()?;
    Ok(PlanReport { inputs: *inputs, numeric, closed_form, closed_form_noise_ratio, closed_form_stationary, traditional })
}

pub fn estimate_report(
    real_dir: &Path,
    synth_dir: &Path,
    n: Option<usize>,
    sigma: SigmaSource,
    fit_range: Option<[usize; 2]>,
) -> synthmix::Result<SpectralPlan> {
    let real = load_dir(real_dir)?;
    let synth = load_dir(synth_dir)?;
    plan_from_images(&real, &synth, n.unwrap_or(real.len()), sigma, fit_range)
}

const UNBOUNDED: &str =
    "unbounded regularization: the generator matches the target, so synthetic data can be generated without limit";

fn write_machine(cfg: &CliConfig, csv: impl FnOnce() -> String, json: impl FnOnce() -> synthmix::Result<String>) -> synthmix::Result<()> {
    let Some(path) = &cfg.out else { return Ok(()) };
    let text = match cfg.format {
        Format::Csv => csv(),
        Format::Json => json()?,
    };
    write_text(path, &text)
}

fn plan_line(out: &mut dyn Write, label: &str, p: &RatioPlan) -> std::io::Result<()> {
    writeln!(
        out,
        "{label:<22} lambda* = {:.6e}  lambda~ = {:.6}  M* = {} ({:.4})  bound = {:.6e}",
        p.lambda_star, p.lambda_tilde, p.m_star_rounded, p.m_star, p.bound_value
    )
}

fn csv_kv(pairs: &[(&str, String)]) -> String {
    let keys: Vec<&str> = pairs.iter().map(|p| p.0).collect();
    let vals: Vec<&str> = pairs.iter().map(|p| p.1.as_str()).collect();
    format!("{}\n{}\n", keys.join(","), vals.join(","))
}

fn f(v: f64) -> String {
    synthmix::harness::emit::fmt_f64(v)
}

/// Executes a validated invocation; returns the process exit code.
pub fn run(cfg: &CliConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    for w in &cfg.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    match execute(cfg, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cfg: &CliConfig, out: &mut dyn Write) -> synthmix::Result<()> {
    let io = |e: std::io::Error| Error::Numeric(format!("writing output: {e}"));
    match &cfg.command {
        Command::Simulate { cfg: ucfg, mode } => {
            let res = match mode {
                SimMode::Ucurve => run_ucurve(ucfg, cfg.jobs)?,
                SimMode::BiasVariance => run_bias_variance(ucfg, ucfg.replicates, cfg.jobs)?,
            };
            let errs = res.mean_errors();
            writeln!(out, "discrepancy            {:.10e}", res.discrepancy).map_err(io)?;
            writeln!(out, "seeds                  {:?}", res.seeds).map_err(io)?;
            writeln!(out, "lambda empirical opt   {:.6e}", res.lambda_empirical_opt).map_err(io)?;
            match (res.lambda_theory, &res.lambda_theory_note) {
                (Some(l), _) => writeln!(out, "lambda theory          {l:.6e}").map_err(io)?,
                (None, Some(note)) => writeln!(out, "lambda theory          none ({note})").map_err(io)?,
                (None, None) => writeln!(out, "lambda theory          none").map_err(io)?,
            }
            writeln!(out, "interior minimum       {}", has_interior_minimum(&errs)).map_err(io)?;
            write_machine(cfg, || sweep_csv(&res), || to_json(&res))
        }
        Command::Bound(req) => {
            let rep = evaluate_bound(req)?;
            writeln!(out, "{} bound at lambda = {:e}: {:.10e}", rep.theorem, rep.lambda, rep.value).map_err(io)?;
            write_machine(
                cfg,
                || csv_kv(&[("theorem", rep.theorem.to_string()), ("lambda", f(rep.lambda)), ("value", f(rep.value))]),
                || to_json(&rep),
            )
        }
        Command::Plan { inputs, include_cr, traditional } => {
            let rep = match plan_report(inputs, *include_cr, *traditional) {
                Err(Error::UnboundedRegularization) => {
                    writeln!(out, "{UNBOUNDED}").map_err(io)?;
                    return write_machine(
                        cfg,
                        || csv_kv(&[("status", "unbounded_regularization".into())]),
                        || Ok("{\n  \"status\": \"unbounded_regularization\"\n}".into()),
                    );
                }
                other => other?,
            };
            plan_line(out, "numeric", &rep.numeric).map_err(io)?;
            plan_line(out, "closed form", &rep.closed_form).map_err(io)?;
            if let Some(p) = &rep.closed_form_noise_ratio {
                plan_line(out, "closed form (noise)", p).map_err(io)?;
            }
            plan_line(out, "closed form (stat.)", &rep.closed_form_stationary).map_err(io)?;
            if let Some(t) = &rep.traditional {
                writeln!(
                    out,
                    "traditional            decision = {:?}  alpha_rule = {:.6}  alpha* = {:.6}  n* = {}  M_bal = {:.4}",
                    t.decision,
                    t.alpha_rule,
                    t.alpha_star,
                    t.n_star.map_or("n/a".to_string(), |v| format!("{v:.4}")),
                    t.m_bal
                )
                .map_err(io)?;
            }
            write_machine(
                cfg,
                || {
                    csv_kv(&[
                        ("lambda_star", f(rep.numeric.lambda_star)),
                        ("lambda_tilde", f(rep.numeric.lambda_tilde)),
                        ("m_star", f(rep.numeric.m_star)),
                        ("m_star_rounded", rep.numeric.m_star_rounded.to_string()),
                        ("closed_form_lambda_star", f(rep.closed_form.lambda_star)),
                    ])
                },
                || to_json(&rep),
            )
        }
        Command::Estimate { real_dir, synth_dir, n, sigma, fit_range } => {
            let rep = match estimate_report(real_dir, synth_dir, *n, *sigma, *fit_range) {
                Err(Error::UnboundedRegularization) => {
                    writeln!(out, "D = 0: {UNBOUNDED}").map_err(io)?;
                    return Ok(());
                }
                other => other?,
            };
            writeln!(out, "D        {:.10e}", rep.d).map_err(io)?;
            writeln!(out, "r_hat    {:.6}", rep.r_hat).map_err(io)?;
            writeln!(out, "sigma2   {:.6e}", rep.sigma2).map_err(io)?;
            writeln!(out, "N        {}", rep.n).map_err(io)?;
            plan_line(out, "plan", &rep.plan).map_err(io)?;
            write_machine(
                cfg,
                || {
                    csv_kv(&[
                        ("d", f(rep.d)),
                        ("r_hat", f(rep.r_hat)),
                        ("sigma2", f(rep.sigma2)),
                        ("n", rep.n.to_string()),
                        ("lambda_star", f(rep.plan.lambda_star)),
                        ("lambda_tilde", f(rep.plan.lambda_tilde)),
                        ("m_star", f(rep.plan.m_star)),
                    ])
                },
                || to_json(&rep),
            )
        }
        Command::Sweep { spec } => {
            let grid = run_contour(spec, cfg.jobs)?;
            writeln!(
                out,
                "{:?} grid: {} ratios x {} {} values",
                grid.kind,
                grid.x_axis.len(),
                grid.y_axis.len(),
                grid.kind.y_label()
            )
            .map_err(io)?;
            if cfg.out.is_none() {
                write!(out, "{}", contour_csv(&grid)).map_err(io)?;
            }
            write_machine(cfg, || contour_csv(&grid), || to_json(&grid))
        }
    }
}

/// Parses and runs; returns the exit code.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Ok(cfg) => run(&cfg, out, err),
        Err(ParseOutcome::Clap(e)) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            }
        }
        Err(ParseOutcome::Usage(UsageError(msg))) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}
