//! Command-line front end: `estimate`, `select`, `simulate` and `contract`.
//!
//! Every command writes its main CSV atomically plus a JSON sidecar next to
//! it (same stem, `.json`) holding the resolved configuration and seed.

pub mod ingest;
pub mod output;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{run_contraction, ContractionConfig, PathMode};
use crate::parallel;
use crate::posterior::{credible_band, fit, Norm, PriorSpec, Target};
use crate::sde::{
    bench_s2, euler_simulate, subsample, AffineDrift, BenchS1, ConstantDispersion, DispersionHandle, DriftHandle,
    SimConfig, ZeroDrift,
};
use crate::selection::{select, Criterion};

pub use ingest::{ingest, IngestSpec, MissingPolicy};
use output::{indexed_path, num, sidecar_path, write_csv, write_json};

pub const THREADS_ENV: &str = "VOLGRAM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "volgram", version, about = "Bayesian histogram estimation of a time-varying diffusion coefficient")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior mean and marginal credible intervals of s^2 on fixed bins.
    Estimate(EstimateArgs),
    /// Score a grid of bin counts by DIC or marginal likelihood.
    Select(SelectArgs),
    /// Simulate an SDE path and write the observed points.
    Simulate(SimulateArgs),
    /// Monte Carlo study of posterior contraction.
    Contract(ContractArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV with a header row.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Time column (default: `time`, then `t`, else rows are equispaced).
    #[arg(long)]
    pub time_col: Option<String>,
    /// Value column (default: `value`, then `x`).
    #[arg(long)]
    pub value_col: Option<String>,
    #[arg(long, value_enum, default_value_t = MissingPolicy::Drop)]
    pub missing: MissingPolicy,
    /// Keep the observed time span instead of mapping it to [0, 1].
    #[arg(long)]
    pub no_rescale: bool,
    /// Fail on unevenly spaced time stamps.
    #[arg(long)]
    pub strict_times: bool,
    /// Fit the logarithm of the values.
    #[arg(long)]
    pub log: bool,
}

impl InputArgs {
    fn spec(&self) -> IngestSpec {
        IngestSpec {
            path: self.input.clone(),
            time_col: self.time_col.clone(),
            value_col: self.value_col.clone(),
            missing: self.missing,
            rescale: !self.no_rescale,
            strict_times: self.strict_times,
            log: self.log,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.001)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Dic,
    Ml,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "dic")]
    pub criterion: CriterionArg,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40,80,160,320")]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.001)]
    pub beta: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DriftArg {
    Zero,
    B1,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Dispersion: `s1`, `s2` or `const:<value>`.
    #[arg(long = "s", default_value = "s1")]
    pub dispersion: String,
    #[arg(long, value_enum, default_value = "zero")]
    pub drift: DriftArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of observed increments; must divide the fine step count.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 800_001)]
    pub fine_points: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub kappa: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    L2,
    Sup,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    S,
    S2,
}

#[derive(Debug, Args)]
pub struct ContractArgs {
    /// Truth: `s1`, `s2` or `const:<value>`.
    #[arg(long = "s", default_value = "s1")]
    pub dispersion: String,
    #[arg(long, value_enum, default_value = "zero")]
    pub drift: DriftArg,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value = "l2")]
    pub norm: NormArg,
    /// Compare draws with `s` (via the square root of each level) or with `s^2`.
    #[arg(long, value_enum, default_value = "s")]
    pub target: TargetArg,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    pub quantile: f64,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub realisations: Option<usize>,
    /// Draw a fresh path for every n instead of subsampling one path.
    #[arg(long)]
    pub independent_paths: bool,
    #[arg(long)]
    pub fine_points: Option<usize>,
    /// Large study: n = 5000, 10000, ..., 80000, 2000 draws, 4 paths.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Domain(msg) | Error::Partition(msg) => Error::Usage(msg),
        other => other,
    })
}

fn prior(alpha: f64, beta: f64) -> Result<PriorSpec> {
    usage(PriorSpec::new(alpha, beta))
}

fn drift_handle(d: DriftArg) -> DriftHandle {
    match d {
        DriftArg::Zero => Arc::new(ZeroDrift),
        DriftArg::B1 => Arc::new(AffineDrift::b1()),
    }
}

/// Parse `s1`, `s2` or `const:<c>`; `s2` is drawn on the grid of `sim`.
pub fn dispersion_handle(spec: &str, sim: &SimConfig) -> Result<DispersionHandle> {
    match spec {
        "s1" => Ok(Arc::new(BenchS1)),
        "s2" => Ok(Arc::new(bench_s2(sim)?)),
        other => {
            let c = other
                .strip_prefix("const:")
                .and_then(|c| c.parse::<f64>().ok())
                .filter(|c| *c > 0.0 && c.is_finite())
                .ok_or_else(|| Error::Usage(format!("unknown dispersion {other:?}; use s1, s2 or const:<c > 0>")))?;
            Ok(Arc::new(ConstantDispersion(c)))
        }
    }
}

fn log_config(config: &serde_json::Value) {
    log::info!("resolved configuration: {config}");
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    #[serde(flatten)]
    result: &'a T,
    config: &'a serde_json::Value,
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let spec = args.input.spec();
    let path = ingest(&spec)?;
    let prior = prior(args.alpha, args.beta)?;
    if args.bins == 0 || args.bins > path.n() {
        return Err(Error::Usage(format!("--bins must lie in 1..={}, got {}", path.n(), args.bins)));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::Usage(format!("--level must lie in (0, 1), got {}", args.level)));
    }
    let config = json!({
        "command": "estimate",
        "version": env!("CARGO_PKG_VERSION"),
        "input": spec,
        "n": path.n(),
        "horizon": path.horizon(),
        "bins": args.bins,
        "prior": prior,
        "level": args.level,
    });
    log_config(&config);
    let post = fit(&path, args.bins, &prior)?;
    let est = credible_band(&post, args.level)?;
    let rows = est.rows();
    write_csv(
        &args.output,
        &["bin_start", "bin_end", "post_mean", "lower", "upper"],
        rows.iter()
            .map(|r| [num(r.bin_start), num(r.bin_end), r.post_mean.and_then(num), num(r.lower), num(r.upper)]),
    )?;
    write_json(&sidecar_path(&args.output), &json!({ "config": config, "bins": rows }))?;
    Ok(())
}

pub fn cmd_select(args: &SelectArgs) -> Result<()> {
    let spec = args.input.spec();
    let path = ingest(&spec)?;
    let prior = prior(args.alpha, args.beta)?;
    let criterion = match args.criterion {
        CriterionArg::Dic => Criterion::Dic,
        CriterionArg::Ml => Criterion::Ml,
    };
    let config = json!({
        "command": "select",
        "version": env!("CARGO_PKG_VERSION"),
        "input": spec,
        "n": path.n(),
        "horizon": path.horizon(),
        "criterion": criterion,
        "grid": args.grid,
        "prior": prior,
    });
    log_config(&config);
    let result = usage(select(&path, &args.grid, &prior, criterion))?;
    log::info!("best N = {}", result.best);
    write_csv(
        &args.output,
        &["N", "score"],
        result.grid.iter().zip(&result.scores).map(|(g, s)| [Some(g.to_string()), num(*s)]),
    )?;
    write_json(&sidecar_path(&args.output), &Summary { result: &result, config: &config })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let sim = SimConfig {
        fine_grid_points: args.fine_points,
        horizon: args.horizon,
        x0: args.x0,
        seed: args.seed,
        kappa: args.kappa,
    };
    usage(sim.validate())?;
    if args.n == 0 || !(sim.fine_grid_points - 1).is_multiple_of(args.n) {
        return Err(Error::Usage(format!(
            "--n must divide the {} fine steps, got {}",
            sim.fine_grid_points - 1,
            args.n
        )));
    }
    let config = json!({
        "command": "simulate",
        "version": env!("CARGO_PKG_VERSION"),
        "dispersion": args.dispersion,
        "drift": format!("{:?}", args.drift).to_lowercase(),
        "n": args.n,
        "sim": sim,
    });
    log_config(&config);
    let dispersion = dispersion_handle(&args.dispersion, &sim)?;
    let drift = drift_handle(args.drift);
    let fine = euler_simulate(&sim, drift.as_ref(), dispersion.as_ref())?;
    let path = subsample(&fine, args.n, sim.horizon)?;
    write_csv(
        &args.output,
        &["t", "x"],
        path.values().iter().enumerate().map(|(i, &x)| [num(path.time(i)), num(x)]),
    )?;
    write_json(&sidecar_path(&args.output), &json!({ "config": config }))
}

pub fn cmd_contract(args: &ContractArgs) -> Result<()> {
    let prior = prior(args.alpha, args.beta)?;
    let norm = match args.norm {
        NormArg::L2 => Norm::L2,
        NormArg::Sup => Norm::Linf,
    };
    let mut sim = SimConfig::with_seed(args.seed);
    if let Some(points) = args.fine_points {
        sim.fine_grid_points = points;
    }
    usage(sim.validate())?;
    let dispersion = dispersion_handle(&args.dispersion, &sim)?;
    let mut cfg = if args.full_scale {
        ContractionConfig::full_scale(dispersion, args.lambda, norm, args.seed)
    } else {
        ContractionConfig::desk(dispersion, args.lambda, norm, args.seed)
    };
    cfg.drift = drift_handle(args.drift);
    cfg.sim = sim;
    cfg.quantile = args.quantile;
    cfg.target = match args.target {
        TargetArg::S => Target::S,
        TargetArg::S2 => Target::SSquared,
    };
    if let Some(d) = args.draws {
        cfg.draws = d;
    }
    if let Some(r) = args.realisations {
        cfg.realisations = r;
    }
    if let Some(list) = &args.n_list {
        cfg.n_list = list.clone();
    }
    if args.independent_paths {
        cfg.mode = PathMode::Independent;
    }
    usage(cfg.validate())?;
    let steps = sim.fine_grid_points - 1;
    if let Some(bad) = cfg.n_list.iter().find(|&&n| !steps.is_multiple_of(n)) {
        return Err(Error::Usage(format!("n = {bad} does not divide the {steps} fine steps")));
    }
    let config = json!({
        "command": "contract",
        "version": env!("CARGO_PKG_VERSION"),
        "dispersion": args.dispersion,
        "drift": format!("{:?}", args.drift).to_lowercase(),
        "lambda": cfg.lambda,
        "norm": cfg.norm,
        "target": cfg.target,
        "n_list": cfg.n_list,
        "draws": cfg.draws,
        "quantile": cfg.quantile,
        "realisations": cfg.realisations,
        "mode": cfg.mode,
        "prior": prior,
        "seed": args.seed,
        "sim": sim,
    });
    log_config(&config);
    let report = run_contraction(&cfg, &prior)?;
    for r in &report.realisations {
        let target: std::borrow::Cow<Path> = if report.realisations.len() == 1 {
            args.output.as_path().into()
        } else {
            indexed_path(&args.output, r.index).into()
        };
        write_csv(
            &target,
            &["n", "N", "q"],
            r.rows.iter().map(|row| [Some(row.n.to_string()), Some(row.bins.to_string()), num(row.q)]),
        )?;
        log::info!("realisation {}: slope {:?}", r.index, r.slope);
    }
    log::info!("pooled slope {:?} (se {:?})", report.slope, report.slope_se);
    write_json(&sidecar_path(&args.output), &Summary { result: &report, config: &config })
}

/// Apply `VOLGRAM_THREADS` if set.
pub fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let threads: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|t| *t > 0)
            .ok_or_else(|| Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
        parallel::init_threads(threads);
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Select(a) => cmd_select(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Contract(a) => cmd_contract(a),
    }
}
