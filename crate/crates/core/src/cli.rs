//! Command-line front end. The `evpool` binary only forwards to [`run`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::allocation::RuleKind;
use crate::analysis::{gaussian_gap_experiment, write_gap_csv, AnalysisError, GaussianGapConfig};
use crate::experiment::{
    load_population, run_frontier_on, run_reduction_sweep_on, write_frontier_csv, write_sweep_csv,
    DemandSource, ExperimentConfig, ExperimentError,
};
use crate::ingest::{
    fit_histogram, generate_synthetic_fleet, parse_trip_log, sample_scenarios, DemandModel,
    IngestError, SyntheticFleetSpec, DEFAULT_BIN_WIDTH_KWH, DEFAULT_EFFICIENCY_MI_PER_KWH,
};
use crate::planner::{
    conservatism_heuristic, plan_nonshared_from_scenarios, BatteryConfig, PlanReport, PlannerError,
};
use crate::reliability::{chernoff_sample_size, estimate_min_reliability, ReliabilityError};
use crate::rng::derive_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "evpool",
    version,
    about = "Battery capacity planning for EV fleets with a shared range-extender pool"
)]
pub struct Cli {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit per-driver demand histograms from a trip log, or generate a synthetic fleet.
    Ingest(IngestArgs),
    /// Per-driver quantile batteries with no shared pool.
    PlanNonshared(PlanArgs),
    /// Scenario program plus conservatism reduction.
    PlanShared(PlanArgs),
    /// Empirical reliability of a plan under the allocation rules.
    Evaluate(EvaluateArgs),
    /// Capacity/reliability frontier over the alpha and fleet-size grids.
    Frontier(SweepArgs),
    /// Relative capacity reduction from sharing over the grids.
    ReductionSweep(SweepArgs),
    /// Closed-form shared vs non-shared gap for Gaussian demand.
    GaussianAnalysis(GaussianArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// `driver_id,date,miles` CSV.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub trips: Option<PathBuf>,
    /// Generate this many synthetic drivers instead of reading a log.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EFFICIENCY_MI_PER_KWH)]
    pub efficiency: f64,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH_KWH)]
    pub bin_width: f64,
    /// Count days without trips as zero-demand days (`false` keeps only
    /// days with travel).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub include_zero_days: bool,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Demand models written by `ingest`.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Bisection trials (shared planning only).
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub models: PathBuf,
    /// Plan JSON written by `plan-shared` or `plan-nonshared`.
    #[arg(long)]
    pub plan: PathBuf,
    /// Rules to evaluate; all three by default.
    #[arg(long, value_delimiter = ',')]
    pub rules: Vec<RuleKind>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub rules: Vec<RuleKind>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Read drivers from a trip log instead of the configured source.
    #[arg(long)]
    pub trips: Option<PathBuf>,
    /// Read drivers from a models JSON instead of the configured source.
    #[arg(long, conflicts_with = "trips")]
    pub models: Option<PathBuf>,
    /// Also emit every bisection iterate (frontier only).
    #[arg(long)]
    pub emit_iterates: bool,
}

#[derive(Debug, Args)]
pub struct GaussianArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [50usize, 100, 200, 400, 800])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    #[arg(long, default_value_t = 10_000)]
    pub mc_samples: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    Ok((path, BufWriter::new(file)))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| CliError::Json {
        path: path.clone(),
        source,
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    Ok(path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn read_models(path: &Path) -> Result<Vec<DemandModel>, CliError> {
    let models: Vec<DemandModel> = read_json(path)?;
    for m in &models {
        m.validate()?;
    }
    if models.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no demand models",
            path.display()
        )));
    }
    Ok(models)
}

/// Parses `args` (including the program name) and executes the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn base_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = base_config(cli)?;
    let out = config
        .output_dir
        .clone()
        .filter(|_| cli.out == Path::new("."))
        .unwrap_or(cli.out.clone());
    match &cli.command {
        Command::Ingest(args) => ingest(args, &config, &out),
        Command::PlanNonshared(args) => plan(args, &config, &out, false),
        Command::PlanShared(args) => plan(args, &config, &out, true),
        Command::Evaluate(args) => evaluate(args, &config, &out),
        Command::Frontier(args) => sweep(args, config, &out, true),
        Command::ReductionSweep(args) => sweep(args, config, &out, false),
        Command::GaussianAnalysis(args) => gaussian(args, &config, &out),
    }
}

fn ingest(args: &IngestArgs, config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let models: Vec<DemandModel> = match (&args.trips, args.synthetic) {
        (Some(path), _) => parse_trip_log(path, args.efficiency)?
            .iter()
            .map(|s| Ok(fit_histogram(s, args.bin_width, args.include_zero_days)?.into()))
            .collect::<Result<_, CliError>>()?,
        (None, Some(n)) => {
            let spec = SyntheticFleetSpec {
                n_drivers: n,
                seed: config.seed,
                bin_width_kwh: args.bin_width,
                ..Default::default()
            };
            generate_synthetic_fleet(&spec)?
                .into_iter()
                .map(Into::into)
                .collect()
        }
        (None, None) => return Err(CliError::Invalid("pass --trips or --synthetic".into())),
    };
    let path = write_json(out, "models.json", &models)?;
    println!("{} drivers -> {}", models.len(), path.display());
    Ok(())
}

fn plan(
    args: &PlanArgs,
    config: &ExperimentConfig,
    out: &Path,
    shared: bool,
) -> Result<(), CliError> {
    let models = read_models(&args.models)?;
    let mut params = config.planner_params(args.alpha, config.seed);
    params.epsilon = args.epsilon.unwrap_or(params.epsilon);
    params.delta = args.delta.unwrap_or(params.delta);
    if let Some(t) = args.trials {
        params.trials = t;
    }
    params.validate()?;
    let (report, name) = if shared {
        let h = conservatism_heuristic(&models, &params)?;
        (h.config.report(Some(h.empirical_alpha)), "plan_shared.json")
    } else {
        let m = chernoff_sample_size(models.len(), params.epsilon, params.delta)?;
        let samples = sample_scenarios(&models, m, derive_seed(config.seed, &[2]))?;
        (
            plan_nonshared_from_scenarios(&samples, args.alpha)?.report(None),
            "plan_nonshared.json",
        )
    };
    let path = write_json(out, name, &report)?;
    println!(
        "total {:.3} kWh (personal {:.3}, shared {:.3}) -> {}",
        report.total,
        report.personal.iter().sum::<f64>(),
        report.shared,
        path.display()
    );
    Ok(())
}

fn evaluate(args: &EvaluateArgs, config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let models = read_models(&args.models)?;
    let plan: BatteryConfig = read_json::<PlanReport>(&args.plan)?.into();
    plan.validate()?;
    let epsilon = args.epsilon.unwrap_or(config.epsilon);
    let delta = args.delta.unwrap_or(config.delta);
    let m = chernoff_sample_size(models.len(), epsilon, delta)?;
    let fresh = sample_scenarios(&models, m, derive_seed(config.seed, &[3]))?;
    let rules = if args.rules.is_empty() {
        RuleKind::ALL.to_vec()
    } else {
        args.rules.clone()
    };
    let mut report = serde_json::Map::new();
    for rule in rules {
        let mut est =
            estimate_min_reliability(&plan, rule, &fresh, derive_seed(config.seed, &[4]))?;
        est.epsilon = epsilon;
        est.delta = delta;
        println!(
            "{rule}: min over drivers {:.4}, aggregate {:.4} ({} samples)",
            est.min_over_drivers, est.aggregate, est.n_samples
        );
        report.insert(
            rule.name().to_string(),
            serde_json::to_value(est).expect("estimate serializes"),
        );
    }
    let path = write_json(out, "reliability.json", &report)?;
    println!("-> {}", path.display());
    Ok(())
}

fn sweep(
    args: &SweepArgs,
    mut config: ExperimentConfig,
    out: &Path,
    frontier: bool,
) -> Result<(), CliError> {
    if !args.alphas.is_empty() {
        config.alpha_grid = args.alphas.clone();
    }
    if !args.sizes.is_empty() {
        config.n_grid = args.sizes.clone();
    }
    if !args.rules.is_empty() {
        config.rules = args.rules.clone();
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    config.emit_iterates |= args.emit_iterates;
    if let Some(path) = &args.trips {
        config.source = DemandSource::TripLog {
            path: path.clone(),
            efficiency_mi_per_kwh: DEFAULT_EFFICIENCY_MI_PER_KWH,
            bin_width_kwh: DEFAULT_BIN_WIDTH_KWH,
            include_zero_days: true,
        };
    } else if let Some(path) = &args.models {
        config.source = DemandSource::Models { path: path.clone() };
    }
    config.validate()?;
    let population = load_population(&config)?;
    let (path, w) = if frontier {
        let rows = run_frontier_on(&population, &config)?;
        let (path, w) = create(out, "frontier.csv")?;
        write_frontier_csv(&rows, config.emit_iterates, w)?;
        (path, rows.len())
    } else {
        let rows = run_reduction_sweep_on(&population, &config)?;
        let (path, w) = create(out, "reduction_sweep.csv")?;
        write_sweep_csv(&rows, w)?;
        (path, rows.len())
    };
    println!("{w} rows -> {}", path.display());
    Ok(())
}

fn gaussian(args: &GaussianArgs, config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let gap_config = GaussianGapConfig {
        mu: args.mu,
        sigma: args.sigma,
        alpha: args.alpha,
        c: args.c,
        mc_samples: args.mc_samples,
    };
    let rows = gaussian_gap_experiment(&args.sizes, &gap_config, config.seed)?;
    let (path, w) = create(out, "gaussian_gap.csv")?;
    write_gap_csv(&rows, w)?;
    for r in &rows {
        println!(
            "N={:<5} gap {:>10.3}  gap(2N)/gap(N) {:.4}  verified {}",
            r.n_drivers, r.gap, r.ratio, r.verified
        );
    }
    println!("-> {}", path.display());
    Ok(())
}
