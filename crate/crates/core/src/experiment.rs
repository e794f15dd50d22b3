//! End-to-end experiments: the capacity/reliability frontier and the
//! relative-reduction sweep over fleet sizes, emitted as long-form CSV.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::RuleKind;
use crate::ingest::{
    fit_histogram, generate_synthetic_fleet, parse_trip_log, sample_scenarios, DemandModel,
    IngestError, SyntheticFleetSpec, DEFAULT_BIN_WIDTH_KWH, DEFAULT_EFFICIENCY_MI_PER_KWH,
};
use crate::planner::{
    conservatism_heuristic, plan_nonshared_from_scenarios, BatteryConfig, PlannerError,
    PlannerParams, TrialSelection,
};
use crate::reliability::{chernoff_sample_size, estimate_min_reliability, ReliabilityError};
use crate::rng::{derive_seed, float_tag, rng_from};

pub const FRONTIER_HEADER: [&str; 6] = [
    "n_drivers",
    "alpha_target",
    "setting",
    "rule",
    "capacity_per_driver_kwh",
    "empirical_reliability",
];

pub const SWEEP_HEADER: [&str; 7] = [
    "n_drivers",
    "alpha_target",
    "reduction_median",
    "reduction_q10",
    "reduction_q25",
    "reduction_q75",
    "reduction_q90",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("fleet size {requested} exceeds the {available} drivers in the data")]
    NotEnoughDrivers { requested: usize, available: usize },
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
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
}

/// Where driver demand models come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandSource {
    /// A `driver_id,date,miles` trip log, fitted to per-driver histograms.
    TripLog {
        path: PathBuf,
        #[serde(default = "default_efficiency")]
        efficiency_mi_per_kwh: f64,
        #[serde(default = "default_bin_width")]
        bin_width_kwh: f64,
        #[serde(default = "default_include_zero_days")]
        include_zero_days: bool,
    },
    /// A JSON array of demand models, as written by `evpool ingest`.
    Models { path: PathBuf },
    /// The synthetic generator; enough drivers are generated for the largest
    /// fleet in the grid.
    Synthetic(SyntheticFleetSpec),
}

fn default_efficiency() -> f64 {
    DEFAULT_EFFICIENCY_MI_PER_KWH
}

fn default_include_zero_days() -> bool {
    true
}

fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH_KWH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub source: DemandSource,
    pub alpha_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub rules: Vec<RuleKind>,
    /// Independent repetitions per `(N, α)` cell in the reduction sweep.
    pub trials: usize,
    /// Bisection trials inside each run of the heuristic.
    pub heuristic_trials: usize,
    pub seed: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub selection: TrialSelection,
    pub emit_iterates: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: DemandSource::Synthetic(SyntheticFleetSpec::default()),
            alpha_grid: (0..100).map(|k| (500 + 5 * k) as f64 / 1000.0).collect(),
            n_grid: (0..10).map(|k| 5 + 20 * k).collect(),
            rules: RuleKind::ALL.to_vec(),
            trials: 20,
            heuristic_trials: 1,
            seed: 0,
            delta: 0.05,
            epsilon: 0.02,
            selection: TrialSelection::default(),
            emit_iterates: false,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.alpha_grid.is_empty() || self.n_grid.is_empty() || self.rules.is_empty() {
            return bad("alpha_grid, n_grid and rules must be non-empty".into());
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} outside (0, 1)"));
        }
        if self.n_grid.contains(&0) {
            return bad("fleet sizes must be at least 1".into());
        }
        if self.trials == 0 || self.heuristic_trials == 0 {
            return bad("trials and heuristic_trials must be at least 1".into());
        }
        self.planner_params(0.5, 0).validate()?;
        Ok(())
    }

    pub fn planner_params(&self, alpha: f64, seed: u64) -> PlannerParams {
        PlannerParams {
            alpha,
            delta: self.delta,
            epsilon: self.epsilon,
            trials: self.heuristic_trials,
            seed,
            selection: self.selection,
        }
    }

    fn sorted_alphas(&self) -> Vec<f64> {
        let mut a = self.alpha_grid.clone();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    }

    fn sorted_sizes(&self) -> Vec<usize> {
        let mut n = self.n_grid.clone();
        n.sort_unstable();
        n.dedup();
        n
    }

    fn sorted_rules(&self) -> Vec<RuleKind> {
        let mut r = self.rules.clone();
        r.sort();
        r.dedup();
        r
    }
}

/// Demand models for the whole driver population the experiments draw from.
pub fn load_population(config: &ExperimentConfig) -> Result<Vec<DemandModel>, ExperimentError> {
    match &config.source {
        DemandSource::TripLog {
            path,
            efficiency_mi_per_kwh,
            bin_width_kwh,
            include_zero_days,
        } => parse_trip_log(path, *efficiency_mi_per_kwh)?
            .iter()
            .map(|s| Ok(fit_histogram(s, *bin_width_kwh, *include_zero_days)?.into()))
            .collect(),
        DemandSource::Models { path } => {
            let file = File::open(path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            let models: Vec<DemandModel> = serde_json::from_reader(std::io::BufReader::new(file))
                .map_err(|source| ExperimentError::Json {
                path: path.clone(),
                source,
            })?;
            for m in &models {
                m.validate()?;
            }
            Ok(models)
        }
        DemandSource::Synthetic(spec) => {
            let largest = config.n_grid.iter().copied().max().unwrap_or(0);
            let spec = SyntheticFleetSpec {
                n_drivers: spec.n_drivers.max(largest),
                ..spec.clone()
            };
            Ok(generate_synthetic_fleet(&spec)?
                .into_iter()
                .map(Into::into)
                .collect())
        }
    }
}

/// `n` drivers drawn uniformly without replacement, seeded by
/// `(seed, n, trial)` so every α in a sweep sees the same fleet.
pub fn subsample_drivers(
    population: &[DemandModel],
    n: usize,
    seed: u64,
    trial: usize,
) -> Result<Vec<DemandModel>, ExperimentError> {
    if n > population.len() {
        return Err(ExperimentError::NotEnoughDrivers {
            requested: n,
            available: population.len(),
        });
    }
    let mut rng = rng_from(seed, &[0x5eed, n as u64, trial as u64]);
    let mut picked = index::sample(&mut rng, population.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| population[i].clone()).collect())
}

fn cell_seed(seed: u64, n: usize, alpha: f64, trial: usize) -> u64 {
    derive_seed(seed, &[n as u64, float_tag(alpha), trial as u64])
}

/// Shared configuration from the heuristic next to the non-shared baseline,
/// for one fleet and target.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPlan {
    pub shared: BatteryConfig,
    pub nonshared: BatteryConfig,
    /// Every configuration the bisection visited, tagged `t<trial>-m<scenarios>`.
    pub iterates: Vec<(String, BatteryConfig)>,
}

impl CellPlan {
    /// `1 − shared total / non-shared total`; zero when both are zero.
    pub fn relative_reduction(&self) -> f64 {
        relative_reduction(self.shared.total(), self.nonshared.total())
    }
}

pub fn relative_reduction(shared_total: f64, nonshared_total: f64) -> f64 {
    if nonshared_total == 0.0 {
        0.0
    } else {
        1.0 - shared_total / nonshared_total
    }
}

/// Runs the heuristic and the non-shared baseline for one fleet. The baseline
/// uses per-driver quantiles of a fresh Chernoff-sized sample.
pub fn plan_cell(
    models: &[DemandModel],
    alpha: f64,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<CellPlan, ExperimentError> {
    let params = config.planner_params(alpha, seed);
    let heuristic = conservatism_heuristic(models, &params)?;
    let m_eval = chernoff_sample_size(models.len(), config.epsilon, config.delta)?;
    let baseline = sample_scenarios(models, m_eval, derive_seed(seed, &[2]))?;
    let nonshared = plan_nonshared_from_scenarios(&baseline, alpha)?;
    let iterates = heuristic
        .trials
        .iter()
        .flat_map(|t| {
            t.bisection.iterates.iter().map(move |it| {
                (
                    format!("t{}-m{}", t.trial, it.n_scenarios),
                    it.config.clone(),
                )
            })
        })
        .collect();
    Ok(CellPlan {
        shared: heuristic.config,
        nonshared,
        iterates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Nonshared,
    Shared,
    Frontier,
}

impl Setting {
    pub fn name(&self) -> &'static str {
        match self {
            Setting::Nonshared => "nonshared",
            Setting::Shared => "shared",
            Setting::Frontier => "frontier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub n_drivers: usize,
    pub alpha_target: f64,
    pub setting: Setting,
    /// `None` for the non-shared baseline, where no pool is allocated.
    pub rule: Option<RuleKind>,
    pub capacity_per_driver_kwh: f64,
    pub empirical_reliability: f64,
    pub iterate: Option<String>,
}

fn frontier_cell(
    population: &[DemandModel],
    n: usize,
    alpha: f64,
    rules: &[RuleKind],
    config: &ExperimentConfig,
) -> Result<Vec<FrontierRow>, ExperimentError> {
    let models = subsample_drivers(population, n, config.seed, 0)?;
    let seed = cell_seed(config.seed, n, alpha, 0);
    let plan = plan_cell(&models, alpha, seed, config)?;
    let m_eval = chernoff_sample_size(n, config.epsilon, config.delta)?;
    let fresh = sample_scenarios(&models, m_eval, derive_seed(seed, &[3]))?;
    let perm_seed = derive_seed(seed, &[4]);

    let row = |setting, rule, config: &BatteryConfig, reliability, iterate| FrontierRow {
        n_drivers: n,
        alpha_target: alpha,
        setting,
        rule,
        capacity_per_driver_kwh: config.total() / n as f64,
        empirical_reliability: reliability,
        iterate,
    };

    let baseline =
        estimate_min_reliability(&plan.nonshared, RuleKind::Utilitarian, &fresh, perm_seed)?;
    let mut rows = vec![row(
        Setting::Nonshared,
        None,
        &plan.nonshared,
        baseline.min_over_drivers,
        None,
    )];
    let mut candidates = vec![(None, &plan.shared)];
    if config.emit_iterates {
        candidates.extend(plan.iterates.iter().map(|(tag, c)| (Some(tag.clone()), c)));
    }
    for &rule in rules {
        for (tag, candidate) in &candidates {
            let est = estimate_min_reliability(candidate, rule, &fresh, perm_seed)?;
            rows.push(row(
                Setting::Shared,
                Some(rule),
                candidate,
                est.min_over_drivers,
                tag.clone(),
            ));
        }
    }
    Ok(rows)
}

/// Keeps, per `(N, rule)`, the shared candidates that raise the best
/// reliability reached at or below their capacity. The result is
/// nondecreasing in capacity within each group.
pub fn efficient_frontier(rows: &[FrontierRow]) -> Vec<FrontierRow> {
    let mut shared: Vec<&FrontierRow> = rows
        .iter()
        .filter(|r| r.setting == Setting::Shared)
        .collect();
    shared.sort_by(|a, b| {
        (a.n_drivers, a.rule)
            .cmp(&(b.n_drivers, b.rule))
            .then(
                a.capacity_per_driver_kwh
                    .total_cmp(&b.capacity_per_driver_kwh),
            )
            .then(b.empirical_reliability.total_cmp(&a.empirical_reliability))
            .then(a.alpha_target.total_cmp(&b.alpha_target))
    });
    let mut out: Vec<FrontierRow> = Vec::new();
    let mut best: Option<((usize, Option<RuleKind>), f64)> = None;
    for r in shared {
        let key = (r.n_drivers, r.rule);
        let improves = match best {
            Some((k, rel)) if k == key => r.empirical_reliability > rel,
            _ => true,
        };
        if improves {
            best = Some((key, r.empirical_reliability));
            out.push(FrontierRow {
                setting: Setting::Frontier,
                ..r.clone()
            });
        }
    }
    out
}

/// For every `(N, α)`: the non-shared baseline, the heuristic's shared
/// configuration evaluated under each rule on a fresh sample, and finally the
/// per-rule efficient frontier.
pub fn run_frontier(config: &ExperimentConfig) -> Result<Vec<FrontierRow>, ExperimentError> {
    config.validate()?;
    let population = load_population(config)?;
    run_frontier_on(&population, config)
}

pub fn run_frontier_on(
    population: &[DemandModel],
    config: &ExperimentConfig,
) -> Result<Vec<FrontierRow>, ExperimentError> {
    config.validate()?;
    let rules = config.sorted_rules();
    let cells: Vec<(usize, f64)> = config
        .sorted_sizes()
        .into_iter()
        .flat_map(|n| config.sorted_alphas().into_iter().map(move |a| (n, a)))
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(n, a)| frontier_cell(population, n, a, &rules, config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows: Vec<FrontierRow> = per_cell.into_iter().flatten().collect();
    let frontier = efficient_frontier(&rows);
    rows.extend(frontier);
    Ok(rows)
}

pub fn write_frontier_csv<W: Write>(
    rows: &[FrontierRow],
    with_iterates: bool,
    writer: W,
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FRONTIER_HEADER.to_vec();
    if with_iterates {
        header.push("iterate");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.n_drivers.to_string(),
            r.alpha_target.to_string(),
            r.setting.name().to_string(),
            r.rule.map_or("none", |k| k.name()).to_string(),
            r.capacity_per_driver_kwh.to_string(),
            r.empirical_reliability.to_string(),
        ];
        if with_iterates {
            rec.push(r.iterate.clone().unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_drivers: usize,
    pub alpha_target: f64,
    pub reduction_median: f64,
    pub reduction_q10: f64,
    pub reduction_q25: f64,
    pub reduction_q75: f64,
    pub reduction_q90: f64,
    /// Per-trial reductions in trial order.
    pub reductions: Vec<f64>,
}

/// Quantile with linear interpolation between order statistics.
pub fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl SweepRow {
    fn from_reductions(n_drivers: usize, alpha_target: f64, reductions: Vec<f64>) -> Self {
        let mut s = reductions.clone();
        s.sort_by(f64::total_cmp);
        Self {
            n_drivers,
            alpha_target,
            reduction_median: interpolated_quantile(&s, 0.5),
            reduction_q10: interpolated_quantile(&s, 0.1),
            reduction_q25: interpolated_quantile(&s, 0.25),
            reduction_q75: interpolated_quantile(&s, 0.75),
            reduction_q90: interpolated_quantile(&s, 0.9),
            reductions,
        }
    }
}

/// Relative capacity reduction of sharing, summarized over `config.trials`
/// independent fleets per `(N, α)`.
pub fn run_reduction_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    config.validate()?;
    let population = load_population(config)?;
    run_reduction_sweep_on(&population, config)
}

pub fn run_reduction_sweep_on(
    population: &[DemandModel],
    config: &ExperimentConfig,
) -> Result<Vec<SweepRow>, ExperimentError> {
    config.validate()?;
    let sizes = config.sorted_sizes();
    let alphas = config.sorted_alphas();
    let jobs: Vec<(usize, f64, usize)> = sizes
        .iter()
        .flat_map(|&n| {
            alphas
                .iter()
                .flat_map(move |&a| (0..config.trials).map(move |t| (n, a, t)))
        })
        .collect();
    let reductions = jobs
        .par_iter()
        .map(|&(n, a, t)| {
            let models = subsample_drivers(population, n, config.seed, t)?;
            Ok(
                plan_cell(&models, a, cell_seed(config.seed, n, a, t), config)?
                    .relative_reduction(),
            )
        })
        .collect::<Result<Vec<f64>, ExperimentError>>()?;
    Ok(jobs
        .chunks(config.trials)
        .zip(reductions.chunks(config.trials))
        .map(|(cell, r)| SweepRow::from_reductions(cell[0].0, cell[0].1, r.to_vec()))
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.n_drivers.to_string(),
            r.alpha_target.to_string(),
            r.reduction_median.to_string(),
            r.reduction_q10.to_string(),
            r.reduction_q25.to_string(),
            r.reduction_q75.to_string(),
            r.reduction_q90.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
