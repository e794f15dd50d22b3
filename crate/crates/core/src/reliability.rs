//! Empirical reliability of a configuration and evaluation sample sizing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{AllocationError, AllocationRule, RuleKind, SATISFACTION_SLACK};
use crate::planner::{aggregate_shortfall, BatteryConfig};
use crate::scenario::ScenarioSet;

/// Confidence used to report the estimation error of an estimate.
pub const DEFAULT_DELTA: f64 = 0.05;

const COLUMN_CHUNK: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum ReliabilityError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration has {config} drivers, scenarios have {scenarios}")]
    DimensionMismatch { config: usize, scenarios: usize },
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

/// Samples needed so every per-driver satisfaction frequency is within
/// `epsilon` of its mean with probability `1 − delta`: `⌈4 ln(2N/δ)/ε²⌉`.
pub fn chernoff_sample_size(
    n_drivers: usize,
    epsilon: f64,
    delta: f64,
) -> Result<usize, ReliabilityError> {
    if n_drivers == 0 || !(epsilon > 0.0 && epsilon.is_finite()) || !(delta > 0.0 && delta < 1.0) {
        return Err(ReliabilityError::InvalidParameter(format!(
            "need N ≥ 1, ε > 0, 0 < δ < 1 (got N={n_drivers}, ε={epsilon}, δ={delta})"
        )));
    }
    let m = 4.0 * (2.0 * n_drivers as f64 / delta).ln() / (epsilon * epsilon);
    Ok(crate::planner::ceil_tolerant(m).max(1))
}

/// Error bound implied by `m` samples: `sqrt(4 ln(2N/δ)/m)`.
pub fn chernoff_epsilon(n_drivers: usize, m: usize, delta: f64) -> f64 {
    (4.0 * (2.0 * n_drivers as f64 / delta).ln() / m as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityEstimate {
    pub per_driver: Vec<f64>,
    #[serde(rename = "min")]
    pub min_over_drivers: f64,
    pub aggregate: f64,
    pub n_samples: usize,
    pub epsilon: f64,
    pub delta: f64,
}

fn check_dims(config: &BatteryConfig, eval: &ScenarioSet) -> Result<(), ReliabilityError> {
    if config.n_drivers() != eval.n_drivers() {
        return Err(ReliabilityError::DimensionMismatch {
            config: config.n_drivers(),
            scenarios: eval.n_drivers(),
        });
    }
    Ok(())
}

fn aggregate_ok(config: &BatteryConfig, demand: &[f64]) -> bool {
    aggregate_shortfall(&config.personal, demand) <= config.shared + SATISFACTION_SLACK
}

/// Fraction of scenarios whose aggregate shortfall fits in the pool.
pub fn estimate_aggregate_reliability(
    config: &BatteryConfig,
    eval: &ScenarioSet,
) -> Result<f64, ReliabilityError> {
    check_dims(config, eval)?;
    let hits: usize = (0..eval.n_scenarios())
        .into_par_iter()
        .with_min_len(COLUMN_CHUNK)
        .filter(|&j| aggregate_ok(config, eval.column(j)))
        .count();
    Ok(hits as f64 / eval.n_scenarios() as f64)
}

/// Per-driver satisfaction frequencies under `rule`, their minimum, and the
/// aggregate-shortfall frequency. FCFS draws a fresh order per scenario from
/// `(seed, scenario index)`.
pub fn estimate_min_reliability(
    config: &BatteryConfig,
    rule: RuleKind,
    eval: &ScenarioSet,
    seed: u64,
) -> Result<ReliabilityEstimate, ReliabilityError> {
    check_dims(config, eval)?;
    let n = eval.n_drivers();
    let rule = AllocationRule::new(rule, seed);
    let (counts, aggregate_hits) = (0..eval.n_scenarios())
        .into_par_iter()
        .with_min_len(COLUMN_CHUNK)
        .try_fold(
            || (vec![0usize; n], 0usize),
            |(mut counts, mut agg), j| {
                let demand = eval.column(j);
                let result = rule.allocate_column(config, demand, j)?;
                for (c, s) in counts.iter_mut().zip(&result.satisfied) {
                    *c += usize::from(*s);
                }
                agg += usize::from(aggregate_ok(config, demand));
                Ok::<_, ReliabilityError>((counts, agg))
            },
        )
        .try_reduce(
            || (vec![0usize; n], 0usize),
            |(mut a, x), (b, y)| {
                for (ai, bi) in a.iter_mut().zip(b) {
                    *ai += bi;
                }
                Ok((a, x + y))
            },
        )?;
    let m = eval.n_scenarios();
    let per_driver: Vec<f64> = counts.iter().map(|&c| c as f64 / m as f64).collect();
    let min_over_drivers = per_driver.iter().copied().fold(1.0, f64::min);
    Ok(ReliabilityEstimate {
        per_driver,
        min_over_drivers,
        aggregate: aggregate_hits as f64 / m as f64,
        n_samples: m,
        epsilon: chernoff_epsilon(n, m, DEFAULT_DELTA),
        delta: DEFAULT_DELTA,
    })
}
