//! Capacity planning: the non-shared quantile baseline, the sampled
//! aggregate-shortfall program, and the bisection heuristic that trims its
//! conservatism.

mod cutting_plane;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{sample_scenarios, DemandModel, IngestError};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::reliability::{chernoff_sample_size, estimate_aggregate_reliability, ReliabilityError};
use crate::rng::derive_seed;
use crate::scenario::ScenarioSet;

pub(crate) use cutting_plane::aggregate_shortfall;
pub use cutting_plane::{ScenarioSolution, ScenarioSolver};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty sample set")]
    EmptySamples,
    #[error("linear program solver ended with status {0:?}")]
    Solver(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
}

/// Personal battery capacities plus a shared pool, all in kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub personal: Vec<f64>,
    pub shared: f64,
}

impl BatteryConfig {
    pub fn non_shared(personal: Vec<f64>) -> Self {
        Self {
            personal,
            shared: 0.0,
        }
    }

    pub fn n_drivers(&self) -> usize {
        self.personal.len()
    }

    pub fn total(&self) -> f64 {
        self.personal.iter().sum::<f64>() + self.shared
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let ok = self.shared.is_finite()
            && self.shared >= 0.0
            && self.personal.iter().all(|p| p.is_finite() && *p >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(PlannerError::InvalidParameter(
                "capacities must be finite and non-negative".into(),
            ))
        }
    }

    pub fn report(&self, empirical_alpha: Option<f64>) -> PlanReport {
        PlanReport {
            personal: self.personal.clone(),
            shared: self.shared,
            total: self.total(),
            empirical_alpha,
        }
    }
}

/// JSON shape of a plan: `{personal, shared, total, empirical_alpha}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub personal: Vec<f64>,
    pub shared: f64,
    pub total: f64,
    pub empirical_alpha: Option<f64>,
}

impl From<PlanReport> for BatteryConfig {
    fn from(r: PlanReport) -> Self {
        BatteryConfig {
            personal: r.personal,
            shared: r.shared,
        }
    }
}

/// How independent heuristic trials are reduced to one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialSelection {
    /// Least total capacity among trials whose empirical reliability meets
    /// the target; the most reliable trial if none does.
    #[default]
    LeastCapacityFeasible,
    /// The trial with the smallest empirical reliability.
    MinEmpiricalAlpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub selection: TrialSelection,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            delta: 0.05,
            epsilon: 0.02,
            trials: 20,
            seed: 0,
            selection: TrialSelection::default(),
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), PlannerError> {
        check_probability("alpha", self.alpha)?;
        check_probability("delta", self.delta)?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(PlannerError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.trials == 0 {
            return Err(PlannerError::InvalidParameter(
                "trials must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn check_probability(name: &str, v: f64) -> Result<(), PlannerError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(PlannerError::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

/// Single target for the aggregate constraint when drivers ask for
/// different reliabilities: the strictest one.
pub fn aggregate_target(targets: &[f64]) -> Result<f64, PlannerError> {
    if targets.is_empty() {
        return Err(PlannerError::EmptySamples);
    }
    for &a in targets {
        check_probability("alpha", a)?;
    }
    Ok(targets.iter().copied().fold(f64::MIN, f64::max))
}

/// `⌈x⌉`, ignoring floating-point noise just above an integer.
pub(crate) fn ceil_tolerant(x: f64) -> usize {
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(0.0) as usize
}

/// `inf{x : F̂(x) ≥ alpha}`, the `⌈alpha·n⌉`-th order statistic.
pub fn empirical_quantile(samples: &[f64], alpha: f64) -> Result<f64, PlannerError> {
    if samples.is_empty() {
        return Err(PlannerError::EmptySamples);
    }
    check_probability("alpha", alpha)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ceil_tolerant(alpha * sorted.len() as f64).clamp(1, sorted.len());
    Ok(sorted[k - 1])
}

/// Per-driver empirical quantiles; the shared pool is zero.
pub fn plan_nonshared(samples: &[Vec<f64>], alpha: f64) -> Result<BatteryConfig, PlannerError> {
    if samples.is_empty() {
        return Err(PlannerError::EmptySamples);
    }
    let personal = samples
        .iter()
        .map(|s| empirical_quantile(s, alpha))
        .collect::<Result<_, _>>()?;
    Ok(BatteryConfig::non_shared(personal))
}

pub fn plan_nonshared_from_scenarios(
    scenarios: &ScenarioSet,
    alpha: f64,
) -> Result<BatteryConfig, PlannerError> {
    let rows: Vec<Vec<f64>> = (0..scenarios.n_drivers())
        .map(|i| scenarios.driver_samples(i))
        .collect();
    plan_nonshared(&rows, alpha)
}

/// Scenario count `⌈2/(1−α)·(ln(1/δ) + N + 1)⌉` for a program with `N + 1`
/// decision variables.
pub fn scenario_count(n_drivers: usize, alpha: f64, delta: f64) -> Result<usize, PlannerError> {
    check_probability("alpha", alpha)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(PlannerError::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let dim = n_drivers as f64 + 1.0;
    Ok(ceil_tolerant(2.0 / (1.0 - alpha) * ((1.0 / delta).ln() + dim)).max(1))
}

/// Variable layout of [`build_scenario_lp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioLpLayout {
    pub n_drivers: usize,
    pub n_scenarios: usize,
}

impl ScenarioLpLayout {
    pub fn personal(&self, i: usize) -> usize {
        i
    }

    pub fn shared(&self) -> usize {
        self.n_drivers
    }

    pub fn excess(&self, i: usize, j: usize) -> usize {
        self.n_drivers + 1 + j * self.n_drivers + i
    }

    pub fn n_vars(&self) -> usize {
        self.n_drivers + 1 + self.n_drivers * self.n_scenarios
    }
}

/// The sampled program with explicit excess variables `z_ij ≥ d_ij − p_i`,
/// `z_ij ≥ 0`, `Σ_i z_ij ≤ s`, and `0 ≤ p_i ≤ max_j d_ij`.
pub fn build_scenario_lp(scenarios: &ScenarioSet) -> (LinearProgram, ScenarioLpLayout) {
    let layout = ScenarioLpLayout {
        n_drivers: scenarios.n_drivers(),
        n_scenarios: scenarios.n_scenarios(),
    };
    let mut lp = LinearProgram::new(layout.n_vars());
    let mut objective: Vec<(usize, f64)> = (0..layout.n_drivers)
        .map(|i| (layout.personal(i), 1.0))
        .collect();
    objective.push((layout.shared(), 1.0));
    lp.set_objective(objective);

    for (i, max) in scenarios.driver_maxima().into_iter().enumerate() {
        lp.set_bounds(layout.personal(i), 0.0, Some(max));
    }
    for j in 0..layout.n_scenarios {
        for i in 0..layout.n_drivers {
            lp.add_constraint(
                vec![(layout.excess(i, j), 1.0), (layout.personal(i), 1.0)],
                Relation::Ge,
                scenarios.get(i, j),
            );
        }
        let mut row = vec![(layout.shared(), 1.0)];
        row.extend((0..layout.n_drivers).map(|i| (layout.excess(i, j), -1.0)));
        lp.add_constraint(row, Relation::Ge, 0.0);
    }
    (lp, layout)
}

/// Builds the explicit program and hands it to the general simplex solver.
///
/// Suitable for small instances; [`solve_scenario_problem`] scales to large
/// scenario sets.
pub fn solve_scenario_lp_direct(scenarios: &ScenarioSet) -> Result<ScenarioSolution, PlannerError> {
    let (lp, layout) = build_scenario_lp(scenarios);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(PlannerError::Solver(sol.status));
    }
    let config = BatteryConfig {
        personal: (0..layout.n_drivers)
            .map(|i| sol.values[layout.personal(i)].max(0.0))
            .collect(),
        shared: sol.values[layout.shared()].max(0.0),
    };
    Ok(ScenarioSolution {
        objective: sol.objective_value,
        config,
        n_scenarios: layout.n_scenarios,
        cuts: 0,
    })
}

/// Minimum total capacity satisfying every sampled aggregate-shortfall
/// constraint.
pub fn solve_scenario_problem(scenarios: &ScenarioSet) -> Result<ScenarioSolution, PlannerError> {
    ScenarioSolver::new(scenarios).solve_prefix(scenarios.n_scenarios())
}

/// One configuration visited by the bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionIterate {
    pub n_scenarios: usize,
    pub config: BatteryConfig,
    pub empirical_alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub config: BatteryConfig,
    pub empirical_alpha: f64,
    /// Prefix length the returned configuration was solved with.
    pub n_scenarios: usize,
    /// Even the full scenario set fell short of the target.
    pub below_target: bool,
    pub iterates: Vec<BisectionIterate>,
}

/// Bisects on the number of leading scenarios, keeping the upper end where
/// the empirical aggregate reliability on `eval` exceeds `alpha`.
pub fn binary_search_reduce(
    scenarios: &ScenarioSet,
    eval: &ScenarioSet,
    alpha: f64,
) -> Result<BisectionOutcome, PlannerError> {
    check_probability("alpha", alpha)?;
    if scenarios.n_drivers() != eval.n_drivers() {
        return Err(PlannerError::InvalidParameter(format!(
            "scenario set has {} drivers, evaluation set {}",
            scenarios.n_drivers(),
            eval.n_drivers()
        )));
    }
    let mut solver = ScenarioSolver::new(scenarios);
    let mut visited: BTreeMap<usize, (BatteryConfig, f64)> = BTreeMap::new();
    let mut iterates = Vec::new();
    let mut evaluate = |m: usize,
                        iterates: &mut Vec<BisectionIterate>|
     -> Result<(BatteryConfig, f64), PlannerError> {
        if let Some(hit) = visited.get(&m) {
            return Ok(hit.clone());
        }
        let config = solver.solve_prefix(m)?.config;
        let a = estimate_aggregate_reliability(&config, eval)?;
        iterates.push(BisectionIterate {
            n_scenarios: m,
            config: config.clone(),
            empirical_alpha: a,
        });
        visited.insert(m, (config.clone(), a));
        Ok((config, a))
    };

    let (mut lo, mut hi) = (1usize, scenarios.n_scenarios());
    while hi - lo > 1 {
        let mid = (lo + hi).div_ceil(2);
        let (_, a) = evaluate(mid, &mut iterates)?;
        if a > alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (config, empirical_alpha) = evaluate(hi, &mut iterates)?;
    Ok(BisectionOutcome {
        config,
        empirical_alpha,
        n_scenarios: hi,
        below_target: empirical_alpha < alpha,
        iterates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub bisection: BisectionOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicOutcome {
    pub config: BatteryConfig,
    pub empirical_alpha: f64,
    pub selected_trial: usize,
    pub trials: Vec<TrialOutcome>,
}

/// Runs `params.trials` independent bisection trials, each on fresh scenario
/// and evaluation samples, and selects one configuration.
///
/// Trial `t` draws from seeds derived from `(params.seed, t)`, so the result
/// does not depend on scheduling.
pub fn conservatism_heuristic(
    models: &[DemandModel],
    params: &PlannerParams,
) -> Result<HeuristicOutcome, PlannerError> {
    params.validate()?;
    if models.is_empty() {
        return Err(PlannerError::EmptySamples);
    }
    let n = models.len();
    let m_sc = scenario_count(n, params.alpha, params.delta)?;
    let m_eval = chernoff_sample_size(n, params.epsilon, params.delta)?;

    let trials = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let sc = sample_scenarios(models, m_sc, derive_seed(params.seed, &[t as u64, 0]))?;
            let ev = sample_scenarios(models, m_eval, derive_seed(params.seed, &[t as u64, 1]))?;
            Ok(TrialOutcome {
                trial: t,
                bisection: binary_search_reduce(&sc, &ev, params.alpha)?,
            })
        })
        .collect::<Result<Vec<_>, PlannerError>>()?;

    let selected = select_trial(&trials, params.alpha, params.selection);
    let chosen = &trials[selected].bisection;
    Ok(HeuristicOutcome {
        config: chosen.config.clone(),
        empirical_alpha: chosen.empirical_alpha,
        selected_trial: selected,
        trials,
    })
}

fn select_trial(trials: &[TrialOutcome], alpha: f64, rule: TrialSelection) -> usize {
    let by_alpha = |want_min: bool| {
        let mut best = 0;
        for (k, t) in trials.iter().enumerate() {
            let a = t.bisection.empirical_alpha;
            let b = trials[best].bisection.empirical_alpha;
            if (want_min && a < b) || (!want_min && a > b) {
                best = k;
            }
        }
        best
    };
    match rule {
        TrialSelection::MinEmpiricalAlpha => by_alpha(true),
        TrialSelection::LeastCapacityFeasible => {
            let mut best: Option<usize> = None;
            for (k, t) in trials.iter().enumerate() {
                if t.bisection.empirical_alpha < alpha {
                    continue;
                }
                if best
                    .is_none_or(|b| t.bisection.config.total() < trials[b].bisection.config.total())
                {
                    best = Some(k);
                }
            }
            best.unwrap_or_else(|| by_alpha(false))
        }
    }
}
