//! Rules for splitting the shared pool once daily demands are known.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::BatteryConfig;
use crate::rng::rng_from;

/// Absolute slack (kWh) on budget and satisfaction comparisons.
pub const SATISFACTION_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum AllocationError {
    #[error("configuration covers {config} drivers but demand has {demand}")]
    LengthMismatch { config: usize, demand: usize },
    #[error("service order is not a permutation of 0..{0}")]
    InvalidPermutation(usize),
    #[error("unknown allocation rule `{0}` (expected proportional, fcfs or utilitarian)")]
    UnknownRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Proportional,
    Fcfs,
    Utilitarian,
}

impl RuleKind {
    pub const ALL: [RuleKind; 3] = [
        RuleKind::Proportional,
        RuleKind::Fcfs,
        RuleKind::Utilitarian,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::Proportional => "proportional",
            RuleKind::Fcfs => "fcfs",
            RuleKind::Utilitarian => "utilitarian",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = AllocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proportional" => Ok(RuleKind::Proportional),
            "fcfs" => Ok(RuleKind::Fcfs),
            "utilitarian" => Ok(RuleKind::Utilitarian),
            other => Err(AllocationError::UnknownRule(other.to_string())),
        }
    }
}

/// A rule plus the seed FCFS uses to draw one service order per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationRule {
    pub kind: RuleKind,
    pub permutation_seed: u64,
}

impl AllocationRule {
    pub fn new(kind: RuleKind, permutation_seed: u64) -> Self {
        Self {
            kind,
            permutation_seed,
        }
    }

    /// Applies the rule to scenario number `column`.
    pub fn allocate_column(
        &self,
        config: &BatteryConfig,
        demand: &[f64],
        column: usize,
    ) -> Result<AllocationResult, AllocationError> {
        match self.kind {
            RuleKind::Proportional => allocate_proportional(config, demand),
            RuleKind::Utilitarian => allocate_utilitarian(config, demand),
            RuleKind::Fcfs => {
                let order = random_order(demand.len(), self.permutation_seed, column as u64);
                allocate_fcfs(config, demand, &order)
            }
        }
    }
}

/// A uniformly random service order derived from `(seed, column)`.
pub fn random_order(n: usize, seed: u64, column: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed, &[column]));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub allocations: Vec<f64>,
    pub satisfied: Vec<bool>,
}

impl AllocationResult {
    fn new(config: &BatteryConfig, demand: &[f64], allocations: Vec<f64>) -> Self {
        let satisfied = demand
            .iter()
            .zip(&config.personal)
            .zip(&allocations)
            .map(|((&d, &p), &a)| p + a >= d - SATISFACTION_SLACK)
            .collect();
        Self {
            allocations,
            satisfied,
        }
    }

    pub fn n_satisfied(&self) -> usize {
        self.satisfied.iter().filter(|s| **s).count()
    }
}

/// `(demand_i − personal_i)_+` for every driver.
pub fn shortfall(config: &BatteryConfig, demand: &[f64]) -> Result<Vec<f64>, AllocationError> {
    if config.personal.len() != demand.len() {
        return Err(AllocationError::LengthMismatch {
            config: config.personal.len(),
            demand: demand.len(),
        });
    }
    Ok(demand
        .iter()
        .zip(&config.personal)
        .map(|(&d, &p)| (d - p).max(0.0))
        .collect())
}

/// Splits the pool in proportion to shortfall; nothing is handed out when
/// no driver falls short.
pub fn allocate_proportional(
    config: &BatteryConfig,
    demand: &[f64],
) -> Result<AllocationResult, AllocationError> {
    let short = shortfall(config, demand)?;
    let total: f64 = short.iter().sum();
    let allocations = if total > 0.0 {
        short.iter().map(|s| config.shared * s / total).collect()
    } else {
        vec![0.0; short.len()]
    };
    Ok(AllocationResult::new(config, demand, allocations))
}

/// Serves drivers in `order`; a driver receives its full shortfall exactly
/// when the running shortfall total up to and including it fits in the
/// pool, otherwise nothing. Once the prefix overflows, no later driver is
/// served.
pub fn allocate_fcfs(
    config: &BatteryConfig,
    demand: &[f64],
    order: &[usize],
) -> Result<AllocationResult, AllocationError> {
    let short = shortfall(config, demand)?;
    let n = short.len();
    let mut seen = vec![false; n];
    if order.len() != n
        || order
            .iter()
            .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
    {
        return Err(AllocationError::InvalidPermutation(n));
    }
    Ok(serve_in_order(config, demand, &short, order))
}

/// FCFS under the ascending-shortfall order, ties broken by driver index.
pub fn allocate_utilitarian(
    config: &BatteryConfig,
    demand: &[f64],
) -> Result<AllocationResult, AllocationError> {
    let short = shortfall(config, demand)?;
    let mut order: Vec<usize> = (0..short.len()).collect();
    order.sort_by(|&a, &b| short[a].total_cmp(&short[b]).then(a.cmp(&b)));
    Ok(serve_in_order(config, demand, &short, &order))
}

fn serve_in_order(
    config: &BatteryConfig,
    demand: &[f64],
    short: &[f64],
    order: &[usize],
) -> AllocationResult {
    let mut allocations = vec![0.0; short.len()];
    let mut prefix = 0.0;
    for &i in order {
        prefix += short[i];
        if prefix <= config.shared + SATISFACTION_SLACK {
            allocations[i] = short[i];
        }
    }
    AllocationResult::new(config, demand, allocations)
}

/// Anything that maps (configuration, realized demand) to a disbursement.
pub trait AllocationPolicy {
    fn allocate(
        &self,
        config: &BatteryConfig,
        demand: &[f64],
    ) -> Result<AllocationResult, AllocationError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Proportional;

#[derive(Debug, Clone, Copy, Default)]
pub struct Utilitarian;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstComeFirstServed {
    pub order: Vec<usize>,
}

impl AllocationPolicy for Proportional {
    fn allocate(
        &self,
        config: &BatteryConfig,
        demand: &[f64],
    ) -> Result<AllocationResult, AllocationError> {
        allocate_proportional(config, demand)
    }
}

impl AllocationPolicy for Utilitarian {
    fn allocate(
        &self,
        config: &BatteryConfig,
        demand: &[f64],
    ) -> Result<AllocationResult, AllocationError> {
        allocate_utilitarian(config, demand)
    }
}

impl AllocationPolicy for FirstComeFirstServed {
    fn allocate(
        &self,
        config: &BatteryConfig,
        demand: &[f64],
    ) -> Result<AllocationResult, AllocationError> {
        allocate_fcfs(config, demand, &self.order)
    }
}

/// Whether `policy` covers every shortfall on this instance whenever the
/// pool covers the aggregate shortfall (vacuously true otherwise).
pub fn check_shortfall_minimizing<P: AllocationPolicy + ?Sized>(
    policy: &P,
    config: &BatteryConfig,
    demand: &[f64],
) -> Result<bool, AllocationError> {
    let short = shortfall(config, demand)?;
    if config.shared < short.iter().sum::<f64>() {
        return Ok(true);
    }
    let result = policy.allocate(config, demand)?;
    Ok(result
        .allocations
        .iter()
        .zip(&short)
        .all(|(a, s)| *a >= s - SATISFACTION_SLACK))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(personal: &[f64], shared: f64) -> BatteryConfig {
        BatteryConfig {
            personal: personal.to_vec(),
            shared,
        }
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    struct EqualSplit;

    impl AllocationPolicy for EqualSplit {
        fn allocate(
            &self,
            config: &BatteryConfig,
            demand: &[f64],
        ) -> Result<AllocationResult, AllocationError> {
            let n = demand.len() as f64;
            Ok(AllocationResult::new(
                config,
                demand,
                vec![config.shared / n; demand.len()],
            ))
        }
    }

    #[test]
    fn shortfall_examples() {
        assert_eq!(
            shortfall(&cfg(&[2.0, 2.0], 0.0), &[3.0, 1.0]).unwrap(),
            vec![1.0, 0.0]
        );
        assert_eq!(
            shortfall(&cfg(&[2.0, 2.0], 0.0), &[2.0, 2.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            shortfall(&cfg(&[1.0, 1.0], 0.0), &[2.0, 3.0]).unwrap(),
            vec![1.0, 2.0]
        );
        assert_eq!(
            shortfall(&cfg(&[1.0], 0.0), &[2.0, 3.0]),
            Err(AllocationError::LengthMismatch {
                config: 1,
                demand: 2
            })
        );
    }

    #[test]
    fn proportional_examples() {
        let r = allocate_proportional(&cfg(&[1.0, 1.0], 1.5), &[2.0, 3.0]).unwrap();
        assert!(close(&r.allocations, &[0.5, 1.0]));
        assert_eq!(r.satisfied, vec![false, false]);

        let r = allocate_proportional(&cfg(&[3.0, 3.0], 1.5), &[2.0, 3.0]).unwrap();
        assert_eq!(r.allocations, vec![0.0, 0.0]);
        assert_eq!(r.satisfied, vec![true, true]);

        let r = allocate_proportional(&cfg(&[1.0, 1.0], 6.0), &[2.0, 3.0]).unwrap();
        assert!(close(&r.allocations, &[2.0, 4.0]));
        assert_eq!(r.satisfied, vec![true, true]);
    }

    #[test]
    fn fcfs_examples() {
        let c = cfg(&[1.0, 1.0, 1.0], 1.2);
        let d = [2.0, 3.0, 1.5];
        let r = allocate_fcfs(&c, &d, &[0, 1, 2]).unwrap();
        assert!(close(&r.allocations, &[1.0, 0.0, 0.0]));
        assert_eq!(r.satisfied, vec![true, false, false]);

        let r = allocate_fcfs(&cfg(&[1.0, 1.0, 1.0], 3.5), &d, &[2, 0, 1]).unwrap();
        assert!(close(&r.allocations, &[1.0, 2.0, 0.5]));

        let r = allocate_fcfs(&cfg(&[1.0, 1.0, 3.0], 0.0), &d, &[0, 1, 2]).unwrap();
        assert_eq!(r.satisfied, vec![false, false, true]);

        assert_eq!(
            allocate_fcfs(&c, &d, &[0, 0, 2]),
            Err(AllocationError::InvalidPermutation(3))
        );
        assert!(allocate_fcfs(&c, &d, &[0, 1]).is_err());
    }

    #[test]
    fn fcfs_does_not_skip_ahead() {
        // Driver 1 overflows the pool; driver 2 would fit alone but is not served.
        let r = allocate_fcfs(&cfg(&[0.0, 0.0, 0.0], 1.5), &[1.0, 5.0, 0.4], &[0, 1, 2]).unwrap();
        assert_eq!(r.allocations, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn utilitarian_examples() {
        let c = cfg(&[1.0, 1.0, 1.0], 1.2);
        let r = allocate_utilitarian(&c, &[2.0, 3.0, 1.5]).unwrap();
        assert!(close(&r.allocations, &[0.0, 0.0, 0.5]));

        let r = allocate_utilitarian(&cfg(&[1.0, 1.0, 1.0], 10.0), &[2.0, 3.0, 1.5]).unwrap();
        assert!(close(&r.allocations, &[1.0, 2.0, 0.5]));

        let r = allocate_utilitarian(&cfg(&[0.0, 0.0, 0.0], 1.0), &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.allocations, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn shortfall_minimizing_checks() {
        let c = cfg(&[1.0, 1.0], 0.5);
        assert!(check_shortfall_minimizing(&EqualSplit, &c, &[2.0, 3.0]).unwrap());
        let exact = cfg(&[1.0, 1.0], 3.0);
        assert!(check_shortfall_minimizing(&Proportional, &exact, &[2.0, 3.0]).unwrap());
        assert!(check_shortfall_minimizing(&Utilitarian, &exact, &[2.0, 3.0]).unwrap());
        let fcfs = FirstComeFirstServed { order: vec![1, 0] };
        assert!(check_shortfall_minimizing(&fcfs, &exact, &[2.0, 3.0]).unwrap());
        assert!(!check_shortfall_minimizing(&EqualSplit, &exact, &[2.0, 3.0]).unwrap());
    }

    #[test]
    fn rule_names() {
        for k in RuleKind::ALL {
            assert_eq!(k.name().parse::<RuleKind>().unwrap(), k);
        }
        assert!("equal".parse::<RuleKind>().is_err());
        assert_eq!(serde_json::to_string(&RuleKind::Fcfs).unwrap(), "\"fcfs\"");
    }

    #[test]
    fn fcfs_orders_are_seeded_permutations() {
        let a = random_order(10, 3, 4);
        assert_eq!(a, random_order(10, 3, 4));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert!((0..20).any(|c| random_order(10, 3, c) != a));
    }
}
