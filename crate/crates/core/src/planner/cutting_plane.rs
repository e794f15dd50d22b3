//! Exact solver for the sampled aggregate-shortfall program
//!
//! ```text
//! min  s + Σ p_i   s.t.  Σ_i (d_ij − p_i)_+ ≤ s  for every scenario j,  p, s ≥ 0
//! ```
//!
//! Each scenario constraint is the intersection of the linear cuts
//! `s + Σ_{i∈S} p_i ≥ Σ_{i∈S} d_ij` over subsets `S`, and the most violated
//! one at a point is `S = {i : d_ij > p_i}`. Cuts are generated lazily. The
//! master program is solved through its dual, a packing LP with one row per
//! decision variable, so the basis stays at `N + 1` rows however many cuts
//! accumulate; `(p, s)` are read off the dual's row multipliers.

use std::collections::HashSet;

use crate::lp::{LinearProgram, LpStatus, Relation, Simplex};
use crate::scenario::ScenarioSet;

use super::{BatteryConfig, PlannerError};

const CUT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Cut {
    scenario: usize,
    members: Vec<usize>,
    demand: f64,
}

/// Solves prefixes of one scenario set, keeping the cuts found so far.
///
/// Cuts from scenario `j` are reused for every prefix that contains `j`.
#[derive(Debug)]
pub struct ScenarioSolver<'a> {
    scenarios: &'a ScenarioSet,
    pool: Vec<Cut>,
    known: HashSet<(usize, Vec<usize>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSolution {
    pub config: BatteryConfig,
    /// Optimal value `s + Σ p_i`.
    pub objective: f64,
    pub n_scenarios: usize,
    pub cuts: usize,
}

impl<'a> ScenarioSolver<'a> {
    pub fn new(scenarios: &'a ScenarioSet) -> Self {
        Self {
            scenarios,
            pool: Vec::new(),
            known: HashSet::new(),
        }
    }

    fn most_violated(&self, j: usize, personal: &[f64], shared: f64) -> Option<Cut> {
        let col = self.scenarios.column(j);
        let mut members = Vec::new();
        let mut demand = 0.0;
        let mut excess = 0.0;
        for (i, (&d, &p)) in col.iter().zip(personal).enumerate() {
            if d > p {
                members.push(i);
                demand += d;
                excess += d - p;
            }
        }
        (excess - shared > CUT_TOL * (1.0 + demand)).then_some(Cut {
            scenario: j,
            members,
            demand,
        })
    }

    /// Solves the program restricted to the first `m` scenarios.
    pub fn solve_prefix(&mut self, m: usize) -> Result<ScenarioSolution, PlannerError> {
        let m = m.clamp(1, self.scenarios.n_scenarios());
        let n = self.scenarios.n_drivers();

        // Dual master: max Σ D_k y_k  s.t.  Σ_k y_k ≤ 1,  Σ_{k∋i} y_k ≤ 1,  y ≥ 0.
        let mut master = LinearProgram::new(0);
        for _ in 0..=n {
            master.add_constraint(Vec::new(), Relation::Le, 1.0);
        }
        let mut simplex = Simplex::new(&master)?;
        let add = |simplex: &mut Simplex, cut: &Cut| {
            let mut entries = Vec::with_capacity(cut.members.len() + 1);
            entries.push((0, 1.0));
            entries.extend(cut.members.iter().map(|&i| (i + 1, 1.0)));
            simplex.add_column(-cut.demand, entries, None);
        };
        let mut active = 0usize;
        for cut in self.pool.iter().filter(|c| c.scenario < m) {
            add(&mut simplex, cut);
            active += 1;
        }

        loop {
            let sol = simplex.solve()?;
            if sol.status != LpStatus::Optimal {
                return Err(PlannerError::Solver(sol.status));
            }
            let duals = sol.duals.expect("optimal solve reports duals");
            let shared = (-duals[0]).max(0.0);
            let personal: Vec<f64> = duals[1..].iter().map(|y| (-y).max(0.0)).collect();

            let mut added = 0;
            for j in 0..m {
                let Some(cut) = self.most_violated(j, &personal, shared) else {
                    continue;
                };
                if self.known.insert((cut.scenario, cut.members.clone())) {
                    add(&mut simplex, &cut);
                    self.pool.push(cut);
                    active += 1;
                    added += 1;
                }
            }
            if added == 0 {
                return Ok(self.finish(m, personal, shared, active));
            }
        }
    }

    /// Lifts `shared` to the exact requirement so the sampled constraints
    /// hold without tolerance.
    fn finish(&self, m: usize, personal: Vec<f64>, shared: f64, cuts: usize) -> ScenarioSolution {
        let required = (0..m)
            .map(|j| aggregate_shortfall(&personal, self.scenarios.column(j)))
            .fold(0.0, f64::max);
        let config = BatteryConfig {
            personal,
            shared: shared.max(required),
        };
        ScenarioSolution {
            objective: config.total(),
            config,
            n_scenarios: m,
            cuts,
        }
    }
}

pub(crate) fn aggregate_shortfall(personal: &[f64], demand: &[f64]) -> f64 {
    demand
        .iter()
        .zip(personal)
        .map(|(&d, &p)| (d - p).max(0.0))
        .sum()
}
