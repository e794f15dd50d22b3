//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! The basis dimension equals the number of rows, so the solver is aimed at
//! programs with up to a few hundred rows and any number of sparse columns.
//! Columns can be appended between solves; the previous basis stays primal
//! feasible and is used as a warm start.

use super::{
    LinearProgram, LpError, LpSolution, LpStatus, Relation, FEASIBILITY_TOL, OPTIMALITY_TOL,
};

const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE_TOL: f64 = 1e-12;
const DEGENERATE_STEP: f64 = 1e-12;
const DEGENERACY_STREAK: usize = 30;
const REFACTOR_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    artificials: Vec<usize>,
    is_artificial: Vec<bool>,
    user_vars: Vec<usize>,
    phase: Phase,
    pivots_since_refactor: usize,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Simplex {
    /// Sets up the slack/artificial starting basis for `program`.
    pub fn new(program: &LinearProgram) -> Result<Self, LpError> {
        program.validate()?;
        let m = program.constraints.len();
        let n = program.n_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, con) in program.constraints.iter().enumerate() {
            for &(j, a) in &con.row {
                if a != 0.0 {
                    match cols[j].last_mut() {
                        Some((r, v)) if *r == i => *v += a,
                        _ => cols[j].push((i, a)),
                    }
                }
            }
        }
        let cost = program.dense_objective();
        let lower: Vec<f64> = program.bounds.iter().map(|b| b.lower).collect();
        let upper: Vec<f64> = program.bounds.iter().map(|b| b.upper_or_inf()).collect();

        let mut s = Simplex {
            m,
            cols,
            cost,
            lower,
            upper,
            rhs: program.constraints.iter().map(|c| c.rhs).collect(),
            state: vec![VarState::AtLower; n],
            basis: vec![usize::MAX; m],
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            artificials: Vec::new(),
            is_artificial: vec![false; n],
            user_vars: (0..n).collect(),
            phase: Phase::Two,
            pivots_since_refactor: 0,
            iterations: 0,
        };

        let mut residual = s.rhs.clone();
        for j in 0..n {
            let x = s.lower[j];
            for &(i, a) in &s.cols[j] {
                residual[i] -= a * x;
            }
        }

        for (i, con) in program.constraints.iter().enumerate() {
            let (sl, su) = match con.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            let slack = s.push_var(vec![(i, 1.0)], 0.0, sl, su);
            let r = residual[i];
            if r >= sl - FEASIBILITY_TOL && r <= su + FEASIBILITY_TOL {
                s.make_basic(slack, i, 1.0, r.clamp(sl, su));
                continue;
            }
            let v = r.clamp(sl, su);
            s.state[slack] = if v == sl {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            let remainder = r - v;
            let sigma = remainder.signum();
            let art = s.push_var(vec![(i, sigma)], 0.0, 0.0, f64::INFINITY);
            s.artificials.push(art);
            s.is_artificial[art] = true;
            s.make_basic(art, i, sigma, remainder.abs());
        }
        if !s.artificials.is_empty() {
            s.phase = Phase::One;
        }
        Ok(s)
    }

    fn push_var(&mut self, col: Vec<(usize, f64)>, cost: f64, lower: f64, upper: f64) -> usize {
        self.cols.push(col);
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.state.push(VarState::AtLower);
        self.is_artificial.push(false);
        self.cols.len() - 1
    }

    fn make_basic(&mut self, var: usize, row: usize, coef: f64, value: f64) {
        self.state[var] = VarState::Basic(row);
        self.basis[row] = var;
        self.binv[row * self.m + row] = 1.0 / coef;
        self.xb[row] = value;
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn n_user_vars(&self) -> usize {
        self.user_vars.len()
    }

    /// Appends a variable with bounds `[0, upper]`, nonbasic at zero.
    ///
    /// Returns its user-facing index.
    pub fn add_column(
        &mut self,
        cost: f64,
        entries: Vec<(usize, f64)>,
        upper: Option<f64>,
    ) -> usize {
        let col: Vec<(usize, f64)> = entries.into_iter().filter(|&(_, a)| a != 0.0).collect();
        debug_assert!(col.iter().all(|&(i, _)| i < self.m));
        let var = self.push_var(col, cost, 0.0, upper.unwrap_or(f64::INFINITY));
        self.user_vars.push(var);
        self.user_vars.len() - 1
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(r) => self.xb[r],
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
        }
    }

    fn phase_cost(&self, j: usize) -> f64 {
        match self.phase {
            Phase::Two => self.cost[j],
            Phase::One if self.is_artificial[j] => 1.0,
            Phase::One => 0.0,
        }
    }

    fn iteration_limit(&self) -> usize {
        20_000 + 100 * (self.m + self.cols.len())
    }

    /// Runs (or resumes) the simplex method from the current basis.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        if self.phase == Phase::One {
            self.refactor()?;
            self.run()?;
            let infeasibility: f64 = self.artificials.iter().map(|&a| self.value(a)).sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
            if infeasibility > FEASIBILITY_TOL * scale {
                return Ok(LpSolution::infeasible());
            }
            for &a in &self.artificials {
                self.upper[a] = 0.0;
                if self.state[a] == VarState::AtUpper {
                    self.state[a] = VarState::AtLower;
                }
            }
            self.phase = Phase::Two;
            self.refactor()?;
        }
        if let Step::Unbounded = self.run()? {
            return Ok(LpSolution::unbounded());
        }
        self.refactor()?;
        let values: Vec<f64> = self.user_vars.iter().map(|&j| self.value(j)).collect();
        let objective_value = self
            .user_vars
            .iter()
            .zip(&values)
            .map(|(&j, x)| self.cost[j] * x)
            .sum();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            values,
            objective_value,
            duals: Some(self.duals()),
        })
    }

    fn run(&mut self) -> Result<Step, LpError> {
        let mut streak = 0usize;
        loop {
            if self.iterations >= self.iteration_limit() {
                return Err(LpError::IterationLimit(self.iterations));
            }
            self.iterations += 1;
            let bland = streak >= DEGENERACY_STREAK;
            match self.iterate(bland, &mut streak)? {
                Step::Moved => {}
                other => return Ok(other),
            }
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &var) in self.basis.iter().enumerate() {
            let c = self.phase_cost(var);
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
        y
    }

    fn iterate(&mut self, bland: bool, streak: &mut usize) -> Result<Step, LpError> {
        let y = self.duals();

        // Pricing.
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..self.cols.len() {
            let st = self.state[j];
            if matches!(st, VarState::Basic(_)) || self.upper[j] <= self.lower[j] {
                continue;
            }
            let d = self.phase_cost(j) - self.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>();
            let improving = match st {
                VarState::AtLower => d < -OPTIMALITY_TOL,
                VarState::AtUpper => d > OPTIMALITY_TOL,
                VarState::Basic(_) => false,
            };
            if !improving {
                continue;
            }
            if bland {
                entering = Some((j, d));
                break;
            }
            if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                entering = Some((j, d));
            }
        }
        let Some((q, _)) = entering else {
            return Ok(Step::Optimal);
        };

        // alpha = B^{-1} a_q
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(i, a) in &self.cols[q] {
            for (k, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[k * m + i] * a;
            }
        }
        let dir = if self.state[q] == VarState::AtLower {
            1.0
        } else {
            -1.0
        };

        // Ratio test: basic k moves at rate -dir * alpha_k per unit step.
        let mut theta = f64::INFINITY;
        for k in 0..m {
            if let Some(limit) = self.row_limit(k, dir * alpha[k]) {
                theta = theta.min(limit);
            }
        }
        let flip = self.upper[q] - self.lower[q];
        if flip <= theta {
            if !flip.is_finite() {
                return Ok(Step::Unbounded);
            }
            for k in 0..m {
                self.xb[k] -= dir * flip * alpha[k];
            }
            self.state[q] = if dir > 0.0 {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            *streak = if flip < DEGENERATE_STEP {
                *streak + 1
            } else {
                0
            };
            return Ok(Step::Moved);
        }

        let mut leave: Option<usize> = None;
        for k in 0..m {
            let Some(limit) = self.row_limit(k, dir * alpha[k]) else {
                continue;
            };
            if limit > theta + RATIO_TIE_TOL {
                continue;
            }
            leave = match leave {
                None => Some(k),
                Some(prev) if bland => {
                    if self.basis[k] < self.basis[prev] {
                        Some(k)
                    } else {
                        Some(prev)
                    }
                }
                Some(prev) => {
                    if alpha[k].abs() > alpha[prev].abs() {
                        Some(k)
                    } else {
                        Some(prev)
                    }
                }
            };
        }
        let r = leave.expect("finite ratio implies a leaving row");
        let theta = theta.max(0.0);

        for k in 0..m {
            self.xb[k] -= dir * theta * alpha[k];
        }
        let leaving = self.basis[r];
        self.state[leaving] = if dir * alpha[r] > 0.0 {
            VarState::AtLower
        } else {
            VarState::AtUpper
        };
        let entering_value = match self.state[q] {
            VarState::AtLower => self.lower[q] + theta,
            _ => self.upper[q] - theta,
        };
        self.state[q] = VarState::Basic(r);
        self.basis[r] = q;
        self.xb[r] = entering_value;

        let pivot = alpha[r];
        for c in 0..m {
            self.binv[r * m + c] /= pivot;
        }
        for k in 0..m {
            if k == r || alpha[k] == 0.0 {
                continue;
            }
            let f = alpha[k];
            for c in 0..m {
                self.binv[k * m + c] -= f * self.binv[r * m + c];
            }
        }

        *streak = if theta < DEGENERATE_STEP {
            *streak + 1
        } else {
            0
        };
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(Step::Moved)
    }

    /// Largest step before basic row `k` hits a bound, given it decreases at `rate`.
    fn row_limit(&self, k: usize, rate: f64) -> Option<f64> {
        if rate.abs() <= PIVOT_TOL {
            return None;
        }
        let var = self.basis[k];
        let x = self.xb[k];
        if rate > 0.0 {
            let l = self.lower[var];
            l.is_finite().then(|| ((x - l) / rate).max(0.0))
        } else {
            let u = self.upper[var];
            u.is_finite().then(|| ((u - x) / -rate).max(0.0))
        }
    }

    /// Recomputes the basis inverse from scratch and the basic values from it.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &var) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[var] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&x, &y| a[x * m + col].abs().total_cmp(&a[y * m + col].abs()))
                .unwrap();
            if a[piv * m + col].abs() < 1e-13 {
                return Err(LpError::SingularBasis);
            }
            if piv != col {
                for c in 0..m {
                    a.swap(piv * m + c, col * m + c);
                    inv.swap(piv * m + c, col * m + c);
                }
            }
            let p = a[col * m + col];
            for c in 0..m {
                a[col * m + c] /= p;
                inv[col * m + c] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    a[r * m + c] -= f * a[col * m + c];
                    inv[r * m + c] -= f * inv[col * m + c];
                }
            }
        }
        self.binv = inv;

        let mut residual = self.rhs.clone();
        for j in 0..self.cols.len() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let x = self.value(j);
            if x != 0.0 {
                for &(i, v) in &self.cols[j] {
                    residual[i] -= v * x;
                }
            }
        }
        for k in 0..m {
            self.xb[k] = (0..m).map(|c| self.binv[k * m + c] * residual[c]).sum();
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warm_start_after_adding_columns() {
        // max x1 + 2 x2 s.t. x1 + x2 <= 1 (as min of the negation)
        let mut lp = LinearProgram::new(1);
        lp.set_objective(vec![(0, -1.0)]);
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, 1.0);
        let mut s = Simplex::new(&lp).unwrap();
        let first = s.solve().unwrap();
        assert!((first.objective_value + 1.0).abs() < 1e-12);

        let j = s.add_column(-2.0, vec![(0, 1.0)], None);
        assert_eq!(j, 1);
        let second = s.solve().unwrap();
        assert!((second.objective_value + 2.0).abs() < 1e-12);
        assert!((second.values[1] - 1.0).abs() < 1e-12);
        assert!(second.values[0].abs() < 1e-12);
    }

    #[test]
    fn phase_one_with_equalities() {
        let mut lp = LinearProgram::new(3);
        lp.set_objective(vec![(0, 1.0), (1, 2.0), (2, 3.0)]);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Eq, 6.0);
        lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Relation::Eq, 1.0);
        lp.add_constraint(vec![(2, 1.0)], Relation::Ge, 1.0);
        let sol = Simplex::new(&lp).unwrap().solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // x2 = 1, x0 + x1 = 5, x0 - x1 = 1 -> x0 = 3, x1 = 2
        assert!((sol.objective_value - (3.0 + 4.0 + 3.0)).abs() < 1e-9);
    }
}
