//! Sparse linear programs and a deterministic revised simplex solver.
//!
//! Programs are always minimizations. Every variable carries a finite lower
//! bound and an optional upper bound; rows are `≤`, `≥` or `=` against a
//! scalar right-hand side.

mod format;
mod presolve;
mod simplex;

use std::fmt;

use thiserror::Error;

pub use format::{parse_debug_text, to_debug_text};
pub use simplex::Simplex;

/// Primal feasibility tolerance used by the solver.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost tolerance used by the solver.
pub const OPTIMALITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} references variable {index} but the program has {n_vars} variables")]
    IndexOutOfRange {
        row: usize,
        index: usize,
        n_vars: usize,
    },
    #[error("non-finite coefficient in {location}")]
    NonFinite { location: String },
    #[error("variable {var} has invalid bounds [{lower}, {upper:?}]")]
    InvalidBounds {
        var: usize,
        lower: f64,
        upper: Option<f64>,
    },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("simplex did not terminate within {0} iterations")]
    IterationLimit(usize),
    #[error("basis matrix became singular")]
    SingularBasis,
    #[error("malformed program text at line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse `(variable, coefficient)` pairs.
    pub row: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(row: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self { row, relation, rhs }
    }

    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.row.iter().map(|&(j, a)| a * values[j]).sum()
    }

    fn norm(&self) -> f64 {
        self.row.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableBounds {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl VariableBounds {
    pub const NON_NEGATIVE: VariableBounds = VariableBounds {
        lower: 0.0,
        upper: None,
    };

    pub fn new(lower: f64, upper: Option<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn upper_or_inf(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }
}

/// A minimization problem `min c·x` subject to sparse rows and box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VariableBounds>,
}

impl LinearProgram {
    /// Creates a program over `n_vars` non-negative variables with a zero objective.
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: Vec::new(),
            constraints: Vec::new(),
            bounds: vec![VariableBounds::NON_NEGATIVE; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.bounds.len()
    }

    pub fn set_objective(&mut self, objective: Vec<(usize, f64)>) -> &mut Self {
        self.objective = objective;
        self
    }

    pub fn add_constraint(
        &mut self,
        row: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint::new(row, relation, rhs));
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) -> &mut Self {
        self.bounds[var] = VariableBounds::new(lower, upper);
        self
    }

    pub fn dense_objective(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_vars()];
        for &(j, v) in &self.objective {
            c[j] += v;
        }
        c
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        for (j, b) in self.bounds.iter().enumerate() {
            let bad_upper = b.upper.is_some_and(|u| u.is_nan() || u < b.lower);
            if !b.lower.is_finite() || bad_upper {
                return Err(LpError::InvalidBounds {
                    var: j,
                    lower: b.lower,
                    upper: b.upper,
                });
            }
        }
        for &(j, c) in &self.objective {
            if j >= n {
                return Err(LpError::IndexOutOfRange {
                    row: usize::MAX,
                    index: j,
                    n_vars: n,
                });
            }
            if !c.is_finite() {
                return Err(LpError::NonFinite {
                    location: format!("objective entry for variable {j}"),
                });
            }
        }
        for (i, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(LpError::NonFinite {
                    location: format!("rhs of row {i}"),
                });
            }
            for &(j, a) in &con.row {
                if j >= n {
                    return Err(LpError::IndexOutOfRange {
                        row: i,
                        index: j,
                        n_vars: n,
                    });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite {
                        location: format!("row {i}, variable {j}"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable assignment; empty unless `status` is optimal.
    pub values: Vec<f64>,
    /// `+inf` when infeasible, `-inf` when unbounded.
    pub objective_value: f64,
    /// Row multipliers of the optimal basis (`≥` rows non-negative, `≤` rows non-positive).
    pub duals: Option<Vec<f64>>,
}

impl LpSolution {
    pub(crate) fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            values: Vec::new(),
            objective_value: f64::INFINITY,
            duals: None,
        }
    }

    pub(crate) fn unbounded() -> Self {
        Self {
            status: LpStatus::Unbounded,
            values: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            duals: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `program` to optimality, or reports infeasibility / unboundedness.
///
/// Identical programs always produce identical solutions: pricing and ratio
/// tests break ties by index and no randomness is involved.
pub fn solve_lp(program: &LinearProgram) -> Result<LpSolution, LpError> {
    program.validate()?;
    let reduced = match presolve::presolve(program) {
        presolve::Outcome::Infeasible => return Ok(LpSolution::infeasible()),
        presolve::Outcome::Reduced(r) => r,
    };
    let mut simplex = Simplex::new(&reduced.program)?;
    let inner = simplex.solve()?;
    match inner.status {
        LpStatus::Infeasible => Ok(LpSolution::infeasible()),
        LpStatus::Unbounded => Ok(LpSolution::unbounded()),
        LpStatus::Optimal if reduced.unbounded_if_feasible => Ok(LpSolution::unbounded()),
        LpStatus::Optimal => Ok(reduced.postsolve(program, &inner)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    Row(usize),
    LowerBound(usize),
    UpperBound(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// `lhs - rhs` for rows, `value - bound` for bounds.
    pub residual: f64,
    /// Amount by which the constraint is violated (always positive).
    pub magnitude: f64,
}

/// Lists every row or bound of `program` violated by `values` beyond `tol`.
///
/// Row tolerances scale with `max(1, ‖row‖₂)`.
pub fn check_feasibility(
    program: &LinearProgram,
    values: &[f64],
    tol: f64,
) -> Result<Vec<Violation>, LpError> {
    if values.len() != program.n_vars() {
        return Err(LpError::DimensionMismatch {
            expected: program.n_vars(),
            got: values.len(),
        });
    }
    program.validate()?;
    let mut report = Vec::new();
    for (i, con) in program.constraints.iter().enumerate() {
        let residual = con.lhs(values) - con.rhs;
        let magnitude = match con.relation {
            Relation::Le => residual.max(0.0),
            Relation::Ge => (-residual).max(0.0),
            Relation::Eq => residual.abs(),
        };
        if magnitude > tol * con.norm().max(1.0) {
            report.push(Violation {
                kind: ViolationKind::Row(i),
                residual,
                magnitude,
            });
        }
    }
    for (j, (b, &x)) in program.bounds.iter().zip(values).enumerate() {
        if x < b.lower - tol {
            report.push(Violation {
                kind: ViolationKind::LowerBound(j),
                residual: x - b.lower,
                magnitude: b.lower - x,
            });
        }
        if let Some(u) = b.upper {
            if x > u + tol {
                report.push(Violation {
                    kind: ViolationKind::UpperBound(j),
                    residual: x - u,
                    magnitude: x - u,
                });
            }
        }
    }
    Ok(report)
}

/// Lagrangian lower bound on the optimum implied by row multipliers `duals`.
///
/// Returns `-inf` when the multipliers have the wrong sign for a row or leave
/// an unbounded variable with a negative reduced cost.
pub fn dual_objective(program: &LinearProgram, duals: &[f64]) -> f64 {
    let mut reduced = program.dense_objective();
    let mut value = 0.0;
    for (con, &y) in program.constraints.iter().zip(duals) {
        let wrong_sign = match con.relation {
            Relation::Ge => y < -OPTIMALITY_TOL,
            Relation::Le => y > OPTIMALITY_TOL,
            Relation::Eq => false,
        };
        if wrong_sign {
            return f64::NEG_INFINITY;
        }
        value += con.rhs * y;
        for &(j, a) in &con.row {
            reduced[j] -= a * y;
        }
    }
    for (d, b) in reduced.iter().zip(&program.bounds) {
        if *d >= 0.0 {
            value += d * b.lower;
        } else {
            match b.upper {
                Some(u) => value += d * u,
                None if *d < -OPTIMALITY_TOL => return f64::NEG_INFINITY,
                None => {}
            }
        }
    }
    value
}
