//! Drops empty rows and columns and substitutes fixed variables.

use super::{Constraint, LinearProgram, LpSolution, LpStatus, Relation, FEASIBILITY_TOL};

pub(super) enum Outcome {
    Infeasible,
    Reduced(Reduced),
}

pub(super) struct Reduced {
    pub program: LinearProgram,
    /// Original index -> reduced index, or the value it was fixed at.
    columns: Vec<Column>,
    /// Reduced row -> original row.
    rows: Vec<usize>,
    /// An empty column with negative cost and no upper bound.
    pub unbounded_if_feasible: bool,
}

#[derive(Clone, Copy)]
enum Column {
    Kept(usize),
    Fixed(f64),
}

pub(super) fn presolve(program: &LinearProgram) -> Outcome {
    let n = program.n_vars();
    let cost = program.dense_objective();
    let fixed: Vec<Option<f64>> = program
        .bounds
        .iter()
        .map(|b| (b.upper == Some(b.lower)).then_some(b.lower))
        .collect();

    let mut used = vec![false; n];
    let mut rows = Vec::new();
    let mut constraints = Vec::new();
    for (i, con) in program.constraints.iter().enumerate() {
        let mut rhs = con.rhs;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(j, a) in &con.row {
            if a == 0.0 {
                continue;
            }
            match fixed[j] {
                Some(v) => rhs -= a * v,
                None => row.push((j, a)),
            }
        }
        if row.is_empty() {
            let ok = match con.relation {
                Relation::Le => 0.0 <= rhs + FEASIBILITY_TOL,
                Relation::Ge => 0.0 >= rhs - FEASIBILITY_TOL,
                Relation::Eq => rhs.abs() <= FEASIBILITY_TOL,
            };
            if !ok {
                return Outcome::Infeasible;
            }
            continue;
        }
        for &(j, _) in &row {
            used[j] = true;
        }
        rows.push(i);
        constraints.push(Constraint::new(row, con.relation, rhs));
    }

    let mut columns = Vec::with_capacity(n);
    let mut bounds = Vec::new();
    let mut unbounded_if_feasible = false;
    for j in 0..n {
        let b = program.bounds[j];
        if let Some(v) = fixed[j] {
            columns.push(Column::Fixed(v));
        } else if !used[j] {
            let v = if cost[j] >= 0.0 {
                b.lower
            } else if let Some(u) = b.upper {
                u
            } else {
                unbounded_if_feasible = true;
                b.lower
            };
            columns.push(Column::Fixed(v));
        } else {
            columns.push(Column::Kept(bounds.len()));
            bounds.push(b);
        }
    }

    for con in &mut constraints {
        for (j, _) in con.row.iter_mut() {
            match columns[*j] {
                Column::Kept(k) => *j = k,
                Column::Fixed(_) => unreachable!("fixed columns were substituted"),
            }
        }
    }
    let objective = cost
        .iter()
        .enumerate()
        .filter_map(|(j, &c)| match columns[j] {
            Column::Kept(k) if c != 0.0 => Some((k, c)),
            _ => None,
        })
        .collect();

    Outcome::Reduced(Reduced {
        program: LinearProgram {
            objective,
            constraints,
            bounds,
        },
        columns,
        rows,
        unbounded_if_feasible,
    })
}

impl Reduced {
    pub fn postsolve(&self, original: &LinearProgram, inner: &LpSolution) -> LpSolution {
        let values: Vec<f64> = self
            .columns
            .iter()
            .map(|c| match *c {
                Column::Kept(k) => inner.values[k],
                Column::Fixed(v) => v,
            })
            .collect();
        let duals = inner.duals.as_ref().map(|inner_duals| {
            let mut d = vec![0.0; original.constraints.len()];
            for (k, &i) in self.rows.iter().enumerate() {
                d[i] = inner_duals[k];
            }
            d
        });
        LpSolution {
            status: LpStatus::Optimal,
            objective_value: original.objective_value(&values),
            values,
            duals,
        }
    }
}
