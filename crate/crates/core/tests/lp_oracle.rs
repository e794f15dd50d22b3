//! Simplex results against brute-force vertex enumeration on small boxed LPs.

use evpool::lp::{
    check_feasibility, dual_objective, parse_debug_text, solve_lp, to_debug_text, LinearProgram,
    LpError, LpStatus, Relation,
};
use proptest::prelude::*;

const BOX: f64 = 10.0;

#[derive(Debug, Clone)]
struct Instance {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl Instance {
    fn program(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.n);
        lp.set_objective(self.objective.iter().copied().enumerate().collect());
        for (a, rel, b) in &self.rows {
            let row = a
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, v)| *v != 0.0)
                .collect();
            lp.add_constraint(row, *rel, *b);
        }
        for j in 0..self.n {
            lp.set_bounds(j, 0.0, Some(BOX));
        }
        lp
    }

    /// Every hyperplane that can be tight at a vertex: rows plus box faces.
    fn hyperplanes(&self) -> Vec<(Vec<f64>, f64)> {
        let mut h: Vec<(Vec<f64>, f64)> =
            self.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
        for j in 0..self.n {
            let mut e = vec![0.0; self.n];
            e[j] = 1.0;
            h.push((e.clone(), 0.0));
            h.push((e, BOX));
        }
        h
    }

    fn feasible(&self, x: &[f64]) -> bool {
        let tol = 1e-7;
        x.iter().all(|&v| v >= -tol && v <= BOX + tol)
            && self.rows.iter().all(|(a, rel, b)| {
                let lhs: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                match rel {
                    Relation::Le => lhs <= b + tol,
                    Relation::Ge => lhs >= b - tol,
                    Relation::Eq => (lhs - b).abs() <= tol,
                }
            })
    }

    /// Minimum over all feasible vertices, or `None` when infeasible.
    fn vertex_optimum(&self) -> Option<f64> {
        let planes = self.hyperplanes();
        let mut best: Option<f64> = None;
        for combo in combinations(planes.len(), self.n) {
            let a: Vec<Vec<f64>> = combo.iter().map(|&k| planes[k].0.clone()).collect();
            let b: Vec<f64> = combo.iter().map(|&k| planes[k].1).collect();
            let Some(x) = solve_square(a, b) else {
                continue;
            };
            if self.feasible(&x) {
                let v: f64 = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(v, |b| b.min(v)));
            }
        }
        best
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn relation() -> impl Strategy<Value = Relation> {
    prop_oneof![3 => Just(Relation::Le), 2 => Just(Relation::Ge), 1 => Just(Relation::Eq)]
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=3).prop_flat_map(|n| {
        let coef = || (-5i32..=5).prop_map(f64::from);
        let row = (
            prop::collection::vec(coef(), n),
            relation(),
            (-10i32..=25).prop_map(f64::from),
        );
        (
            Just(n),
            prop::collection::vec(coef(), n),
            prop::collection::vec(row, 0..=4),
        )
            .prop_map(|(n, objective, rows)| Instance { n, objective, rows })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn simplex_matches_vertex_enumeration(inst in instance()) {
        let lp = inst.program();
        let sol = solve_lp(&lp).unwrap();
        match inst.vertex_optimum() {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(opt) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective_value - opt).abs() <= 1e-6 * (1.0 + opt.abs()),
                    "simplex {} vs vertices {}", sol.objective_value, opt);
                prop_assert!(check_feasibility(&lp, &sol.values, 1e-7).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn duals_certify_optimality(inst in instance()) {
        let lp = inst.program();
        let sol = solve_lp(&lp).unwrap();
        prop_assume!(sol.is_optimal());
        let bound = dual_objective(&lp, sol.duals.as_ref().unwrap());
        prop_assert!((bound - sol.objective_value).abs() <= 1e-6 * (1.0 + bound.abs()),
            "dual bound {} vs primal {}", bound, sol.objective_value);
    }

    #[test]
    fn dual_bound_never_exceeds_feasible_points(inst in instance(), y in prop::collection::vec(-3.0f64..3.0, 4)) {
        let lp = inst.program();
        let bound = dual_objective(&lp, &y[..lp.constraints.len()]);
        if let Some(opt) = inst.vertex_optimum() {
            prop_assert!(bound <= opt + 1e-9 * (1.0 + opt.abs()));
        }
    }

    #[test]
    fn debug_text_round_trips(inst in instance()) {
        let lp = inst.program();
        let back = parse_debug_text(&to_debug_text(&lp)).unwrap();
        prop_assert_eq!(back, lp);
    }
}

#[test]
fn unbounded_and_invalid_bounds() {
    let mut lp = LinearProgram::new(2);
    lp.set_objective(vec![(0, -1.0)]);
    lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);

    let mut lp = LinearProgram::new(1);
    lp.set_objective(vec![(0, 1.0)]);
    lp.set_bounds(0, f64::NEG_INFINITY, None);
    assert!(matches!(
        solve_lp(&lp),
        Err(LpError::InvalidBounds { var: 0, .. })
    ));
}
