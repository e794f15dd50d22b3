//! Builds a small production-planning LP, solves it with the bounded simplex,
//! and checks the answer against its dual.

use evpool::lp::{
    check_feasibility, dual_objective, solve_lp, to_debug_text, LinearProgram, Relation,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // max 3x + 5y  s.t.  x ≤ 4,  2y ≤ 12,  3x + 2y ≤ 18  (written as a minimization)
    let mut lp = LinearProgram::new(2);
    lp.set_objective(vec![(0, -3.0), (1, -5.0)]);
    lp.add_constraint(vec![(0, 1.0)], Relation::Le, 4.0);
    lp.add_constraint(vec![(1, 2.0)], Relation::Le, 12.0);
    lp.add_constraint(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
    print!("{}", to_debug_text(&lp));

    let sol = solve_lp(&lp)?;
    println!("status {:?}", sol.status);
    println!("x = {:.4}, y = {:.4}", sol.values[0], sol.values[1]);
    println!("primal objective {:.6}", sol.objective_value);
    if let Some(duals) = &sol.duals {
        println!("row duals {duals:?}");
        println!("dual objective   {:.6}", dual_objective(&lp, duals));
    }
    let violations = check_feasibility(&lp, &sol.values, 1e-9)?;
    println!("violations: {}", violations.len());
    Ok(())
}
