//! Solves the sampled aggregate-shortfall program two ways and then bisects
//! the scenario count toward a reliability target.

use std::time::Instant;

use evpool::ingest::{generate_synthetic_fleet, sample_scenarios, DemandModel, SyntheticFleetSpec};
use evpool::planner::{
    binary_search_reduce, scenario_count, solve_scenario_lp_direct, solve_scenario_problem,
};
use evpool::reliability::chernoff_sample_size;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticFleetSpec {
        n_drivers: 8,
        ..Default::default()
    };
    let models: Vec<DemandModel> = generate_synthetic_fleet(&spec)?
        .into_iter()
        .map(Into::into)
        .collect();

    let small = sample_scenarios(&models, 40, 1)?;
    let t = Instant::now();
    let direct = solve_scenario_lp_direct(&small)?;
    let dt = t.elapsed();
    let t = Instant::now();
    let cuts = solve_scenario_problem(&small)?;
    println!(
        "40 scenarios: explicit LP {:.4} ({dt:.1?}), cutting planes {:.4} ({:.1?}, {} cuts)",
        direct.objective,
        cuts.objective,
        t.elapsed(),
        cuts.cuts
    );

    let alpha = 0.9;
    let m = scenario_count(models.len(), alpha, 0.05)?;
    let scenarios = sample_scenarios(&models, m, 2)?;
    let full = solve_scenario_problem(&scenarios)?;
    println!(
        "{m} scenarios: total {:.2} kWh, pool {:.2} kWh",
        full.objective, full.config.shared
    );

    let eval = sample_scenarios(&models, chernoff_sample_size(models.len(), 0.02, 0.05)?, 3)?;
    let out = binary_search_reduce(&scenarios, &eval, alpha)?;
    for it in &out.iterates {
        println!(
            "  m = {:>4}  total {:>8.2}  alpha_hat {:.4}",
            it.n_scenarios,
            it.config.total(),
            it.empirical_alpha
        );
    }
    println!(
        "kept {} scenarios: total {:.2} kWh, alpha_hat {:.4}{}",
        out.n_scenarios,
        out.config.total(),
        out.empirical_alpha,
        if out.below_target {
            " (below target)"
        } else {
            ""
        }
    );
    Ok(())
}
