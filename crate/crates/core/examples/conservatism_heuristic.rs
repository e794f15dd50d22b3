//! Plans a shared fleet with the conservatism-reduction heuristic and
//! compares it with per-driver quantile batteries.
//!
//! cargo run --release --example conservatism_heuristic -- 25 0.9

use std::time::Instant;

use evpool::ingest::{generate_synthetic_fleet, sample_scenarios, DemandModel, SyntheticFleetSpec};
use evpool::planner::{conservatism_heuristic, plan_nonshared_from_scenarios, PlannerParams};
use evpool::reliability::{chernoff_sample_size, estimate_aggregate_reliability};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(25);
    let alpha: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.9);

    let fleet = SyntheticFleetSpec {
        n_drivers: n,
        ..Default::default()
    };
    let models: Vec<DemandModel> = generate_synthetic_fleet(&fleet)?
        .into_iter()
        .map(Into::into)
        .collect();
    let params = PlannerParams {
        alpha,
        trials: 5,
        seed: 11,
        ..Default::default()
    };

    let started = Instant::now();
    let out = conservatism_heuristic(&models, &params)?;
    println!("heuristic finished in {:.2?}", started.elapsed());
    for t in &out.trials {
        println!(
            "  trial {}: {} scenarios, total {:.1} kWh, alpha_hat {:.4}",
            t.trial,
            t.bisection.n_scenarios,
            t.bisection.config.total(),
            t.bisection.empirical_alpha
        );
    }

    let m = chernoff_sample_size(n, params.epsilon, params.delta)?;
    let fresh = sample_scenarios(&models, m, 999)?;
    let nonshared = plan_nonshared_from_scenarios(&sample_scenarios(&models, m, 998)?, alpha)?;
    println!("selected trial {}", out.selected_trial);
    println!(
        "shared:     personal {:.1} + pool {:.1} = {:.1} kWh, fresh aggregate reliability {:.4}",
        out.config.personal.iter().sum::<f64>(),
        out.config.shared,
        out.config.total(),
        estimate_aggregate_reliability(&out.config, &fresh)?
    );
    println!("non-shared: {:.1} kWh", nonshared.total());
    println!(
        "relative reduction {:.1}%",
        100.0 * (1.0 - out.config.total() / nonshared.total())
    );
    Ok(())
}
