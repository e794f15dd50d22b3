//! Estimates per-driver and aggregate reliability of a hand-picked shared
//! configuration with a Chernoff-sized evaluation sample.

use evpool::allocation::RuleKind;
use evpool::ingest::{generate_synthetic_fleet, sample_scenarios, DemandModel, SyntheticFleetSpec};
use evpool::reliability::{chernoff_sample_size, estimate_min_reliability};
use evpool::BatteryConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticFleetSpec {
        n_drivers: 20,
        ..Default::default()
    };
    let fleet = generate_synthetic_fleet(&spec)?;
    let personal: Vec<f64> = fleet.iter().map(|m| m.mean() * 1.2).collect();
    let models: Vec<DemandModel> = fleet.into_iter().map(Into::into).collect();

    let (epsilon, delta) = (0.02, 0.05);
    let m = chernoff_sample_size(models.len(), epsilon, delta)?;
    let eval = sample_scenarios(&models, m, 5)?;
    println!(
        "{m} evaluation days give ±{epsilon} at confidence {}",
        1.0 - delta
    );

    for shared in [0.0, 20.0, 60.0, 120.0] {
        let config = BatteryConfig {
            personal: personal.clone(),
            shared,
        };
        print!("pool {shared:>5.1} kWh:");
        for rule in RuleKind::ALL {
            let est = estimate_min_reliability(&config, rule, &eval, 9)?;
            print!("  {rule} {:.4}", est.min_over_drivers);
        }
        let est = estimate_min_reliability(&config, RuleKind::Utilitarian, &eval, 9)?;
        println!("  | aggregate {:.4}", est.aggregate);
    }
    Ok(())
}
