//! Splits a shared pool among drivers under each allocation rule, first when
//! the pool covers the aggregate shortfall and then when it does not.

use evpool::allocation::{allocate_fcfs, allocate_proportional, allocate_utilitarian, shortfall};
use evpool::BatteryConfig;

fn show(
    label: &str,
    config: &BatteryConfig,
    demand: &[f64],
) -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "{label}: pool {} kWh, shortfalls {:?}",
        config.shared,
        shortfall(config, demand)?
    );
    let order = [2, 0, 1];
    for (name, r) in [
        ("proportional", allocate_proportional(config, demand)?),
        ("fcfs 2,0,1", allocate_fcfs(config, demand, &order)?),
        ("utilitarian", allocate_utilitarian(config, demand)?),
    ] {
        println!(
            "  {name:<13} allocations {:?} satisfied {:?}",
            r.allocations, r.satisfied
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demand = [14.0, 9.0, 12.0];
    let personal = vec![10.0, 8.0, 6.0];
    show(
        "covered",
        &BatteryConfig {
            personal: personal.clone(),
            shared: 11.0,
        },
        &demand,
    )?;
    show(
        "scarce",
        &BatteryConfig {
            personal,
            shared: 5.0,
        },
        &demand,
    )?;
    Ok(())
}
