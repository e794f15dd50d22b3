//! Capacity/reliability frontier for a small synthetic fleet, printed as CSV.

use evpool::experiment::{run_frontier, write_frontier_csv, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig {
        alpha_grid: vec![0.7, 0.8, 0.9, 0.95],
        n_grid: vec![25],
        heuristic_trials: 3,
        seed: 4,
        ..Default::default()
    };
    let rows = run_frontier(&config)?;
    write_frontier_csv(&rows, false, std::io::stdout())?;
    Ok(())
}
