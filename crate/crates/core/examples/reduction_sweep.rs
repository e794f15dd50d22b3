//! Relative capacity reduction from sharing as the fleet grows.
//!
//! cargo run --release --example reduction_sweep

use evpool::experiment::{run_reduction_sweep, write_sweep_csv, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig {
        alpha_grid: vec![0.75, 0.85, 0.95],
        n_grid: vec![5, 25, 65, 105],
        trials: 5,
        seed: 1,
        ..Default::default()
    };
    let rows = run_reduction_sweep(&config)?;
    write_sweep_csv(&rows, std::io::stdout())?;
    Ok(())
}
