//! Gap between per-driver quantile batteries and the explicit pooled
//! construction for independent Gaussian demand.

use evpool::analysis::{
    gaussian_gap_experiment, gaussian_nonshared_opt, mc_rectified_sum_mean, write_gap_csv,
    GaussianFleetSpec, GaussianGapConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GaussianFleetSpec {
        n_drivers: 50,
        mu: 10.0,
        sigma: 2.0,
        alpha: 0.9,
    };
    let mc = mc_rectified_sum_mean(&spec, 100_000, 1)?;
    println!(
        "N=50: mean aggregate shortfall {:.3} (closed form {:.3}), non-shared optimum {:.2}",
        mc,
        spec.expected_aggregate_shortfall(),
        gaussian_nonshared_opt(&spec)?
    );

    let rows = gaussian_gap_experiment(
        &[25, 50, 100, 200, 400, 800, 1600],
        &GaussianGapConfig::default(),
        7,
    )?;
    write_gap_csv(&rows, std::io::stdout())?;
    Ok(())
}
