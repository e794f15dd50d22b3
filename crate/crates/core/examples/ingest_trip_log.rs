//! Turns a trip log into per-driver daily demand histograms.
//!
//! cargo run --example ingest_trip_log -- [trips.csv]
//!
//! Without an argument a small log is written to a temporary file first.

use std::io::Write;

use evpool::ingest::{
    fit_histogram, parse_trip_log, DEFAULT_BIN_WIDTH_KWH, DEFAULT_EFFICIENCY_MI_PER_KWH,
};

const DEMO_LOG: &str = "\
driver_id,date,miles
car-a,2024-03-01,12.5
car-a,2024-03-01,30.0
car-a,2024-03-02,8.0
car-a,2024-03-04,61.0
car-b,2024-03-01,4.0
car-b,2024-03-03,22.5
car-b,2024-03-03,3.5
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            let path = std::env::temp_dir().join("evpool_demo_trips.csv");
            std::fs::File::create(&path)?.write_all(DEMO_LOG.as_bytes())?;
            path
        }
    };

    let series = parse_trip_log(&path, DEFAULT_EFFICIENCY_MI_PER_KWH)?;
    for s in &series {
        let model = fit_histogram(s, DEFAULT_BIN_WIDTH_KWH, true)?;
        println!(
            "{} ({} days incl. idle days)",
            s.driver_id,
            s.samples(true).len()
        );
        for (k, p) in model.bin_probs.iter().enumerate() {
            if *p > 0.0 {
                println!(
                    "  [{:>5.1}, {:>5.1}) kWh  p = {:.3}",
                    model.bin_edges[k],
                    model.bin_edges[k + 1],
                    p
                );
            }
        }
        println!(
            "  mean {:.2} kWh, P(demand <= 10 kWh) = {:.3}",
            model.mean(),
            model.cdf(10.0)
        );
    }
    Ok(())
}
