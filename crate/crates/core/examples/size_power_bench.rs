//! Empirical size and power of the test on the benchmark models.
//!
//! cargo run --release --example size_power_bench -- M1,M2,M3 100 200

use cindep::nulldist::NullCache;
use cindep::simbench::{parse_models, size_power_run, BenchOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let models = parse_models(args.first().map_or("M1,M2,M3,M4", String::as_str))?;
    let n = args.get(1).map_or(Ok(100), |s| s.parse())?;
    let reps = args.get(2).map_or(Ok(200), |s| s.parse())?;
    let opts = BenchOptions {
        timing: true,
        ..BenchOptions::default()
    };
    let cache = NullCache::from_env();
    let report = size_power_run(&models, n, &[0.05, 0.10], reps, 2024, &opts, &cache)?;
    print!("{}", report.to_text());
    Ok(())
}
