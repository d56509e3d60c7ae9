//! Compare the null law of n·rho under different marginals.
//!
//! cargo run --release --example null_distribution_study -- 100 500

use cindep::nulldist::{NullCache, StatisticKind};
use cindep::simbench::{null_study, Ingredient};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().map_or(Ok(100), |s| s.parse())?;
    let reps = args.get(1).map_or(Ok(500), |s| s.parse())?;
    let cache = NullCache::from_env();
    let report = null_study(
        n,
        reps,
        &Ingredient::ALL,
        StatisticKind::RhoNormalized,
        1.0,
        3,
        5000,
        &cache,
    )?;
    print!("{}", report.to_text());
    Ok(())
}
