//! Simulate, cache and query a null table.
//!
//! With `CINDEP_CACHE_DIR` set, the table is written once and reused.

use cindep::nulldist::{critical_value, p_value, NullCache, NullKey, StatisticKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cache = NullCache::from_env();
    let key = NullKey::new(100, (1, 1, 1), 2000, 1, StatisticKind::RhoNormalized);
    let table = cache.get_or_build(key)?;
    if let Some(path) = cache.path_for(&key) {
        println!("cache file: {}", path.display());
    }
    for alpha in [0.10, 0.05, 0.01] {
        println!("critical value at {alpha}: {:.6e}", critical_value(&table, alpha)?);
    }
    let observed = table.stats[table.stats.len() / 2];
    println!("p-value of the median null draw: {:.3}", p_value(&table, observed));
    Ok(())
}
