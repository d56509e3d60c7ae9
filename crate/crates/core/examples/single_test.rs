//! One conditional independence test on simulated data.
//!
//! Under M1, X and Y are dependent only through Z, so the test should accept.
//! Under M2 the dependence survives conditioning and it should reject.

use cindep::citest::{run_test, TestSpec};
use cindep::nulldist::NullCache;
use cindep::simbench::{gen_model, ModelId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cache = NullCache::from_env();
    let spec = TestSpec::new(["x"], ["y"], ["z"]).alpha(0.05).reps(1000).seed(7);
    for id in [1, 2] {
        let data = gen_model(ModelId::new(id)?, 200, 11)?;
        let r = run_test(&data, &spec, &cache)?;
        println!(
            "M{id}: statistic {:.5}  p-value {:.4}  reject {}",
            r.statistic.value, r.p_value, r.reject
        );
    }
    Ok(())
}
