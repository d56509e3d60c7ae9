//! Test on count data through the randomized probability integral transform.
//!
//! X and Y are Poisson draws whose rate depends on a shared discrete Z.

use cindep::citest::{run_test, TestSpec};
use cindep::data::Dataset;
use cindep::nulldist::NullCache;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 300;
    let z: Vec<f64> = (0..n).map(|_| rng.random_range(0..3) as f64).collect();
    let draw = |rng: &mut ChaCha8Rng, rate: f64| rng.sample(Poisson::new(rate).unwrap());
    let x: Vec<f64> = z.iter().map(|&z| draw(&mut rng, 1.0 + z)).collect();
    let y_ci: Vec<f64> = z.iter().map(|&z| draw(&mut rng, 1.0 + z)).collect();
    let y_dep: Vec<f64> = x.iter().map(|&x| draw(&mut rng, 0.5 + x)).collect();

    let data = Dataset::continuous([("x", x), ("y_ci", y_ci), ("y_dep", y_dep), ("z", z)])?
        .with_discrete(&["x", "y_ci", "y_dep", "z"])?;
    let cache = NullCache::from_env();
    for y in ["y_ci", "y_dep"] {
        let spec = TestSpec::new(["x"], [y], ["z"]).seed(1);
        let r = run_test(&data, &spec, &cache)?;
        println!("x vs {y} given z: p-value {:.4}  reject {}", r.p_value, r.reject);
    }
    Ok(())
}
