#![allow(dead_code)]

pub mod oracles;

use cindep::data::Dataset;
use cindep::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// `X = a + z, Y = b + z` with standard normal ingredients.
pub fn m1_data(n: usize, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 7);
    let mut draw = || -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
    let (a, b, z) = (draw(), draw(), draw());
    let x = a.iter().zip(&z).map(|(a, z)| a + z).collect();
    let y = b.iter().zip(&z).map(|(b, z)| b + z).collect();
    Dataset::continuous([("x", x), ("y", y), ("z", z)]).unwrap()
}
