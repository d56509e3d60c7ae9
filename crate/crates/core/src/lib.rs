pub mod causal;
pub mod citest;
pub mod cli;
pub mod data;
pub mod error;
pub mod kernels;
pub mod nulldist;
pub mod rng;
pub mod simbench;
pub mod statistic;
pub mod transforms;

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
mod oracles;
