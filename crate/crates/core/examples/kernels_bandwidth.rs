//! Kernel weights, the pair kernel and rule-of-thumb bandwidths.

use cindep::kernels::{kernel_weight, rule_of_thumb_bandwidth, BandwidthPolicy, KernelFamily, KernelSpec};
use cindep::statistic::{s0, C0};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for family in [KernelFamily::Gaussian, KernelFamily::Epanechnikov] {
        let spec = KernelSpec::new(family, 2)?;
        let row: Vec<String> = [0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|&u| format!("{:.4}", kernel_weight(spec, u)))
            .collect();
        println!("{family:<12} K(0, .5, 1, 2) = {}", row.join(", "));
    }

    println!("s0(0.2, 0.7) = {:.6}, c0 = {C0:.6}", s0(0.2, 0.7));

    for c in [0.5, 1.0, 2.0] {
        let policy = BandwidthPolicy::scaled(c)?;
        let hs: Vec<String> = [1, 2, 3]
            .iter()
            .map(|&d| rule_of_thumb_bandwidth(1.0, 500, d, policy).map(|h| format!("{h:.4}")))
            .collect::<Result<_, _>>()?;
        println!("c = {c}: h(sd 1, n 500, d 1..3) = {}", hs.join(", "));
    }
    Ok(())
}
