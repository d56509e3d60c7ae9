//! PC discovery on a random linear Gaussian DAG, scored against the truth.

use cindep::causal::{pc, tpr_fpr, PartialCorrelationOracle, RhoOracle};
use cindep::citest::TestSpec;
use cindep::nulldist::NullCache;
use cindep::simbench::{random_dag_instance, Noise};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (truth, data) = random_dag_instance(5, 0.4, 300, Noise::Normal, 17)?;
    let cache = NullCache::from_env();
    let names = data.names();
    let true_edges: Vec<String> =
        truth.edges.iter().map(|&(a, b)| format!("{} -> {}", names[a], names[b])).collect();
    println!("true DAG: {}", true_edges.join(", "));

    let rho = RhoOracle::new(TestSpec::new::<String>([], [], []), &cache);
    let pcor = PartialCorrelationOracle;
    for (label, cpdag) in [("rho", pc(&data, 0.05, 3, &rho)?), ("pcor", pc(&data, 0.05, 3, &pcor)?)] {
        let (tpr, fpr) = tpr_fpr(&cpdag, &truth)?;
        println!("\n{label}: TPR {tpr:.2} FPR {fpr:.2}");
        print!("{}", cpdag.to_adjacency_text());
    }
    Ok(())
}
