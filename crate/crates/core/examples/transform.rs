//! Map raw data to (U, V, W) and check the coordinates look uniform.

use cindep::citest::{transform_dataset, TestSpec};
use cindep::simbench::{gen_model, ModelId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = gen_model(ModelId::new(1)?, 500, 4)?;
    let (ts, kind) = transform_dataset(&data, &TestSpec::new(["x"], ["y"], ["z"]))?;
    println!("data kind {kind:?}, n {}, dims {:?}", ts.n(), ts.dims());
    for (name, block) in [("u", &ts.u), ("v", &ts.v), ("w", &ts.w)] {
        let col = block.column(0);
        let mean = col.mean().unwrap_or(f64::NAN);
        let below = col.iter().filter(|&&x| x < 0.25).count() as f64 / ts.n() as f64;
        println!("{name}: mean {mean:.3}  P(< 0.25) {below:.3}");
    }
    println!("bandwidths for u: {:?}", ts.meta.u);
    Ok(())
}
