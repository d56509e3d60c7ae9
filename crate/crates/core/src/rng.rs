//! Seed derivation.
//!
//! Every randomized component draws from a ChaCha stream selected by a
//! `(seed, stream)` pair, so a replicate's draws depend only on its index and
//! never on which worker evaluated it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(tag, index)` under `seed`. Distinct tags give unrelated
/// seed families for the same parent.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = mix(seed);
    for b in tag.bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ mix(index))
}

/// A fresh seed from OS entropy, for runs where the user supplied none.
pub fn fresh_seed() -> u64 {
    rand::random()
}
