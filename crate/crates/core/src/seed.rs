//! Named random substreams.
//!
//! Every random decision in the crate flows from one master seed. Components
//! derive their own seed from `(master, name, index)` so that adding a draw
//! in one place never shifts the stream seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere. ChaCha output is portable across
/// platforms, which the byte-stability guarantees rely on.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed for the substream `name`/`index` of `master`.
pub fn substream(master: u64, name: &str, index: u64) -> u64 {
    let mut h = fnv_bytes(name.as_bytes());
    h = mix(h ^ master);
    mix(h ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn fnv_bytes(bytes: &[u8]) -> u64 {
    use std::hash::Hasher;
    let mut hasher = fnv::FnvHasher::default();
    hasher.write(bytes);
    hasher.finish()
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
