//! Named, independent random streams derived from one user seed, so that
//! results do not depend on how repetitions are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SamplerRng = ChaCha8Rng;

pub(crate) const POOL_STREAM: u64 = 1;
pub(crate) const WALK_STREAM: u64 = 2;
pub(crate) const EXACT_STREAM: u64 = 3;
pub(crate) const LENGTH_STREAM: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the stream identified by `path` (e.g. `[tag, repetition, round, walk]`).
pub fn stream_rng(seed: u64, path: &[u64]) -> SamplerRng {
    let id = path
        .iter()
        .fold(0x5eed_u64, |acc, &part| splitmix64(acc ^ splitmix64(part)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
