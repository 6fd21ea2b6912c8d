//! Seeded random streams.
//!
//! All randomness goes through [`SimRng`] (ChaCha8), which produces the same
//! stream on every platform for a given seed. Independent streams for
//! ensemble members and regenerated graphs are derived with [`derive_seed`],
//! a SplitMix64 finaliser over `(base, domain, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream domains, so that run `i` and graph `i` never share a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Run = 1,
    Graph = 2,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    let h = splitmix64(base ^ splitmix64(stream as u64));
    splitmix64(h ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
