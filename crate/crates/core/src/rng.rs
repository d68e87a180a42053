//! Seeded random streams.
//!
//! Every run draws from ChaCha8 keyed by a SplitMix64 expansion of a single
//! `u64`. Sweep runs derive their seed from the base seed and the run's grid
//! coordinates, so the stream a cell sees does not depend on which cells run
//! before it or on how many threads are in use.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds coordinates into a base seed.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix64(base), |acc, &c| {
        splitmix64(acc ^ c.wrapping_mul(GOLDEN_GAMMA))
    })
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&splitmix64(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
