//! Stable seed derivation.
//!
//! Every random stream in the crate is keyed by `(master seed, tags...)`
//! through SplitMix64 finalisation, so a draw never depends on call order or
//! thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master`.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(master), |acc, &p| {
            splitmix(acc.rotate_left(23).wrapping_add(splitmix(p)))
        })
}

pub fn rng(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, parts))
}

// stream tags
pub(crate) const TAG_TRAJECTORY: u64 = 1;
pub(crate) const TAG_VO: u64 = 2;
pub(crate) const TAG_MATCH_FRAME: u64 = 3;
pub(crate) const TAG_MATCH_PAIR: u64 = 4;
pub(crate) const TAG_DISTANCE: u64 = 5;
