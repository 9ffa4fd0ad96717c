//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from
//! `derive_seed(master, label, index)`. The label names the consumer
//! (`"world"`, `"assign"`, `"impression"`, `"bootstrap"`, ...) and the index
//! selects a sub-stream within it (query number, impression number, resample
//! number). Streams with different labels or indices are unrelated, so a job
//! can be computed in any order or on any thread and still draw exactly the
//! same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Derives the seed of sub-stream `index` of stream `label` under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let h = splitmix64(master ^ fnv1a(label));
    splitmix64(h ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// A generator for sub-stream `index` of stream `label`.
pub fn stream(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label, index))
}
