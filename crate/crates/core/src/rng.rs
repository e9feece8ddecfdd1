//! Seeding helpers.
//!
//! All randomness flows from caller-supplied seeds; nothing reads the clock.
//! Parallel work units (layers, replicates, chains) get independent streams
//! derived with [`child_seed`] so results do not depend on scheduling order.

use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

/// The deterministic generator used throughout the crate.
pub type Generator = ChaCha8Rng;

/// Build a generator from a bare seed.
pub fn seeded(seed: u64) -> Generator {
    Generator::seed_from_u64(seed)
}

/// Derive an independent child seed for work unit `stream`.
///
/// SplitMix64 finalizer over the pair; distinct (seed, stream) pairs give
/// uncorrelated streams for any practical workload size.
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for work unit `stream` under master `seed`.
pub fn substream(seed: u64, stream: u64) -> Generator {
    seeded(child_seed(seed, stream))
}
