//! Seeded, splittable random streams.
//!
//! Every suite draws from its own ChaCha stream, selected by a label, so
//! adding draws to one suite never shifts the points another suite sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SuiteRng = ChaCha8Rng;

// FNV-1a; stable across toolchains, unlike `DefaultHasher`.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Independent stream for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> SuiteRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}

/// Sub-stream `index` of a labelled stream, for per-task draws in parallel sweeps.
pub fn substream(seed: u64, label: &str, index: u64) -> SuiteRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(label_hash(label));
    rng
}
