//! Seeded random streams.
//!
//! Everything random in the crate descends from one root seed. A consumer asks for
//! the substream `(domain, index)`; substreams never overlap, so replicate `b` sees
//! the same numbers no matter which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Substream domains. Distinct constants keep e.g. bootstrap draws independent of
/// cross-validation folds built from the same root seed.
pub mod domain {
    pub const BOOTSTRAP: u64 = 0x42_4f_4f_54;
    pub const CV_FOLDS: u64 = 0x43_56_46_4c;
    pub const TRAIN: u64 = 0x54_52_4e;
    pub const EVAL: u64 = 0x45_56_4c;
}

/// Root stream for a seed.
pub fn root(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

pub fn substream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let key = seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = StreamRng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Derive a fresh 64-bit seed from a substream, for APIs that take a plain seed.
pub fn derived_seed(seed: u64, domain: u64, index: u64) -> u64 {
    use rand::Rng;
    substream(seed, domain, index).random()
}
