//! Seeded random streams. Every consumer draws from its own ChaCha stream so
//! that adding draws in one place never shifts another's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers.
pub(crate) mod stream {
    pub const BVP_PHASE: u64 = 1;
    pub const MOTION: u64 = 2;
    pub const PIXEL_NOISE: u64 = 3;
    pub const BLOCK_GAIN: u64 = 4;
    pub const BLOCK_NOISE: u64 = 5;
    pub const ILLUM: u64 = 6;
    pub const SAMPLE_CONFIG: u64 = 7;
    pub const FRAME_DROP: u64 = 8;
    pub const INIT: u64 = 9;
    pub const SHUFFLE: u64 = 10;
    pub const GRADCHECK: u64 = 12;
}

/// Independent generator for `(seed, stream)`, advanced to a block reserved
/// for `index` (2^32 words per index).
pub(crate) fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos((index as u128) << 32);
    rng
}

/// SplitMix64 finalizer, for deriving per-item seeds.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
