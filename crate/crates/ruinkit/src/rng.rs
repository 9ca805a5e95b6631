//! Deterministic splittable randomness.
//!
//! Every stochastic operation in this crate draws from a ChaCha8 stream
//! addressed by `(seed, salt, index)`: the seed keys the generator, and the
//! 64-bit stream id packs an operation salt with a replicate index. Replicate
//! i always sees the same stream no matter how work is scheduled, which is
//! what makes results independent of thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INDEX_BITS: u32 = 48;

/// Stream for replicate `index` of the operation tagged `salt`.
///
/// Salts are small per-operation constants; indices are replicate numbers.
pub fn stream(seed: u64, salt: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(salt < 1 << (64 - INDEX_BITS));
    debug_assert!(index < 1 << INDEX_BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((salt << INDEX_BITS) | index);
    rng
}

/// Uniform draw from the open interval (0, 1) on the 2^-53 grid.
///
/// Never returns 0 or 1, so inverse-CDF transforms stay finite.
pub fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

// Operation salts. Keep these distinct so ops sharing a user seed do not
// share streams.
pub(crate) mod salt {
    pub const SAMPLE: u64 = 1;
    pub const SUM_SURVIVAL: u64 = 2;
    pub const CONVOLUTION: u64 = 3;
    pub const SUM_MAX: u64 = 4;
    pub const SUM_QUANTILE: u64 = 5;
    pub const WALK: u64 = 6;
    pub const BRANCHING: u64 = 8;
    pub const CONTAGION: u64 = 9;
    pub const CONTAGION_GRAPH: u64 = 10;
    pub const TWO_TEST: u64 = 11;
    pub const LUCK: u64 = 12;
    pub const RESAMPLE: u64 = 13;
}
