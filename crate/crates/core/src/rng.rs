//! Seeded random streams.
//!
//! Every experiment is driven by one 64-bit master seed. Independent work
//! items (one sampled matrix, one accepted table, one random entry set) each
//! draw from their own child stream: the ChaCha8 generator keyed by the master
//! seed, with the ChaCha stream id set to the item's index. Results therefore
//! do not depend on how items are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids at or above this value are reserved for auxiliary draws
/// (entry sets and the like) so they never collide with per-sample streams.
pub const AUX_STREAM_BASE: u64 = 1 << 63;

pub fn child_stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn aux_stream(seed: u64, purpose: u64) -> StreamRng {
    child_stream(seed, AUX_STREAM_BASE | purpose)
}
