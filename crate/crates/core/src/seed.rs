//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every stream is keyed by a path of integers (master seed, trial, agent) so
//! the numbers an agent sees never depend on how many other streams were
//! consumed before it or on which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream index reserved for drawing the target location of a trial.
pub const TARGET_STREAM: u64 = u64::MAX;
/// Stream index reserved for generating a network.
pub const NETWORK_STREAM: u64 = u64::MAX - 1;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed `hash(parent, index)`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index).rotate_left(17))
}

pub fn stream(parent: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(parent, index))
}
