//! Deterministic random streams.
//!
//! Every stochastic concern (model init, batch shuffling, noise injection, ...)
//! draws from its own ChaCha8 stream derived from a master seed plus a short
//! purpose label. Adding or removing one consumer never shifts the numbers
//! another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used to spread low-entropy seeds over 64 bits.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for the stream identified by `label` under `master`.
///
/// Labels are hashed with FNV-1a and mixed into the master seed, so distinct
/// labels give statistically independent streams for the same master.
pub fn stream_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(master.wrapping_add(splitmix64(h)))
}

/// A fresh generator for the (master, label) stream.
pub fn stream(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, label))
}
