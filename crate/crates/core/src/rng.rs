//! Counter-based seed derivation.
//!
//! Every random stream in the library is keyed by a master seed plus a short
//! tuple of counters (replicate, transition, path, ...). Streams never share
//! state, so results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream.
pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a list of counters into a 64-bit stream key.
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Opens the independent stream identified by `(master, counters)`.
pub fn stream(master: u64, counters: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, counters))
}
