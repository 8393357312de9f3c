//! Seeded random streams. Every consumer of randomness draws from its own
//! ChaCha stream so that, for example, changing the pivot strategy never
//! perturbs mini-batch order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Pivot = 3,
    Data = 4,
    Split = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(which as u64);
    r
}

/// Stream keyed by an additional counter (e.g. the epoch).
pub fn substream(seed: u64, which: Stream, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    r.set_stream(which as u64);
    r
}
