//! Seeded random streams.
//!
//! One user-facing seed is split into independent ChaCha streams, one per
//! component, so drawing more numbers in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Component identifiers used to split a seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Dataset = 1,
    Render = 2,
    Init = 3,
    Shuffle = 4,
    Episode = 5,
    Check = 6,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    stream_with(seed, which, 0)
}

/// A stream further split by `index` (e.g. an epoch or episode number).
pub fn stream_with(seed: u64, which: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(which as u64);
    rng
}
