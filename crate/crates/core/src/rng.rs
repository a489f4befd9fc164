//! Deterministic seed streams.
//!
//! Every random decision in training is drawn from a generator keyed by
//! `(seed, stream, epoch, step)`, so batch schedules and dropout masks are a
//! pure function of the configuration and never depend on thread timing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent purposes that draw from the same base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Schedule = 2,
    Sample = 3,
    Dropout = 4,
    Partition = 5,
    Fixture = 6,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag, epoch and step.
pub fn derive_seed(seed: u64, stream: Stream, epoch: u64, step: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ stream as u64);
    h = splitmix64(h ^ epoch);
    splitmix64(h ^ step.rotate_left(32))
}

pub fn stream_rng(seed: u64, stream: Stream, epoch: u64, step: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream, epoch, step))
}
