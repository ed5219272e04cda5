//! Keyed random streams.
//!
//! Every source of randomness in an experiment draws from its own generator,
//! derived from the trial's root seed, a stream tag, and up to two integer
//! keys (typically client id and round index). Toggling one mechanism never
//! shifts the draws seen by another, and adding rounds never perturbs the
//! draws of earlier rounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    DataSplit = 1,
    ModelInit = 2,
    BatchShuffle = 3,
    RandomSelection = 4,
    LatencyPerturbation = 5,
    ClassMeans = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a stream tag and two keys into a 64-bit seed.
pub fn derive_seed(root: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(root);
    h = splitmix64(h ^ stream as u64);
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(32))
}

pub fn derive_rng(root: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stream, a, b))
}
