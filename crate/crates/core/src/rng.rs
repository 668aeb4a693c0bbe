//! Seeded, splittable random streams.
//!
//! Every sampling routine takes an explicit generator. Work that may run in
//! parallel derives child streams from a parent seed and a key path, so the
//! draws seen by any unit of work depend only on `(seed, keys)` and never on
//! scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed with a key path into a new 64-bit seed.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// A generator for the substream identified by `keys` under `seed`.
pub fn substream(seed: u64, keys: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, keys))
}

/// A fresh root generator.
pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Draw a seed from `rng` to key child streams of a parallel computation.
pub fn fork_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}
