//! Seeded, splittable random number generation.
//!
//! Every stochastic routine in this crate takes a caller-supplied generator.
//! The concrete generator is ChaCha20 keyed from a 64-bit seed through
//! `rand`'s `seed_from_u64` expansion. Independent streams for parallel work
//! are derived with [`split`], which keeps the key and selects a distinct
//! ChaCha stream id, so results never depend on thread scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// The generator used throughout the crate.
pub type DpRng = ChaCha20Rng;

/// Generator for a 64-bit seed (stream 0).
pub fn seeded(seed: u64) -> DpRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Generator for stream `stream` of the key derived from `seed`.
pub fn split(seed: u64, stream: u64) -> DpRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw a fresh base seed from `rng`, for handing to [`split`].
pub fn fork_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}

/// One uniform draw in `[0, 1)`.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
