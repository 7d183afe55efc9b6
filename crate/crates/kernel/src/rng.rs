//! Seeded randomness.
//!
//! Every stochastic routine in the workspace draws from a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng`) seeded from a single `u64`. Uniform floats are
//! built from the top bits of `next_u64` so the mapping from seed to values
//! does not depend on `rand`'s distribution internals.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type KernelRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> KernelRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[0, 1)` with 24 bits of resolution.
pub fn uniform_f32(rng: &mut KernelRng) -> f32 {
    (rng.next_u64() >> 40) as f32 * (1.0 / (1u64 << 24) as f32)
}

/// Uniform in `[0, 1)` with 53 bits of resolution.
pub fn uniform_f64(rng: &mut KernelRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform_range(rng: &mut KernelRng, lo: f32, hi: f32) -> f32 {
    lo + (hi - lo) * uniform_f32(rng)
}

pub fn normal(rng: &mut KernelRng, mean: f32, std: f32) -> f32 {
    let z: f32 = StandardNormal.sample(rng);
    mean + std * z
}

/// Fisher-Yates shuffle driven by [`uniform_f64`].
pub fn shuffle<T>(items: &mut [T], rng: &mut KernelRng) {
    for i in (1..items.len()).rev() {
        let j = ((uniform_f64(rng) * (i + 1) as f64) as usize).min(i);
        items.swap(i, j);
    }
}
