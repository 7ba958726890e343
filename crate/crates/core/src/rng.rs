//! Seeded random sources shared by fixtures, samplers and the optimizer.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::float::{Float, PI};
use crate::linalg::C64;

/// Deterministic generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in `[0, 1)` with 53 random bits.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform_range(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Standard normal deviate by Box–Muller.
pub fn normal(rng: &mut impl RngCore) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    Float::sqrt(-2.0 * Float::ln(u1)) * Float::cos(2.0 * PI * u2)
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn complex_normal(rng: &mut impl RngCore) -> C64 {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    C64::new(normal(rng) * s, normal(rng) * s)
}
