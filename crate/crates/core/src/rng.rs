//! Seed derivation and the random-variate primitives every stochastic step
//! in the pipeline draws from.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`. Normal variates use the Box–Muller
//! transform on 53-bit uniforms in (0, 1], and shuffles are a plain
//! Fisher–Yates with rejection sampling for the index draw, so the byte
//! streams only depend on ChaCha8 itself.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Identifier of the noise/shuffle algorithm, recorded in manifests.
pub const ALGORITHM: &str = "chacha8+box-muller/v1";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from an ordered list of keys, e.g.
/// `(plan seed, epoch, sample index)`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(GOLDEN, |h, &p| {
        mix64(h.wrapping_add(GOLDEN) ^ mix64(p.wrapping_add(GOLDEN)))
    })
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in (0, 1].
pub fn uniform_open0(rng: &mut Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..n` without modulo bias.
pub fn below(rng: &mut Rng, n: u64) -> u64 {
    assert!(n > 0);
    let zone = u64::MAX - (u64::MAX % n) - 1;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return v % n;
        }
    }
}

/// Two independent standard normal variates (Box–Muller).
pub fn normal_pair(rng: &mut Rng) -> (f64, f64) {
    let u1 = uniform_open0(rng);
    let u2 = uniform_open0(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Stream of standard normal variates backed by [`normal_pair`].
pub struct Normals {
    rng: Rng,
    spare: Option<f64>,
}

impl Normals {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng(seed),
            spare: None,
        }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let (a, b) = normal_pair(&mut self.rng);
        self.spare = Some(b);
        a
    }

    /// Normal with the given standard deviation, redrawn until it falls
    /// within two standard deviations of zero.
    pub fn truncated(&mut self, std: f64) -> f64 {
        loop {
            let v = self.next();
            if v.abs() <= 2.0 {
                return v * std;
            }
        }
    }
}

pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
