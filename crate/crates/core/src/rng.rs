//! Seeded random streams.
//!
//! Every stochastic step in a run draws from one [`RandomStream`], a ChaCha8
//! generator keyed by a 64-bit seed. Equal seeds give equal draw sequences.
//! Batch runs derive one seed per run with [`mix_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function (Steele, Lea & Flood). Full avalanche: every
/// input bit flips each output bit with probability close to 1/2.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `index` of a batch rooted at `base`.
///
/// `mix_seed(base, i) = splitmix64(base + i * 0x9E3779B97F4A7C15)` with
/// wrapping arithmetic, i.e. the i-th output of a SplitMix64 sequence
/// started at `base`.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform draw on `[0, max]`. A `max` of zero always yields exactly zero.
    pub fn uniform_upto(&mut self, max: f64) -> f64 {
        self.next_f64() * max
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index_below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
