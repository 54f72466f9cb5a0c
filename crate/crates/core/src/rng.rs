//! Seedable, splittable random number generation.
//!
//! [`SeedRng`] wraps a ChaCha8 stream cipher keyed from the run seed.
//! Children produced by [`SeedRng::split`] depend only on the parent's key
//! and the label, never on how many values the parent already produced, so
//! adding a draw in one subsystem cannot shift the randomness of another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stable labels for the independent random streams used across the crate.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const REPARAM: u64 = 3;
    pub const BASIN: u64 = 10;
    pub const FORCINGS: u64 = 11;
    pub const RANDOM_EMBEDDING: u64 = 20;
}

#[derive(Clone, Debug)]
pub struct SeedRng {
    key: [u8; 32],
    inner: ChaCha8Rng,
}

impl SeedRng {
    pub fn new(seed: u64) -> Self {
        let key = ChaCha8Rng::seed_from_u64(seed).get_seed();
        Self::from_key(key)
    }

    fn from_key(key: [u8; 32]) -> Self {
        Self {
            key,
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Derive an independent child generator for `label`.
    pub fn split(&self, label: u64) -> Self {
        let mut g = ChaCha8Rng::from_seed(self.key);
        g.set_stream(label);
        let mut key = [0u8; 32];
        g.fill_bytes(&mut key);
        Self::from_key(key)
    }

    /// Uniform sample in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`; `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire-style rejection to avoid modulo bias
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.inner.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        use rand_distr::Distribution;
        rand_distr::StandardNormal.sample(self)
    }

    /// Gamma-distributed sample; `shape` and `scale` must be positive.
    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        use rand_distr::Distribution;
        rand_distr::Gamma::new(shape, scale).expect("positive gamma parameters").sample(self)
    }
}

impl RngCore for SeedRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
