//! Seeded, platform-independent random streams.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Deterministic generator: identical `(seed, stream)` pairs replay the same
/// draws on every platform.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

/// Well-known stream ids, so that independent consumers (initialization,
/// shuffling, masking, ...) derived from one run seed never share draws.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const MASK: u64 = 3;
    pub const FREEZE: u64 = 4;
    pub const DATA: u64 = 5;
    pub const SPLIT: u64 = 6;
}

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng(inner)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform draw in `[lo, hi]`; always consumes exactly one draw.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.unit();
        (lo + (hi - lo) * u).clamp(lo, hi)
    }

    /// Uniform integer in `0..=max`.
    pub fn index_inclusive(&mut self, max: usize) -> usize {
        self.0.random_range(0..=max)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.0);
    }
}
