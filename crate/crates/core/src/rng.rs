//! Seeded random streams.
//!
//! Each run owns exactly one [`SeededStream`]; everything random in a run is
//! drawn from it (or from a child split off at a fixed point), so identical
//! seeds reproduce identical trajectories byte for byte.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Deterministic random stream backed by ChaCha8 (stable across platforms).
#[derive(Debug, Clone)]
pub struct SeededStream {
    rng: ChaCha8Rng,
    seed: u64,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        SeededStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    /// Seed this stream was created from (informational; splitting does not
    /// change it).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Splits off an independent child stream. Consumes one draw from the
    /// parent, so the call site's position in the program determines the
    /// child deterministically.
    pub fn split(&mut self) -> SeededStream {
        let child_seed: u64 = self.rng.gen();
        SeededStream {
            rng: ChaCha8Rng::seed_from_u64(child_seed),
            seed: child_seed,
        }
    }

    /// One standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// A vector of `d` i.i.d. standard normal draws.
    pub fn gaussian_vec(&mut self, d: usize) -> Array1<f64> {
        Array1::from_iter((0..d).map(|_| self.gaussian()))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform integer in `[lo, hi]` (inclusive).
    pub fn uniform_index(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.gen_range(lo..=hi)
    }

    /// Samples an index proportional to the given nonnegative weights.
    /// Weights need not be normalized.
    pub fn pick_weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0, "pick_weighted needs a positive total weight");
        let mut t = self.uniform() * total;
        for (i, w) in weights.iter().enumerate() {
            t -= w;
            if t <= 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }
}
