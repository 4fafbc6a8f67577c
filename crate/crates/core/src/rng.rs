//! Seeded random source shared by every stochastic stage.
//!
//! Sampling, shuffling and fold assignment all go through [`SeededRng`] so
//! that a `(seed, algorithm)` pair fully determines the output. The bounded
//! integer draw is implemented here rather than through `Rng::gen_range`,
//! whose algorithm is allowed to change between `rand` releases.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name recorded in provenance files next to the seed.
pub const RNG_ALGORITHM: &str = "ChaCha8/rand_chacha-0.3";

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derives an independent stream for a named sub-task.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..bound` by rejection sampling.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "bound must be positive");
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.inner.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }

    /// Uniform double in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Draws `count` distinct values from `0..n` (partial Fisher-Yates), in
    /// draw order.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot draw {count} of {n} without replacement");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }

    pub fn as_rng_core(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn sample_indices_are_distinct() {
        let mut rng = SeededRng::new(1);
        let mut idx = rng.sample_indices(100, 40);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 40);
        assert!(idx.iter().all(|&i| i < 100));
    }

    #[test]
    fn below_is_roughly_uniform() {
        let mut rng = SeededRng::new(3);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[rng.below(3)] += 1;
        }
        for c in counts {
            assert!((9_500..10_500).contains(&c), "{counts:?}");
        }
    }
}
