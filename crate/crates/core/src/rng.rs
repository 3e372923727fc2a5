//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of
//! `(master_seed, purpose, counter)`. The key is ChaCha8 seeded with the
//! master seed and the purpose tag; the counter selects the ChaCha stream.
//! Gaussians use the Box-Muller transform over `libm`, so a model regenerates
//! the same feature blocks on any platform. [`GENERATOR_ID`] names this exact
//! construction and is written into model files.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Identifier of the feature/batch generator. Bump when any draw changes.
pub const GENERATOR_ID: &str = "chacha8-stream+box-muller-libm/v1";

/// What a stream is used for. Streams with different purposes never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Features = 1,
    Batch = 2,
    Attack = 3,
    Shuffle = 4,
    Synthetic = 5,
}

pub struct CounterRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(master_seed: u64, purpose: Purpose, counter: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(counter);
        CounterRng {
            inner,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` via the widening-multiply map.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal draw (Box-Muller; the second variate of each pair is
    /// kept for the next call).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(core::f64::consts::TAU * u2);
        self.spare_normal = Some(r * s);
        r * c
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn same_key_same_stream() {
        let a: Vec<u64> = {
            let mut r = CounterRng::new(7, Purpose::Features, 3);
            (0..16).map(|_| r.next_u64()).collect()
        };
        let mut r = CounterRng::new(7, Purpose::Features, 3);
        let b: Vec<u64> = (0..16).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn counters_and_purposes_separate() {
        let first = |seed, p, c| CounterRng::new(seed, p, c).next_u64();
        let base = first(7, Purpose::Features, 3);
        assert_ne!(base, first(7, Purpose::Features, 4));
        assert_ne!(base, first(7, Purpose::Batch, 3));
        assert_ne!(base, first(8, Purpose::Features, 3));
    }

    #[test]
    fn normal_moments() {
        let mut r = CounterRng::new(1, Purpose::Synthetic, 0);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = r.normal();
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = CounterRng::new(2, Purpose::Batch, 0);
        let mut seen = [0usize; 5];
        for _ in 0..10_000 {
            seen[r.below(5)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 1800 && c < 2200), "{seen:?}");
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = CounterRng::new(3, Purpose::Batch, 9);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
