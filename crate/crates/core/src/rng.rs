//! Seeded random source.
//!
//! The generator is ChaCha8 keyed through `SeedableRng::seed_from_u64`
//! (a PCG32 expansion of the 64-bit seed into the 256-bit key). A uniform
//! draw takes the top 53 bits of one `next_u64` output as `k · 2⁻⁵³` and maps
//! it affinely onto `[lo, hi)`. Both steps are fixed algorithms, so any
//! implementation of ChaCha8 reproduces the same stream from the same seed.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_scalar(&mut self, lo: f64, hi: f64) -> f64 {
        let v = lo + (hi - lo) * self.next_f64();
        // rounding can land exactly on hi for some (lo, hi)
        if v >= hi {
            hi.next_down().max(lo)
        } else {
            v
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Matrix> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!(
                "uniform range needs finite lo < hi, got [{lo}, {hi})"
            )));
        }
        let data = (0..rows * cols)
            .map(|_| self.uniform_scalar(lo, hi))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

pub fn rng_uniform(rng: &mut Rng, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Matrix> {
    rng.uniform(lo, hi, rows, cols)
}
