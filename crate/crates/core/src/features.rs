//! Seeded random Fourier features.
//!
//! A block of `m` features maps `x` to `sqrt(2/m) cos(w_j . x + b_j)` with
//! `w_j ~ N(0, 2 gamma I)` and `b_j ~ U[0, 2 pi)`, so that the inner product
//! of two blocks is an unbiased estimate of `exp(-gamma |x - x'|^2)`.
//!
//! Blocks are never stored in a model. [`sample_block`] regenerates one from
//! `(master_seed, iteration)`: the stream draws all frequency rows first
//! (row-major), then all phases.

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::linalg::{axpy, dot};
use crate::rng::{CounterRng, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    seed: u64,
    dim: usize,
    /// `block_size x dim`, row-major.
    omegas: Vec<f64>,
    offsets: Vec<f64>,
    scale: f64,
}

impl FeatureBlock {
    /// Builds a block from explicit frequencies (row-major, `offsets.len()`
    /// rows of length `dim`) and phases.
    pub fn from_parts(seed: u64, dim: usize, omegas: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        if dim == 0 || offsets.is_empty() {
            return Err(Error::input("feature block needs dim >= 1 and block_size >= 1"));
        }
        check_dim(offsets.len() * dim, omegas.len())?;
        let scale = libm::sqrt(2.0 / offsets.len() as f64);
        Ok(FeatureBlock {
            seed,
            dim,
            omegas,
            offsets,
            scale,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_size(&self) -> usize {
        self.offsets.len()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn omega(&self, j: usize) -> &[f64] {
        &self.omegas[j * self.dim..(j + 1) * self.dim]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    #[inline]
    fn feature(&self, j: usize, x: &[f64]) -> f64 {
        self.scale * libm::cos(dot(self.omega(j), x) + self.offsets[j])
    }

    /// Feature vector of `x`.
    pub fn phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok((0..self.block_size()).map(|j| self.feature(j, x)).collect())
    }

    /// `<alpha, phi(x)>`, summed in feature order.
    #[inline]
    pub(crate) fn score_unchecked(&self, alpha: &[f64], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (j, a) in alpha.iter().enumerate() {
            acc += a * self.feature(j, x);
        }
        acc
    }

    /// Adds `grad_x <alpha, phi(x)>` to `out`.
    #[inline]
    pub(crate) fn add_grad_unchecked(&self, alpha: &[f64], x: &[f64], out: &mut [f64]) {
        for (j, a) in alpha.iter().enumerate() {
            let w = self.omega(j);
            let c = a * self.scale * -libm::sin(dot(w, x) + self.offsets[j]);
            axpy(c, w, out);
        }
    }

    /// Adds `<alpha, phi(x_s)>` to `out[s]` for every sample. Bitwise equal to
    /// calling [`Self::score_unchecked`] per sample.
    pub(crate) fn score_many(&self, alpha: &[f64], xs: &[&[f64]], out: &mut [f64]) {
        // Samples are processed in small tiles so the tile stays in cache
        // while every row of the block streams past it.
        for (tile, out_tile) in xs.chunks(TILE).zip(out.chunks_mut(TILE)) {
            let mut partial = [0.0f64; TILE];
            for (j, a) in alpha.iter().enumerate() {
                let w = self.omega(j);
                let b = self.offsets[j];
                for (p, x) in partial.iter_mut().zip(tile) {
                    *p += a * (self.scale * libm::cos(dot(w, x) + b));
                }
            }
            for (o, p) in out_tile.iter_mut().zip(partial) {
                *o += p;
            }
        }
    }

    /// Adds the block's gradient contribution to `grads[s]`, and its score
    /// contribution to `scores[s]` when given. Bitwise equal to the
    /// per-sample paths.
    pub(crate) fn grad_many(
        &self,
        alpha: &[f64],
        xs: &[&[f64]],
        grads: &mut [Vec<f64>],
        mut scores: Option<&mut [f64]>,
    ) {
        let want_scores = scores.is_some();
        for (k, (tile, grad_tile)) in xs.chunks(TILE).zip(grads.chunks_mut(TILE)).enumerate() {
            let mut partial = [0.0f64; TILE];
            for (j, a) in alpha.iter().enumerate() {
                let w = self.omega(j);
                let b = self.offsets[j];
                for (s, x) in tile.iter().enumerate() {
                    let z = dot(w, x) + b;
                    if want_scores {
                        partial[s] += a * (self.scale * libm::cos(z));
                    }
                    let c = a * self.scale * -libm::sin(z);
                    axpy(c, w, &mut grad_tile[s]);
                }
            }
            if let Some(out) = scores.as_deref_mut() {
                for (o, p) in out[k * TILE..].iter_mut().zip(&partial[..tile.len()]) {
                    *o += p;
                }
            }
        }
    }
}

const TILE: usize = 8;

/// Draws the feature block for one training iteration.
pub fn sample_block(
    master_seed: u64,
    iteration: u64,
    block_size: usize,
    dim: usize,
    spec: &KernelSpec,
) -> Result<FeatureBlock> {
    if block_size == 0 || dim == 0 {
        return Err(Error::input("block_size and dim must both be at least 1"));
    }
    spec.validate()?;
    let std = match spec.family {
        KernelFamily::Rbf => libm::sqrt(2.0 * spec.gamma),
    };
    let mut rng = CounterRng::new(master_seed, Purpose::Features, iteration);
    let omegas: Vec<f64> = (0..block_size * dim).map(|_| std * rng.normal()).collect();
    let offsets: Vec<f64> = (0..block_size)
        .map(|_| core::f64::consts::TAU * rng.uniform())
        .collect();
    FeatureBlock::from_parts(iteration, dim, omegas, offsets)
}

/// Mean over blocks of `<phi_b(x), phi_b(x2)>`.
pub fn approx_kernel(blocks: &[FeatureBlock], x: &[f64], x2: &[f64]) -> Result<f64> {
    if blocks.is_empty() {
        return Err(Error::input("approx_kernel needs at least one feature block"));
    }
    check_dim(x.len(), x2.len())?;
    let mut sum = 0.0;
    for b in blocks {
        let p = b.phi(x)?;
        let q = b.phi(x2)?;
        sum += dot(&p, &q);
    }
    Ok(sum / blocks.len() as f64)
}
