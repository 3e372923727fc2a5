//! Adversarial training of kernel SVMs with doubly stochastic gradients.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs: file formats, timing, and the command line live in
//! the `advsvm` companion crate.
//!
//! The pipeline is
//!
//! 1. [`kernel`]: RBF kernel, the input-to-kernel perturbation radius
//!    mapping, and the reduced adversarial hinge loss.
//! 2. [`features`]: seeded random Fourier feature blocks.
//! 3. [`trainer`]: doubly stochastic adversarial training. A [`Model`] stores
//!    per-iteration coefficient vectors only; feature blocks are regenerated
//!    from the master seed.
//! 4. [`predictor`]: seed-aligned prediction and analytic input gradients.
//! 5. [`attacks`]: FGSM, PGD, C&W-L2 and ZOO-ADAM evasion attacks.
//! 6. [`data`], [`reference`], [`selection`], [`convergence`]: dataset
//!    transforms, the exact-kernel twin trainer, k-fold grid search and
//!    convergence-rate measurement.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod attacks;
pub mod convergence;
pub mod data;
mod error;
pub mod features;
pub mod kernel;
pub(crate) mod linalg;
pub mod predictor;
pub mod reference;
pub mod rng;
pub mod selection;
pub mod trainer;

pub use crate::error::{Error, Result};
pub use crate::kernel::{AdversarialBudget, KernelFamily, KernelSpec, Label};
pub use crate::predictor::{CachedModel, GradientScorer, Prediction, Scorer};
pub use crate::trainer::{Model, Schedule, TrainConfig};
