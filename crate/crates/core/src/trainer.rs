//! Doubly stochastic adversarial training.
//!
//! Each iteration `t` samples a mini-batch and a fresh feature block from
//! `(master_seed, t)`, evaluates the current function on the batch, and
//!
//! * appends `alpha_t = gamma_t C / B * sum_{active i} y_i phi_t(x_i)`,
//! * scales every earlier coefficient vector by
//!   `s_t = 1 - gamma_t (1 + a eps' C / |f_t|)` where `a` is the active
//!   fraction of the batch,
//! * updates the tracked squared norm with
//!   `|f_{t+1}|^2 = s^2 |f_t|^2 + 2 s <f_t, g_t> + |g_t|^2`.
//!
//! A sample is active when its worst-case hinge is positive. `|f_t|` is
//! floored at `eps' C` before it is used as a divisor.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{sample_block, FeatureBlock};
use crate::kernel::{epsilon_prime, regularized_hinge, KernelSpec, Label};
use crate::predictor;
use crate::rng::{CounterRng, Purpose, GENERATOR_ID};

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    /// `gamma_t = eta`, `eta` in `(0, 1)`.
    Constant { eta: f64 },
    /// `gamma_t = theta / t`, `theta` in `(1/2, 1]`.
    Diminishing { theta: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant { eta } if eta > 0.0 && eta < 1.0 => Ok(()),
            Schedule::Diminishing { theta } if theta > 0.5 && theta <= 1.0 => Ok(()),
            Schedule::Constant { eta } => Err(Error::input(format!("constant step {eta} is not in (0, 1)"))),
            Schedule::Diminishing { theta } => {
                Err(Error::input(format!("diminishing theta {theta} is not in (1/2, 1]")))
            }
        }
    }

    /// Largest coefficient magnitude allowed at iteration `t`: `eta` or
    /// `theta / t`.
    pub fn coefficient_bound(&self, t: u64) -> f64 {
        match *self {
            Schedule::Constant { eta } => eta,
            Schedule::Diminishing { theta } => theta / t as f64,
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant { eta } => write!(f, "constant:{eta}"),
            Schedule::Diminishing { theta } => write!(f, "diminishing:{theta}"),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// Parses `constant:<eta>` or `diminishing:<theta>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::input(format!("schedule `{s}` is not `constant:<eta>` or `diminishing:<theta>`")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("schedule value `{value}` is not a number")))?;
        let sched = match kind.trim() {
            "constant" => Schedule::Constant { eta: v },
            "diminishing" => Schedule::Diminishing { theta: v },
            other => return Err(Error::input(format!("unknown schedule kind `{other}`"))),
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// Step size at iteration `t >= 1`.
pub fn step_size(schedule: &Schedule, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::input("iterations are numbered from 1"));
    }
    Ok(match *schedule {
        Schedule::Constant { eta } => eta,
        Schedule::Diminishing { theta } => theta / t as f64,
    })
}

/// Multiplier applied to all earlier coefficients when one sample is (or is
/// not) active.
pub fn shrink_factor(gamma_t: f64, eps_prime: f64, c: f64, norm_f: f64, loss_active: bool) -> Result<f64> {
    shrink_factor_weighted(gamma_t, eps_prime, c, norm_f, if loss_active { 1.0 } else { 0.0 })
}

/// Mini-batch form of [`shrink_factor`]: the norm penalty is weighted by the
/// fraction of active samples.
pub fn shrink_factor_weighted(
    gamma_t: f64,
    eps_prime: f64,
    c: f64,
    norm_f: f64,
    active_fraction: f64,
) -> Result<f64> {
    let budget = eps_prime * c;
    let penalty = if budget > 0.0 && active_fraction > 0.0 {
        if !(norm_f > 0.0) {
            return Err(Error::input(
                "shrink factor needs a floored norm: |f| = 0 with eps' C > 0",
            ));
        }
        active_fraction * budget / norm_f
    } else {
        0.0
    };
    Ok(1.0 - gamma_t * (1.0 + penalty))
}

/// Squared-norm recursion for `f_{t+1} = s f_t + g` with a single new kernel
/// term `g = coeff_scale k(x_t, .)` and `k(x, x) = 1`.
pub fn norm_update(norm_sq: f64, s: f64, coeff_scale: f64, f_t_at_batch: f64) -> f64 {
    norm_update_terms(norm_sq, s, coeff_scale * f_t_at_batch, coeff_scale * coeff_scale)
}

/// General form: `s^2 |f|^2 + 2 s <f, g> + |g|^2`, clamped at zero.
pub fn norm_update_terms(norm_sq: f64, s: f64, cross: f64, new_sq: f64) -> f64 {
    (s * s * norm_sq + 2.0 * s * cross + new_sq).max(0.0)
}

/// Training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Regularisation trade-off `C`.
    pub c: f64,
    /// Input-space perturbation radius (L2).
    pub epsilon: f64,
    pub schedule: Schedule,
    pub batch_size: usize,
    pub block_size: usize,
    pub iterations: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub learn_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            epsilon: 0.0,
            schedule: Schedule::Diminishing { theta: 1.0 },
            batch_size: 1,
            block_size: 1024,
            iterations: 100,
            master_seed: 0,
            learn_bias: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.schedule.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::input(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::input(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if self.batch_size == 0 || self.block_size == 0 || self.iterations == 0 {
            return Err(Error::input("batch_size, block_size and iterations must all be positive"));
        }
        if self.batch_size > n {
            return Err(Error::input(format!(
                "batch size {} exceeds dataset size {n}",
                self.batch_size
            )));
        }
        Ok(())
    }

    /// Iteration count for a single pass over `n` samples.
    pub fn one_pass_iterations(n: usize, batch_size: usize) -> u64 {
        (n / batch_size.max(1)).max(1) as u64
    }
}

/// Coefficient vector of one training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub iteration: u64,
    pub alpha: Vec<f64>,
}

/// A trained function `f(x) = sum_i <alpha_i, phi_i(x)> + bias`, where
/// `phi_i` is regenerated from `(config.master_seed, iteration_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: TrainConfig,
    pub kernel: KernelSpec,
    pub eps_prime: f64,
    pub dim: usize,
    pub entries: Vec<ModelEntry>,
    /// Tracked `|f|^2`.
    pub norm_sq: f64,
    pub bias: f64,
    pub generator_id: String,
}

impl Model {
    /// A model with no entries; predicts `bias` everywhere.
    pub fn empty(config: TrainConfig, kernel: KernelSpec, dim: usize) -> Result<Self> {
        Ok(Model {
            eps_prime: epsilon_prime(&kernel, config.epsilon)?,
            config,
            kernel,
            dim,
            entries: Vec::new(),
            norm_sq: 0.0,
            bias: 0.0,
            generator_id: GENERATOR_ID.to_string(),
        })
    }

    /// Regenerates the feature block of one entry.
    pub fn block_for(&self, entry: &ModelEntry) -> Result<FeatureBlock> {
        sample_block(
            self.config.master_seed,
            entry.iteration,
            entry.alpha.len(),
            self.dim,
            &self.kernel,
        )
    }

    pub fn check_generator(&self) -> Result<()> {
        if self.generator_id != GENERATOR_ID {
            return Err(Error::input(format!(
                "model was trained with generator `{}`, this build provides `{GENERATOR_ID}`",
                self.generator_id
            )));
        }
        Ok(())
    }
}

/// What happened in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: u64,
    pub step: f64,
    /// Sampled row indices.
    pub batch: Vec<usize>,
    /// `f_t(x_i)` for the batch, bias excluded.
    pub batch_scores: Vec<f64>,
    pub active: usize,
    /// Divisor actually used: `max(|f_t|, eps' C)`.
    pub norm_floored: f64,
    pub shrink: f64,
    /// The shrink factor was below -1 and got clamped.
    pub clamped: bool,
    pub norm_sq_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub t: u64,
    /// Iteration whose coefficient broke the bound.
    pub i: u64,
    pub value: f64,
    pub bound: f64,
}

/// Full per-iteration trace of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub records: Vec<IterationRecord>,
    /// `a_T^i` after the last iteration, indexed by `i - 1`.
    pub coefficient_scales: Vec<f64>,
    /// Every `(t, i)` where `|a_t^i|` exceeded the schedule's bound.
    pub bound_violations: Vec<BoundViolation>,
    /// Largest `|a_t^i| / bound(t)` seen.
    pub max_bound_ratio: f64,
}

/// Read-only view of the trainer state handed to observers after each
/// iteration.
pub struct Progress<'a> {
    pub t: u64,
    pub entries: &'a [ModelEntry],
    pub blocks: &'a [FeatureBlock],
    pub bias: f64,
    pub norm_sq: f64,
}

impl Progress<'_> {
    /// Scores (bias included) of the current function.
    pub fn scores(&self, xs: &[&[f64]]) -> Vec<f64> {
        predictor::expansion_scores(self.entries, self.blocks, self.bias, xs)
    }
}

/// Trains a model.
pub fn train(data: &LabeledDataset, cfg: &TrainConfig, spec: &KernelSpec) -> Result<Model> {
    train_inner(data, cfg, spec, None, &mut |_| {})
}

/// Trains a model and returns the per-iteration transcript as well.
pub fn train_with_transcript(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    spec: &KernelSpec,
) -> Result<(Model, Transcript)> {
    let mut tr = Transcript::default();
    let model = train_inner(data, cfg, spec, Some(&mut tr), &mut |_| {})?;
    Ok((model, tr))
}

/// Trains a model, calling `observer` after every iteration.
pub fn train_observed(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    spec: &KernelSpec,
    observer: &mut dyn FnMut(&Progress<'_>),
) -> Result<Model> {
    train_inner(data, cfg, spec, None, observer)
}

/// Sampled row indices of iteration `t` (with replacement).
pub fn batch_indices(master_seed: u64, t: u64, batch_size: usize, n: usize) -> Vec<usize> {
    let mut rng = CounterRng::new(master_seed, Purpose::Batch, t);
    (0..batch_size).map(|_| rng.below(n)).collect()
}

fn train_inner(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    spec: &KernelSpec,
    mut transcript: Option<&mut Transcript>,
    observer: &mut dyn FnMut(&Progress<'_>),
) -> Result<Model> {
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    spec.validate()?;
    cfg.validate(data.len())?;

    let mut model = Model::empty(*cfg, *spec, data.dim())?;
    let eps_prime = model.eps_prime;
    let budget = eps_prime * cfg.c;
    let b = cfg.batch_size as f64;

    let mut blocks: Vec<FeatureBlock> = Vec::new();
    let mut scales: Vec<f64> = Vec::new();

    for t in 1..=cfg.iterations {
        let step = step_size(&cfg.schedule, t)?;
        let batch = batch_indices(cfg.master_seed, t, cfg.batch_size, data.len());
        let xs: Vec<&[f64]> = batch.iter().map(|&i| data.row(i)).collect();
        let scores = predictor::expansion_scores(&model.entries, &blocks, 0.0, &xs);
        if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                iteration: t,
                what: format!("f_t(x) is {} for batch row {}", scores[pos], batch[pos]),
            });
        }

        let norm = libm::sqrt(model.norm_sq);
        let active: Vec<usize> = (0..batch.len())
            .filter(|&k| regularized_hinge(scores[k], norm, data.label(batch[k]), eps_prime, model.bias) > 0.0)
            .collect();
        let frac = active.len() as f64 / b;
        let norm_floored = norm.max(budget);

        let mut shrink = shrink_factor_weighted(step, eps_prime, cfg.c, norm_floored, frac)?;
        let clamped = shrink < -1.0;
        if clamped {
            log::warn!("iteration {t}: shrink factor {shrink} clamped to -1");
            shrink = -1.0;
        }

        let coeff = step * cfg.c / b;
        let mut cross = 0.0;
        let mut new_sq = 0.0;
        let mut alpha = Vec::new();
        if !active.is_empty() {
            let block = sample_block(cfg.master_seed, t, cfg.block_size, data.dim(), spec)?;
            alpha = vec![0.0; cfg.block_size];
            for &k in &active {
                let y = data.label(batch[k]).sign();
                let phi = block.phi(xs[k])?;
                for (a, p) in alpha.iter_mut().zip(&phi) {
                    *a += y * p;
                }
                cross += y * scores[k];
            }
            for a in &mut alpha {
                *a *= coeff;
            }
            cross *= coeff;
            let mut gram = 0.0;
            for &i in &active {
                let yi = data.label(batch[i]).sign();
                for &j in &active {
                    let yj = data.label(batch[j]).sign();
                    gram += yi * yj * spec.eval_unchecked(xs[i], xs[j]);
                }
            }
            new_sq = coeff * coeff * gram;
            blocks.push(block);
        }

        for e in &mut model.entries {
            for a in &mut e.alpha {
                *a *= shrink;
            }
        }
        if !alpha.is_empty() {
            if alpha.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    iteration: t,
                    what: "non-finite coefficient".into(),
                });
            }
            model.entries.push(ModelEntry { iteration: t, alpha });
        }
        model.norm_sq = norm_update_terms(model.norm_sq, shrink, cross, new_sq);
        if !model.norm_sq.is_finite() {
            return Err(Error::Numerical {
                iteration: t,
                what: "tracked norm is not finite".into(),
            });
        }
        if cfg.learn_bias && !active.is_empty() {
            let ysum: f64 = active.iter().map(|&k| data.label(batch[k]).sign()).sum();
            model.bias += coeff * ysum;
        }

        for a in &mut scales {
            *a *= shrink;
        }
        scales.push(step);

        if let Some(tr) = transcript.as_deref_mut() {
            let bound = cfg.schedule.coefficient_bound(t);
            let tol = bound * (1.0 + 1e-12);
            for (i, a) in scales.iter().enumerate() {
                let ratio = a.abs() / bound;
                if ratio > tr.max_bound_ratio {
                    tr.max_bound_ratio = ratio;
                }
                if a.abs() > tol {
                    tr.bound_violations.push(BoundViolation {
                        t,
                        i: i as u64 + 1,
                        value: a.abs(),
                        bound,
                    });
                }
            }
            tr.records.push(IterationRecord {
                t,
                step,
                batch: batch.clone(),
                batch_scores: scores.clone(),
                active: active.len(),
                norm_floored,
                shrink,
                clamped,
                norm_sq_after: model.norm_sq,
            });
        }

        observer(&Progress {
            t,
            entries: &model.entries,
            blocks: &blocks,
            bias: model.bias,
            norm_sq: model.norm_sq,
        });
    }

    if let Some(tr) = transcript {
        tr.coefficient_scales = scales;
    }
    Ok(model)
}

/// Helper for tests and callers that hold labels rather than datasets.
pub fn margin(y: Label, score: f64) -> f64 {
    y.sign() * score
}
