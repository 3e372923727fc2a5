//! Seed-aligned prediction and analytic input gradients.
//!
//! [`predict`] and [`grad_x`] regenerate every feature block from the model's
//! seeds on each call. [`CachedModel`] materialises the blocks once for
//! attack loops; its results are bitwise identical to the regenerating path.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Result};
use crate::features::FeatureBlock;
use crate::kernel::Label;
use crate::trainer::{Model, ModelEntry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// `f(x) + b`
    pub score: f64,
    pub label: Label,
}

impl Prediction {
    pub fn from_score(score: f64) -> Self {
        Prediction {
            score,
            label: Label::from_score(score),
        }
    }
}

/// Anything that can score inputs. Black-box attacks only see this.
pub trait Scorer {
    fn dim(&self) -> usize;

    fn score(&self, x: &[f64]) -> Result<f64>;

    fn score_batch(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.score(x)).collect()
    }
}

/// Scorers with an analytic input gradient.
pub trait GradientScorer: Scorer {
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn grad_batch(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.grad(x)).collect()
    }

    fn score_grad_batch(&self, xs: &[&[f64]]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        Ok((self.score_batch(xs)?, self.grad_batch(xs)?))
    }
}

/// Scores of `sum_i <alpha_i, phi_i(x)> + bias` for a batch, one block at a
/// time. Per sample this is the same sequence of operations as
/// [`predict`].
pub(crate) fn expansion_scores(
    entries: &[ModelEntry],
    blocks: &[FeatureBlock],
    bias: f64,
    xs: &[&[f64]],
) -> Vec<f64> {
    debug_assert_eq!(entries.len(), blocks.len());
    let mut out = vec![0.0; xs.len()];
    for (e, b) in entries.iter().zip(blocks) {
        b.score_many(&e.alpha, xs, &mut out);
    }
    for o in &mut out {
        *o += bias;
    }
    out
}

fn check_inputs(dim: usize, xs: &[&[f64]]) -> Result<()> {
    for x in xs {
        check_dim(dim, x.len())?;
    }
    Ok(())
}

/// Evaluates the model at `x`, regenerating feature blocks from the seeds.
pub fn predict(model: &Model, x: &[f64]) -> Result<Prediction> {
    check_dim(model.dim, x.len())?;
    let mut score = 0.0;
    for e in &model.entries {
        let block = model.block_for(e)?;
        score += block.score_unchecked(&e.alpha, x);
    }
    Ok(Prediction::from_score(score + model.bias))
}

/// [`predict`] for a batch, regenerating each feature block once.
pub fn predict_batch(model: &Model, xs: &[&[f64]]) -> Result<Vec<Prediction>> {
    check_inputs(model.dim, xs)?;
    let mut scores = vec![0.0; xs.len()];
    for e in &model.entries {
        model.block_for(e)?.score_many(&e.alpha, xs, &mut scores);
    }
    Ok(scores.into_iter().map(|s| Prediction::from_score(s + model.bias)).collect())
}

/// `grad_x f(x)`, regenerating feature blocks from the seeds.
pub fn grad_x(model: &Model, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(model.dim, x.len())?;
    let mut g = vec![0.0; model.dim];
    for e in &model.entries {
        let block = model.block_for(e)?;
        block.add_grad_unchecked(&e.alpha, x, &mut g);
    }
    Ok(g)
}

impl Scorer for Model {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        predict(self, x).map(|p| p.score)
    }

    fn score_batch(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        Ok(predict_batch(self, xs)?.into_iter().map(|p| p.score).collect())
    }
}

impl GradientScorer for Model {
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        grad_x(self, x)
    }
}

/// A model with its feature blocks materialised.
#[derive(Debug, Clone)]
pub struct CachedModel {
    model: Model,
    blocks: Vec<FeatureBlock>,
}

impl CachedModel {
    pub fn new(model: Model) -> Result<Self> {
        let blocks = model
            .entries
            .iter()
            .map(|e| model.block_for(e))
            .collect::<Result<Vec<_>>>()?;
        Ok(CachedModel { model, blocks })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.score(x).map(Prediction::from_score)
    }
}

impl Scorer for CachedModel {
    fn dim(&self) -> usize {
        self.model.dim
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.score_batch(&[x])?[0])
    }

    fn score_batch(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        check_inputs(self.model.dim, xs)?;
        Ok(expansion_scores(&self.model.entries, &self.blocks, self.model.bias, xs))
    }
}

impl GradientScorer for CachedModel {
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.grad_batch(&[x])?.pop().unwrap_or_default())
    }

    fn grad_batch(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        check_inputs(self.model.dim, xs)?;
        let mut grads = vec![vec![0.0; self.model.dim]; xs.len()];
        for (e, b) in self.model.entries.iter().zip(&self.blocks) {
            b.grad_many(&e.alpha, xs, &mut grads, None);
        }
        Ok(grads)
    }

    fn score_grad_batch(&self, xs: &[&[f64]]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        check_inputs(self.model.dim, xs)?;
        let mut grads = vec![vec![0.0; self.model.dim]; xs.len()];
        let mut scores = vec![0.0; xs.len()];
        for (e, b) in self.model.entries.iter().zip(&self.blocks) {
            b.grad_many(&e.alpha, xs, &mut grads, Some(&mut scores));
        }
        for s in &mut scores {
            *s += self.model.bias;
        }
        Ok((scores, grads))
    }
}
