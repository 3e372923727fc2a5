//! k-fold cross-validated grid search over `(C, gamma)`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{kfold_indices, LabeledDataset};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Label};
use crate::predictor::{CachedModel, Scorer};
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    /// RBF bandwidth.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GridPoint,
    pub best_accuracy: f64,
    /// Mean validation accuracy of every grid point, in grid order.
    pub scores: Vec<(GridPoint, f64)>,
}

/// Cartesian product of `cs` and `gammas`.
pub fn grid(cs: &[f64], gammas: &[f64]) -> Vec<GridPoint> {
    cs.iter()
        .flat_map(|&c| gammas.iter().map(move |&gamma| GridPoint { c, gamma }))
        .collect()
}

/// Powers of two from `2^lo` to `2^hi`.
pub fn powers_of_two(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| libm::pow(2.0, e as f64)).collect()
}

/// The `2^-3 .. 2^3` grid in both coordinates.
pub fn default_grid() -> Vec<GridPoint> {
    let p = powers_of_two(-3, 3);
    grid(&p, &p)
}

/// Fraction of rows the scorer labels correctly.
pub fn accuracy<S: Scorer + ?Sized>(model: &S, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::input("accuracy of an empty dataset is undefined"));
    }
    let rows: Vec<&[f64]> = data.rows().collect();
    let scores = model.score_batch(&rows)?;
    let hits = scores
        .iter()
        .zip(data.labels())
        .filter(|(s, y)| Label::from_score(**s) == **y)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Grid search with a caller-supplied fit-and-score function. `evaluate`
/// returns the validation score of one point on one fold; the best mean wins
/// and ties go to the smaller `C`, then the smaller `gamma`.
pub fn grid_search_with<F>(
    data: &LabeledDataset,
    points: &[GridPoint],
    k: usize,
    seed: u64,
    mut evaluate: F,
) -> Result<GridSearchResult>
where
    F: FnMut(&GridPoint, &LabeledDataset, &LabeledDataset) -> Result<f64>,
{
    if points.is_empty() {
        return Err(Error::input("grid search needs at least one grid point"));
    }
    let folds = kfold_indices(data.len(), k, seed)?;
    let splits: Vec<(LabeledDataset, LabeledDataset)> = folds
        .iter()
        .map(|(tr, va)| (data.subset(tr), data.subset(va)))
        .collect();
    for (f, (tr, _)) in splits.iter().enumerate() {
        if !tr.has_both_classes() {
            return Err(Error::input(format!(
                "fold {f} training split holds a single class"
            )));
        }
    }
    let mut scores = Vec::with_capacity(points.len());
    for p in points {
        if !(p.c > 0.0) || !(p.gamma > 0.0) {
            return Err(Error::input(format!("grid point C={}, gamma={} is not positive", p.c, p.gamma)));
        }
        let mut sum = 0.0;
        for (tr, va) in &splits {
            sum += evaluate(p, tr, va)?;
        }
        scores.push((*p, sum / splits.len() as f64));
    }
    let mut best = scores[0];
    for &(p, s) in &scores[1..] {
        let better = s > best.1
            || (s == best.1 && (p.c < best.0.c || (p.c == best.0.c && p.gamma < best.0.gamma)));
        if better {
            best = (p, s);
        }
    }
    Ok(GridSearchResult {
        best: best.0,
        best_accuracy: best.1,
        scores,
    })
}

/// Grid search that trains with `base` (overriding `C`) and scores by
/// validation accuracy.
pub fn grid_search(
    data: &LabeledDataset,
    points: &[GridPoint],
    k: usize,
    seed: u64,
    base: &TrainConfig,
) -> Result<GridSearchResult> {
    grid_search_with(data, points, k, seed, |p, tr, va| {
        let cfg = TrainConfig { c: p.c, ..*base };
        let model = CachedModel::new(train(tr, &cfg, &KernelSpec::rbf(p.gamma)?)?)?;
        accuracy(&model, va)
    })
}
