//! Datasets, binary-pair selection, normalisation, splits and k-fold indexing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::kernel::Label;
use crate::rng::{CounterRng, Purpose};

/// The value range raw feature values are known to live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueRange {
    /// 8-bit pixel intensities, `0..=255`.
    Bytes,
    /// Already in `[0, 1]`.
    Unit,
    /// Arbitrary reals.
    Unknown,
}

/// Multi-class data as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub dim: usize,
    /// `n x dim`, row-major.
    pub features: Vec<f64>,
    pub classes: Vec<i64>,
    pub range: ValueRange,
    pub provenance: String,
}

impl RawDataset {
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        classes: Vec<i64>,
        range: ValueRange,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dataset dimension must be at least 1"));
        }
        check_dim(classes.len() * dim, features.len())?;
        Ok(RawDataset {
            dim,
            features,
            classes,
            range,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// Maps raw values into `[0, 1]`.
///
/// Byte data is divided by 255; unit data is left alone; unknown data is
/// min-max scaled globally unless it already lies in `[0, 1]`. The result is
/// tagged [`ValueRange::Unit`], so normalising twice is the same as once.
pub fn normalize(raw: &RawDataset) -> RawDataset {
    let mut out = raw.clone();
    match raw.range {
        ValueRange::Unit => {}
        ValueRange::Bytes => {
            for v in &mut out.features {
                *v /= 255.0;
            }
        }
        ValueRange::Unknown => {
            let lo = raw.features.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw.features.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(lo >= 0.0 && hi <= 1.0) && hi > lo {
                let span = hi - lo;
                for v in &mut out.features {
                    *v = ((*v - lo) / span).clamp(0.0, 1.0);
                }
            } else if hi <= lo {
                for v in &mut out.features {
                    *v = 0.0;
                }
            }
        }
    }
    out.range = ValueRange::Unit;
    out
}

/// Binary-labelled data with features in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<Label>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dataset dimension must be at least 1"));
        }
        check_dim(labels.len() * dim, features.len())?;
        if let Some(pos) = features.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input(format!(
                "feature value {} at row {} is outside [0, 1]",
                features[pos],
                pos / dim
            )));
        }
        Ok(LabeledDataset {
            dim,
            features,
            labels,
            provenance: provenance.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>, provenance: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            check_dim(dim, r.len())?;
            features.extend_from_slice(r);
        }
        Self::new(dim, features, labels, provenance)
    }

    /// Reads a raw dataset whose classes are already `+1` / `-1`.
    pub fn from_signed(raw: &RawDataset) -> Result<Self> {
        let norm = normalize(raw);
        let labels = norm
            .classes
            .iter()
            .map(|&c| Label::from_signed(c as f64))
            .collect::<Result<Vec<_>>>()?;
        Self::new(norm.dim, norm.features, labels, norm.provenance)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&Label::Pos) && self.labels.contains(&Label::Neg)
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            dim: self.dim,
            features,
            labels,
            provenance: self.provenance.clone(),
        }
    }

    /// Seeded per-class split: after shuffling, the first `test_per_class`
    /// samples of each class go to the test set and up to `train_per_class`
    /// of the remainder (all of it when `None`) to the training set.
    pub fn split_per_class(
        &self,
        test_per_class: usize,
        train_per_class: Option<usize>,
        seed: u64,
    ) -> Result<(LabeledDataset, LabeledDataset)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        CounterRng::new(seed, Purpose::Shuffle, 1).shuffle(&mut order);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [Label::Pos, Label::Neg] {
            let members: Vec<usize> = order.iter().copied().filter(|&i| self.labels[i] == class).collect();
            if members.len() <= test_per_class {
                return Err(Error::input(format!(
                    "class {class:?} has {} samples, cannot hold out {test_per_class}",
                    members.len()
                )));
            }
            test.extend_from_slice(&members[..test_per_class]);
            let rest = &members[test_per_class..];
            let take = train_per_class.map_or(rest.len(), |k| k.min(rest.len()));
            train.extend_from_slice(&rest[..take]);
        }
        // Interleave classes again so prefixes stay mixed.
        CounterRng::new(seed, Purpose::Shuffle, 2).shuffle(&mut train);
        CounterRng::new(seed, Purpose::Shuffle, 3).shuffle(&mut test);
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// Keeps the two named classes, maps `class_a -> +1` and `class_b -> -1`, and
/// normalises feature values into `[0, 1]`.
pub fn select_binary(raw: &RawDataset, class_a: i64, class_b: i64) -> Result<LabeledDataset> {
    if class_a == class_b {
        return Err(Error::input("select_binary needs two distinct classes"));
    }
    let present: BTreeMap<i64, usize> = raw.classes.iter().fold(BTreeMap::new(), |mut m, c| {
        *m.entry(*c).or_insert(0) += 1;
        m
    });
    for c in [class_a, class_b] {
        if !present.contains_key(&c) {
            return Err(Error::input(format!("class {c} does not occur in {}", raw.provenance)));
        }
    }
    let norm = normalize(raw);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, &c) in norm.classes.iter().enumerate() {
        let label = if c == class_a {
            Label::Pos
        } else if c == class_b {
            Label::Neg
        } else {
            continue;
        };
        features.extend_from_slice(norm.row(i));
        labels.push(label);
    }
    LabeledDataset::new(
        norm.dim,
        features,
        labels,
        format!("{} [{class_a} vs {class_b}]", raw.provenance),
    )
}

/// One fold: training indices and validation indices.
pub type Fold = (Vec<usize>, Vec<usize>);

/// Seeded k-fold split of `0..n`. Fold sizes differ by at most one, with the
/// larger folds first.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::input("k-fold needs k >= 2"));
    }
    if k > n {
        return Err(Error::input(format!("cannot split {n} samples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    CounterRng::new(seed, Purpose::Shuffle, 0).shuffle(&mut order);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let val = order[start..start + size].to_vec();
        let mut train = Vec::with_capacity(n - size);
        train.extend_from_slice(&order[..start]);
        train.extend_from_slice(&order[start + size..]);
        folds.push((train, val));
        start += size;
    }
    Ok(folds)
}

/// Two isotropic Gaussian blobs (`+1` around `center_pos`, `-1` around
/// `center_neg`), min-max scaled into `[0, 1]^2`.
pub fn gaussian_blobs(
    n: usize,
    center_pos: [f64; 2],
    center_neg: [f64; 2],
    std: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    let mut rng = CounterRng::new(seed, Purpose::Synthetic, 0);
    let mut features = Vec::with_capacity(2 * n);
    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let (c, label) = if i % 2 == 0 { (center_pos, 1) } else { (center_neg, -1) };
        features.push(c[0] + std * rng.normal());
        features.push(c[1] + std * rng.normal());
        classes.push(label);
    }
    let raw = RawDataset::new(2, features, classes, ValueRange::Unknown, format!("blobs(n={n}, seed={seed})"))?;
    LabeledDataset::from_signed(&raw)
}

/// Counts of `(+1, -1)` labels.
pub fn class_counts(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|l| **l == Label::Pos).count();
    (pos, labels.len() - pos)
}
