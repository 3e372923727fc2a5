//! Exact-kernel twin of the doubly stochastic trainer.
//!
//! [`reference_train`] follows the same batch draws, step sizes, activity
//! test and shrink factors as [`crate::trainer::train`], but adds exact
//! kernel terms `k(x_i, .)` instead of random-feature blocks. Coefficients
//! are collapsed per training row and share a running scale, so an
//! iteration costs `O(B * support)` kernel evaluations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::kernel::{epsilon_prime, regularized_hinge, KernelSpec};
use crate::predictor::Scorer;
use crate::trainer::{batch_indices, norm_update_terms, shrink_factor_weighted, step_size, TrainConfig};

/// Cap on the number of kernel evaluations a reference run may perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceBudget {
    pub max_kernel_evals: u64,
}

impl Default for ReferenceBudget {
    fn default() -> Self {
        ReferenceBudget {
            max_kernel_evals: 2_000_000_000,
        }
    }
}

impl ReferenceBudget {
    /// Kernel evaluations a run of `cfg` on `n` rows may need.
    pub fn estimate(cfg: &TrainConfig, n: usize) -> u64 {
        let b = cfg.batch_size as u64;
        let support = (n as u64).min(cfg.iterations.saturating_mul(b));
        cfg.iterations
            .saturating_mul(b)
            .saturating_mul(support.saturating_add(b))
    }
}

/// `h(x) = sum_i beta_i k(x_i, x) + b` over the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub kernel: KernelSpec,
    pub eps_prime: f64,
    pub bias: f64,
    /// Tracked `|h|^2` from the norm recursion.
    pub norm_sq: f64,
    support: LabeledDataset,
    coeffs: Vec<f64>,
}

impl ReferenceModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn support(&self) -> &LabeledDataset {
        &self.support
    }

    /// `sum_i beta_i k(x_i, x)` without the bias.
    pub fn eval_function(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.support.dim(), x.len())?;
        Ok(self.raw_eval(x))
    }

    fn raw_eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                acc += c * self.kernel.eval_unchecked(self.support.row(i), x);
            }
        }
        acc
    }

    /// `|h|^2` computed directly from the Gram matrix.
    pub fn exact_norm_sq(&self) -> f64 {
        let diff = self.coeffs.clone();
        self.gram_form(&diff)
    }

    fn gram_form(&self, c: &[f64]) -> f64 {
        let nz: Vec<usize> = (0..c.len()).filter(|&i| c[i] != 0.0).collect();
        let mut acc = 0.0;
        for &i in &nz {
            for &j in &nz {
                acc += c[i] * c[j] * self.kernel.eval_unchecked(self.support.row(i), self.support.row(j));
            }
        }
        acc.max(0.0)
    }

    /// `|h - g|^2` in the RKHS. Both models must be expansions over the same
    /// training rows.
    pub fn rkhs_dist_sq(&self, other: &ReferenceModel) -> Result<f64> {
        if self.support != other.support || self.kernel != other.kernel {
            return Err(Error::input(
                "RKHS distance needs reference models over the same rows and kernel",
            ));
        }
        let diff: Vec<f64> = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(self.gram_form(&diff))
    }
}

impl Scorer for ReferenceModel {
    fn dim(&self) -> usize {
        self.support.dim()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_function(x)? + self.bias)
    }
}

/// One iteration of a reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecord {
    pub t: u64,
    pub step: f64,
    pub active: usize,
    pub norm_floored: f64,
    pub shrink: f64,
    pub norm_sq_after: f64,
}

pub fn reference_train(data: &LabeledDataset, cfg: &TrainConfig, spec: &KernelSpec) -> Result<ReferenceModel> {
    reference_train_with(data, cfg, spec, ReferenceBudget::default(), None)
}

pub fn reference_train_with_transcript(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    spec: &KernelSpec,
    budget: ReferenceBudget,
) -> Result<(ReferenceModel, Vec<ReferenceRecord>)> {
    let mut records = Vec::new();
    let model = reference_train_with(data, cfg, spec, budget, Some(&mut records))?;
    Ok((model, records))
}

pub fn reference_train_with(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    spec: &KernelSpec,
    budget: ReferenceBudget,
    mut records: Option<&mut Vec<ReferenceRecord>>,
) -> Result<ReferenceModel> {
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    spec.validate()?;
    cfg.validate(data.len())?;
    let need = ReferenceBudget::estimate(cfg, data.len());
    if need > budget.max_kernel_evals {
        return Err(Error::Budget(format!(
            "reference run needs about {need} kernel evaluations, budget is {}; \
             reduce iterations, batch size or training rows",
            budget.max_kernel_evals
        )));
    }

    let eps_prime = epsilon_prime(spec, cfg.epsilon)?;
    let budget_c = eps_prime * cfg.c;
    let b = cfg.batch_size as f64;
    let n = data.len();

    // True coefficients are `scale * raw[i]`.
    let mut raw = vec![0.0; n];
    let mut support: Vec<usize> = Vec::new();
    let mut in_support = vec![false; n];
    let mut scale = 1.0f64;
    let mut norm_sq = 0.0f64;
    let mut bias = 0.0f64;

    for t in 1..=cfg.iterations {
        let step = step_size(&cfg.schedule, t)?;
        let batch = batch_indices(cfg.master_seed, t, cfg.batch_size, n);
        let scores: Vec<f64> = batch
            .iter()
            .map(|&k| {
                let x = data.row(k);
                let mut acc = 0.0;
                for &i in &support {
                    acc += raw[i] * spec.eval_unchecked(data.row(i), x);
                }
                scale * acc
            })
            .collect();
        if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                iteration: t,
                what: format!("h_t(x) is {} for batch row {}", scores[pos], batch[pos]),
            });
        }
        let norm = libm::sqrt(norm_sq);
        let active: Vec<usize> = (0..batch.len())
            .filter(|&k| regularized_hinge(scores[k], norm, data.label(batch[k]), eps_prime, bias) > 0.0)
            .collect();
        let frac = active.len() as f64 / b;
        let norm_floored = norm.max(budget_c);
        let shrink = shrink_factor_weighted(step, eps_prime, cfg.c, norm_floored, frac)?.max(-1.0);

        let coeff = step * cfg.c / b;
        let mut cross = 0.0;
        let mut gram = 0.0;
        for &i in &active {
            let yi = data.label(batch[i]).sign();
            cross += yi * scores[i];
            for &j in &active {
                let yj = data.label(batch[j]).sign();
                gram += yi * yj * spec.eval_unchecked(data.row(batch[i]), data.row(batch[j]));
            }
        }
        norm_sq = norm_update_terms(norm_sq, shrink, coeff * cross, coeff * coeff * gram);

        scale *= shrink;
        if scale == 0.0 {
            raw.iter_mut().for_each(|r| *r = 0.0);
            scale = 1.0;
        } else if scale.abs() < 1e-150 {
            for &i in &support {
                raw[i] *= scale;
            }
            scale = 1.0;
        }
        for &k in &active {
            let i = batch[k];
            raw[i] += coeff * data.label(i).sign() / scale;
            if !in_support[i] {
                in_support[i] = true;
                support.push(i);
            }
        }
        if cfg.learn_bias && !active.is_empty() {
            let ysum: f64 = active.iter().map(|&k| data.label(batch[k]).sign()).sum();
            bias += coeff * ysum;
        }
        if !norm_sq.is_finite() {
            return Err(Error::Numerical {
                iteration: t,
                what: "tracked norm is not finite".into(),
            });
        }
        if let Some(r) = records.as_deref_mut() {
            r.push(ReferenceRecord {
                t,
                step,
                active: active.len(),
                norm_floored,
                shrink,
                norm_sq_after: norm_sq,
            });
        }
    }

    Ok(ReferenceModel {
        kernel: *spec,
        eps_prime,
        bias,
        norm_sq,
        support: data.clone(),
        coeffs: raw.iter().map(|r| r * scale).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian_blobs;
    use crate::kernel::Label;
    use crate::trainer::{train, train_with_transcript, Schedule};
    use approx::assert_abs_diff_eq;

    fn blobs(seed: u64) -> LabeledDataset {
        gaussian_blobs(60, [0.0, 0.0], [1.0, 1.0], 0.6, seed).unwrap()
    }

    fn cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            c: 1.0,
            epsilon: 0.1,
            schedule: Schedule::Diminishing { theta: 1.0 },
            batch_size: 4,
            block_size: 64,
            iterations: 40,
            master_seed: seed,
            learn_bias: false,
        }
    }

    #[test]
    fn first_step_adds_step_times_c_times_label() {
        let data = LabeledDataset::from_rows(&[vec![0.2, 0.4]], vec![Label::Neg], "one").unwrap();
        let c = TrainConfig {
            c: 2.5,
            epsilon: 0.0,
            schedule: Schedule::Constant { eta: 0.3 },
            batch_size: 1,
            iterations: 1,
            ..cfg(0)
        };
        let m = reference_train(&data, &c, &KernelSpec::rbf(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(m.coefficients()[0], -0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(m.score(&[0.2, 0.4]).unwrap(), -0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(m.norm_sq, 0.5625, epsilon = 1e-15);
    }

    #[test]
    fn tracked_norm_matches_gram_form() {
        let data = blobs(1);
        let m = reference_train(&data, &cfg(1), &KernelSpec::rbf(2.0).unwrap()).unwrap();
        let exact = m.exact_norm_sq();
        assert!((m.norm_sq - exact).abs() <= 1e-9 * (1.0 + exact), "{} vs {exact}", m.norm_sq);
    }

    #[test]
    fn shrink_sequence_follows_the_shared_rule() {
        let data = blobs(2);
        let spec = KernelSpec::rbf(2.0).unwrap();
        let c = cfg(2);
        let (_m, rec) = reference_train_with_transcript(&data, &c, &spec, ReferenceBudget::default()).unwrap();
        let (_f, tr) = train_with_transcript(&data, &c, &spec).unwrap();
        let ep = epsilon_prime(&spec, c.epsilon).unwrap();
        for r in &rec {
            let s = shrink_factor_weighted(r.step, ep, c.c, r.norm_floored, r.active as f64 / c.batch_size as f64)
                .unwrap();
            assert_eq!(s.to_bits(), r.shrink.to_bits());
        }
        // Same step sizes and the first iteration sees identical inputs.
        for (a, b) in rec.iter().zip(&tr.records) {
            assert_eq!(a.step.to_bits(), b.step.to_bits());
        }
        assert_eq!(rec[0].shrink.to_bits(), tr.records[0].shrink.to_bits());
    }

    #[test]
    fn budget_is_enforced() {
        let data = blobs(3);
        let tiny = ReferenceBudget { max_kernel_evals: 10 };
        let err = reference_train_with(&data, &cfg(3), &KernelSpec::rbf(1.0).unwrap(), tiny, None).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
    }

    #[test]
    fn rkhs_distance_is_zero_for_self_and_symmetric() {
        let data = blobs(4);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let a = reference_train(&data, &cfg(4), &spec).unwrap();
        let b = reference_train(&data, &cfg(5), &spec).unwrap();
        assert_eq!(a.rkhs_dist_sq(&a).unwrap(), 0.0);
        assert_abs_diff_eq!(a.rkhs_dist_sq(&b).unwrap(), b.rkhs_dist_sq(&a).unwrap(), epsilon = 1e-12);
        let other = reference_train(&blobs(9), &cfg(4), &spec).unwrap();
        assert!(a.rkhs_dist_sq(&other).is_err());
    }

    #[test]
    fn feature_error_shrinks_with_block_size() {
        // |f - h| should roughly halve when the block size quadruples.
        let spec = KernelSpec::rbf(1.0).unwrap();
        let probes: Vec<[f64; 2]> = (0..25).map(|k| [(k % 5) as f64 / 4.0, (k / 5) as f64 / 4.0]).collect();
        let rms = |m: usize| -> f64 {
            let mut acc = 0.0;
            let mut count = 0.0;
            for seed in 0..12 {
                let data = blobs(100 + seed);
                let c = TrainConfig {
                    epsilon: 0.0,
                    block_size: m,
                    iterations: 30,
                    batch_size: 2,
                    ..cfg(seed)
                };
                let f = train(&data, &c, &spec).unwrap();
                let h = reference_train(&data, &c, &spec).unwrap();
                for p in &probes {
                    let d = f.score(p).unwrap() - h.score(p).unwrap();
                    acc += d * d;
                    count += 1.0;
                }
            }
            libm::sqrt(acc / count)
        };
        let (e1, e4) = (rms(64), rms(256));
        let ratio = e4 / e1;
        assert!((0.25..=0.75).contains(&ratio), "ratio {ratio} ({e1} -> {e4})");
    }

    #[test]
    fn error_decomposition_holds_pointwise() {
        // |f - f*|^2 <= 2 |f - h|^2 + 2 kappa |h - f*|^2 at every probe.
        let spec = KernelSpec::rbf(1.0).unwrap();
        let data = blobs(7);
        let c = cfg(7);
        let f = train(&data, &c, &spec).unwrap();
        let h = reference_train(&data, &c, &spec).unwrap();
        let long = TrainConfig { iterations: 4000, master_seed: 70, ..c };
        let fstar = reference_train(&data, &long, &spec).unwrap();
        let dist = h.rkhs_dist_sq(&fstar).unwrap();
        let kappa = spec.bound();
        for k in 0..50 {
            let p = [(k % 10) as f64 / 9.0, (k / 10) as f64 / 4.0];
            let lhs = (f.score(&p).unwrap() - fstar.score(&p).unwrap()).powi(2);
            let rhs = 2.0 * (f.score(&p).unwrap() - h.score(&p).unwrap()).powi(2) + 2.0 * kappa * dist;
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }
    }
}
