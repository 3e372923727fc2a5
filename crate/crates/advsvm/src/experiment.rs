//! Experiment driver: trains natural and adversarial models, attacks them and
//! collects an [`ExperimentReport`].

use std::collections::BTreeSet;
use std::time::Instant;

use advsvm_core::attacks::{outcome, run_attack, AttackConfig, AttackFamily, AttackOutcome};
use advsvm_core::convergence::power_of_two_checkpoints;
use advsvm_core::data::LabeledDataset;
use advsvm_core::kernel::{KernelSpec, Label};
use advsvm_core::predictor::{CachedModel, Scorer};
use advsvm_core::trainer::{train_observed, Model, Schedule, TrainConfig};

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};
use crate::manifest::Manifest;
use crate::report::{ExperimentReport, TrialResult, VariantReport};

/// Train/test split of the configured experiment.
pub fn load_split(cfg: &RunConfig) -> AppResult<(LabeledDataset, LabeledDataset)> {
    let manifest = Manifest::load(&cfg.data.manifest)?;
    let data = manifest.entry(&cfg.data.experiment)?.load()?;
    Ok(data.split_per_class(cfg.data.test_per_class, cfg.data.train_per_class, cfg.data.split_seed)?)
}

/// Attack results for one model.
#[derive(Debug, Clone)]
pub struct AttackRun {
    pub family: AttackFamily,
    /// Adversarial inputs, one per attacked sample.
    pub adversarial: Vec<Vec<f64>>,
    pub outcomes: Vec<AttackOutcome>,
}

impl AttackRun {
    /// Percent of attacked samples still classified correctly.
    pub fn robust_accuracy(&self) -> f64 {
        100.0 * advsvm_core::attacks::robust_accuracy(&self.outcomes)
    }
}

/// Percent of rows classified correctly.
pub fn clean_accuracy<S: Scorer + ?Sized>(model: &S, test: &LabeledDataset) -> AppResult<f64> {
    Ok(100.0 * advsvm_core::selection::accuracy(model, test)?)
}

/// Attacks the first `limit` test rows (all when `None`).
pub fn attack_model(
    model: &CachedModel,
    test: &LabeledDataset,
    family: AttackFamily,
    cfg: &AttackConfig,
    limit: Option<usize>,
) -> AppResult<AttackRun> {
    let n = limit.map_or(test.len(), |l| l.min(test.len()));
    let xs: Vec<&[f64]> = test.rows().take(n).collect();
    let ys: Vec<Label> = test.labels()[..n].to_vec();
    let adversarial = run_attack(family, model, &xs, &ys, 0, cfg)?;
    let clean = model.score_batch(&xs)?;
    let adv_refs: Vec<&[f64]> = adversarial.iter().map(|v| v.as_slice()).collect();
    let adv = model.score_batch(&adv_refs)?;
    let outcomes = (0..n)
        .map(|i| outcome(xs[i], &adversarial[i], ys[i], clean[i], adv[i]))
        .collect();
    Ok(AttackRun {
        family,
        adversarial,
        outcomes,
    })
}

/// The three trained variants.
pub fn variants(cfg: &RunConfig) -> Vec<(&'static str, f64, Schedule)> {
    let e = cfg.train.epsilon;
    vec![
        ("natural", 0.0, cfg.experiment.constant),
        ("adv-svm(C)", e, cfg.experiment.constant),
        ("adv-svm(D)", e, cfg.experiment.diminishing),
    ]
}

/// Trains one model; with `trace`, also returns the test error (%) at
/// power-of-two iterations.
pub fn train_traced(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &TrainConfig,
    spec: &KernelSpec,
    trace: bool,
) -> AppResult<(Model, Vec<(u64, f64)>)> {
    let checkpoints: BTreeSet<u64> = if trace {
        power_of_two_checkpoints(cfg.iterations).into_iter().collect()
    } else {
        BTreeSet::new()
    };
    let rows: Vec<&[f64]> = test.rows().collect();
    let mut out = Vec::new();
    let model = train_observed(train, cfg, spec, &mut |p| {
        if checkpoints.contains(&p.t) {
            let scores = p.scores(&rows);
            let wrong = scores
                .iter()
                .zip(test.labels())
                .filter(|(s, y)| Label::from_score(**s) != **y)
                .count();
            out.push((p.t, 100.0 * wrong as f64 / test.len() as f64));
        }
    })?;
    Ok((model, out))
}

/// Runs the configured experiment. Component failures after the data is
/// loaded are recorded in `partial` rather than returned.
pub fn run_experiment(cfg: &RunConfig) -> AppResult<(ExperimentReport, Option<AppError>)> {
    let (train, test) = load_split(cfg)?;
    run_on_split(cfg, &train, &test)
}

pub fn run_on_split(
    cfg: &RunConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> AppResult<(ExperimentReport, Option<AppError>)> {
    let started = Instant::now();
    let spec = KernelSpec::rbf(cfg.kernel.gamma)?;
    cfg.attack.validate()?;
    if cfg.experiment.trials == 0 {
        return Err(AppError::Config("experiment.trials must be at least 1".into()));
    }
    let mut attacks: Vec<AttackFamily> = cfg.experiment.attacks.clone();
    attacks.sort();
    attacks.dedup();
    let attack_samples: Vec<usize> = attacks
        .iter()
        .map(|a| cfg.experiment.max_attack_samples.get(a).map_or(test.len(), |&l| l.min(test.len())))
        .collect();
    let mut report = ExperimentReport {
        experiment: cfg.data.experiment.clone(),
        n_train: train.len(),
        n_test: test.len(),
        attacks: attacks.clone(),
        attack_samples: attack_samples.clone(),
        variants: Vec::new(),
        wall_seconds: 0.0,
        config: cfg.clone(),
        partial: None,
    };
    let mut failure = None;

    'outer: for (name, epsilon, schedule) in variants(cfg) {
        let mut v = VariantReport {
            name: name.into(),
            epsilon,
            schedule: schedule.to_string(),
            trials: Vec::new(),
            trace: Vec::new(),
        };
        let mut traces: Vec<Vec<(u64, f64)>> = Vec::new();
        for k in 0..cfg.experiment.trials {
            let tc = TrainConfig {
                epsilon,
                schedule,
                master_seed: cfg.train.seed + k as u64,
                ..cfg.train.to_config()
            };
            let res = (|| -> AppResult<TrialResult> {
                let t0 = Instant::now();
                let (model, trace) = train_traced(train, test, &tc, &spec, cfg.experiment.trace)?;
                let train_seconds = t0.elapsed().as_secs_f64();
                traces.push(trace);
                let cached = CachedModel::new(model)?;
                let clean = clean_accuracy(&cached, test)?;
                let acfg = AttackConfig {
                    seed: cfg.attack.seed + k as u64,
                    ..cfg.attack
                };
                let mut robust = Vec::with_capacity(attacks.len());
                for (a, &n) in attacks.iter().zip(&attack_samples) {
                    let run = attack_model(&cached, test, *a, &acfg, Some(n))?;
                    log::info!("{name} trial {k}: {} robust accuracy {:.2}%", a, run.robust_accuracy());
                    robust.push(run.robust_accuracy());
                }
                Ok(TrialResult {
                    master_seed: tc.master_seed,
                    clean,
                    robust,
                    train_seconds,
                })
            })();
            match res {
                Ok(t) => v.trials.push(t),
                Err(e) => {
                    report.partial = Some(format!("{name} trial {k}: {e}"));
                    failure = Some(e);
                    if !v.trials.is_empty() {
                        report.variants.push(v);
                    }
                    break 'outer;
                }
            }
        }
        if let Some(first) = traces.first() {
            v.trace = first
                .iter()
                .enumerate()
                .map(|(i, &(t, _))| (t, traces.iter().map(|tr| tr[i].1).sum::<f64>() / traces.len() as f64))
                .collect();
        }
        report.variants.push(v);
    }
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok((report, failure))
}
