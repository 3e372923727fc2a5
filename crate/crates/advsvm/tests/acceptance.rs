//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! `cargo test -p advsvm --test acceptance -- 4 9` runs a subset.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use advsvm::config::RunConfig;
use advsvm::experiment::{attack_model, clean_accuracy, load_split, run_on_split};
use advsvm::modelio::{load_model, save_model};
use advsvm_core::attacks::{AttackConfig, AttackFamily};
use advsvm_core::convergence::{convergence_slope, log_spaced};
use advsvm_core::data::{gaussian_blobs, LabeledDataset};
use advsvm_core::features::{approx_kernel, sample_block};
use advsvm_core::kernel::{epsilon_prime, kernel_eval, regularized_hinge, worst_case_perturbation, Label};
use advsvm_core::predictor::{predict_batch, CachedModel, GradientScorer, Scorer};
use advsvm_core::reference::{reference_train_with, ReferenceBudget};
use advsvm_core::rng::{CounterRng, Purpose};
use advsvm_core::trainer::{train, train_observed, train_with_transcript, Schedule, TrainConfig};
use advsvm_core::KernelSpec;

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "random feature fidelity", limit: Duration::from_secs(10), run: rff_fidelity },
    Criterion { id: 2, name: "worst-case hinge oracle", limit: Duration::from_secs(30), run: hinge_oracle },
    Criterion { id: 3, name: "coefficient bounds", limit: Duration::from_secs(120), run: coefficient_bounds },
    Criterion { id: 4, name: "convergence rate", limit: Duration::from_secs(600), run: convergence_rate },
    Criterion { id: 5, name: "robustness gain (MNIST 1v7)", limit: Duration::from_secs(900), run: robustness_gain },
    Criterion { id: 6, name: "attack-strength monotonicity", limit: Duration::from_secs(600), run: attack_monotonicity },
    Criterion { id: 7, name: "schedule comparison (MNIST 1v7)", limit: Duration::from_secs(900), run: schedule_comparison },
    Criterion { id: 8, name: "determinism and serialization", limit: Duration::from_secs(60), run: determinism },
    Criterion { id: 9, name: "gradient oracle", limit: Duration::from_secs(10), run: gradient_oracle },
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let t0 = Instant::now();
        let res = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let took = t0.elapsed();
        let (ok, detail) = match res {
            Ok((_, d)) if took > c.limit => (false, format!("{d}; over the {:.0} s limit", c.limit.as_secs_f64())),
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({:.1} s) {}",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn uniform_vec(rng: &mut CounterRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.uniform()).collect()
}

fn rff_fidelity() -> Outcome {
    let (blocks, per_block, d) = (8usize, 128usize, 10usize);
    let mut rng = CounterRng::new(1, Purpose::Synthetic, 0);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..1000).map(|_| (uniform_vec(&mut rng, d), uniform_vec(&mut rng, d))).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [0.5, 1.0, 2.0] {
        let spec = KernelSpec::rbf(gamma).map_err(err)?;
        let bs = (1..=blocks as u64)
            .map(|i| sample_block(42, i, per_block, d, &spec))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let (mut sum, mut max) = (0.0f64, 0.0f64);
        for (x, y) in &pairs {
            let e = (approx_kernel(&bs, x, y).map_err(err)? - kernel_eval(&spec, x, y).map_err(err)?).abs();
            sum += e;
            max = max.max(e);
        }
        let mean = sum / pairs.len() as f64;
        ok &= mean <= 0.05;
        parts.push(format!("gamma {gamma}: mean {mean:.4} max {max:.4}"));
    }
    Ok((ok, format!("m = {}; {}", blocks * per_block, parts.join(", "))))
}

fn hinge_oracle() -> Outcome {
    let samples = 20_000;
    let mut rng = CounterRng::new(2, Purpose::Synthetic, 0);
    let (mut above, mut active, mut worst_gap, mut miss) = (0usize, 0usize, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..100 {
        let d = 2 + rng.below(7);
        let w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let phi: Vec<f64> = (0..d).map(|_| rng.normal() * 0.5).collect();
        let b = rng.normal() * 0.3;
        let y = if rng.uniform() < 0.5 { Label::Pos } else { Label::Neg };
        let ep = 0.05 + rng.uniform();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, c)| a * c).sum::<f64>();
        let norm_w = dot(&w, &w).sqrt();
        let hinge_at = |delta: &[f64]| {
            let shifted: Vec<f64> = phi.iter().zip(delta).map(|(p, q)| p + q).collect();
            (1.0 - y.sign() * (dot(&w, &shifted) + b)).max(0.0)
        };
        let closed = regularized_hinge(dot(&w, &phi), norm_w, y, ep, b);
        if closed > 0.0 {
            active += 1;
        }
        let mut sampled = f64::NEG_INFINITY;
        for _ in 0..samples {
            let mut u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let nu = dot(&u, &u).sqrt();
            let r = ep * rng.uniform().powf(1.0 / d as f64);
            u.iter_mut().for_each(|v| *v *= r / nu);
            sampled = sampled.max(hinge_at(&u));
        }
        if sampled > closed + 1e-12 {
            above += 1;
        }
        if closed > 0.0 {
            worst_gap = worst_gap.max(sampled - closed);
        }
        let star = worst_case_perturbation(&w, y, ep).map_err(err)?;
        miss = miss.max((hinge_at(&star) - closed).abs());
    }
    Ok((
        above == 0 && miss <= 1e-9,
        format!(
            "{above}/100 sampled maxima above closed form ({active} with positive loss, largest excess among those {worst_gap:.2e}); maximizer error {miss:.2e}"
        ),
    ))
}

fn coefficient_bounds() -> Outcome {
    let mut rng = CounterRng::new(3, Purpose::Synthetic, 0);
    let spec = KernelSpec::rbf(1.0).map_err(err)?;
    let (mut violations, mut floor_runs, mut worst) = (0usize, 0usize, 0.0f64);
    let mut by_kind = BTreeMap::new();
    for run in 0..50u64 {
        let data = gaussian_blobs(200, [0.0, 0.0], [1.0, 1.0], 0.6, run).map_err(err)?;
        let schedule = if run % 2 == 0 {
            Schedule::Diminishing { theta: 0.5 + 0.5 * (1.0 - rng.uniform()) }
        } else {
            Schedule::Constant { eta: 0.01 + 0.98 * rng.uniform() }
        };
        let cfg = TrainConfig {
            c: 0.5 + 3.5 * rng.uniform(),
            epsilon: 0.5 + 1.5 * rng.uniform(),
            schedule,
            batch_size: 1 + rng.below(4),
            block_size: 8,
            iterations: 200,
            master_seed: run,
            learn_bias: false,
        };
        let (_, tr) = train_with_transcript(&data, &cfg, &spec).map_err(err)?;
        let eps_prime = epsilon_prime(&spec, cfg.epsilon).map_err(err)?;
        let floored = tr.records.iter().filter(|r| r.norm_floored == eps_prime * cfg.c).count();
        if floored > 0 {
            floor_runs += 1;
        }
        violations += tr.bound_violations.len();
        worst = worst.max(tr.max_bound_ratio);
        let kind = if run % 2 == 0 { "diminishing" } else { "constant" };
        *by_kind.entry(kind).or_insert(0usize) += tr.bound_violations.len();
    }
    Ok((
        violations == 0 && floor_runs == 50,
        format!(
            "{violations} violations ({by_kind:?}); floor active in {floor_runs}/50 runs; max |a|/bound {worst:.4}"
        ),
    ))
}

fn convergence_rate() -> Outcome {
    let horizon = 10_000u64;
    let seeds = 10u64;
    let data = gaussian_blobs(2000, [0.0, 0.0], [2.0, 2.0], 1.0, 1).map_err(err)?;
    let spec = KernelSpec::rbf(1.0).map_err(err)?;
    let base = TrainConfig {
        c: 1.0,
        epsilon: 0.1,
        schedule: Schedule::Diminishing { theta: 1.0 },
        batch_size: 1,
        block_size: 4,
        iterations: horizon,
        master_seed: 0,
        learn_bias: false,
    };
    let star_cfg = TrainConfig { iterations: 10 * horizon, master_seed: 999, ..base };
    let star = reference_train_with(&data, &star_cfg, &spec, ReferenceBudget::default(), None).map_err(err)?;
    let probes: Vec<&[f64]> = (0..400).map(|i| data.row(i * 5)).collect();
    let star_scores = star.score_batch(&probes).map_err(err)?;
    let checkpoints = log_spaced(100, horizon, 16);
    let mean_error = |schedule: Schedule| -> Result<Vec<(u64, f64)>, String> {
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for seed in 0..seeds {
            let cfg = TrainConfig { schedule, master_seed: seed, ..base };
            train_observed(&data, &cfg, &spec, &mut |p| {
                if checkpoints.contains(&p.t) {
                    let s = p.scores(&probes);
                    let e = s.iter().zip(&star_scores).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / s.len() as f64;
                    *acc.entry(p.t).or_default() += e / seeds as f64;
                }
            })
            .map_err(err)?;
        }
        Ok(acc.into_iter().collect())
    };
    let dim = mean_error(base.schedule)?;
    let slope = convergence_slope(&dim).map_err(err)?;
    let dim_final = dim.last().map(|p| p.1).unwrap_or(f64::NAN);
    let eta = 2.0 / horizon as f64;
    let con = mean_error(Schedule::Constant { eta })?;
    let con_final = con.last().map(|p| p.1).unwrap_or(f64::NAN);
    let ratio = con_final / dim_final;
    Ok((
        slope <= -0.7 && ratio <= 2.0,
        format!(
            "slope {slope:.3}; final error diminishing {dim_final:.3e}, constant(eta {eta}) {con_final:.3e} (ratio {ratio:.2})"
        ),
    ))
}

fn preset() -> Result<RunConfig, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/mnist-1v7.toml");
    RunConfig::load(&path).map_err(err)
}

fn mnist_config() -> Result<RunConfig, String> {
    let mut cfg = preset()?;
    cfg.experiment.trials = 5;
    cfg.experiment.attacks = vec![AttackFamily::Fgsm, AttackFamily::Pgd];
    cfg.experiment.trace = false;
    cfg.attack = AttackConfig { epsilon: 8.0 / 255.0, pgd_steps: 10, ..cfg.attack };
    Ok(cfg)
}

type MnistSummary = BTreeMap<String, (f64, f64, f64)>;

/// `(clean %, FGSM %, PGD %)` per variant, shared by criteria 5 and 7.
fn mnist_run() -> Result<&'static MnistSummary, String> {
    static CELL: std::sync::OnceLock<Result<MnistSummary, String>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = mnist_config()?;
        let (train, test) = load_split(&cfg).map_err(err)?;
        let (report, failure) = run_on_split(&cfg, &train, &test).map_err(err)?;
        if let Some(e) = failure {
            return Err(e.to_string());
        }
        let (fi, pi) = (
            report.attack_index(AttackFamily::Fgsm).ok_or("no FGSM column")?,
            report.attack_index(AttackFamily::Pgd).ok_or("no PGD column")?,
        );
        Ok(report
            .variants
            .iter()
            .map(|v| (v.name.clone(), (v.clean().mean, v.robust(fi).mean, v.robust(pi).mean)))
            .collect())
    })
    .as_ref()
    .map_err(|e| e.clone())
}

fn variant(s: &MnistSummary, name: &str) -> Result<(f64, f64, f64), String> {
    s.get(name).copied().ok_or_else(|| format!("missing variant {name}"))
}

fn robustness_gain() -> Outcome {
    let s = mnist_run()?;
    let (nc, nf, np) = variant(s, "natural")?;
    let (ac, af, ap) = variant(s, "adv-svm(C)")?;
    Ok((
        af >= nf && ap >= np && (nc - ac).abs() <= 1.5,
        format!("natural clean/FGSM/PGD {nc:.2}/{nf:.2}/{np:.2}; adv-svm(C) {ac:.2}/{af:.2}/{ap:.2}"),
    ))
}

fn schedule_comparison() -> Outcome {
    let s = mnist_run()?;
    let (cc, _, _) = variant(s, "adv-svm(C)")?;
    let (dc, _, _) = variant(s, "adv-svm(D)")?;
    let (ce, de) = (100.0 - cc, 100.0 - dc);
    Ok((ce <= de + 0.5, format!("final test error adv-svm(C) {ce:.2}%, adv-svm(D) {de:.2}% (same run as criterion 5)")))
}

fn non_increasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn attack_monotonicity() -> Outcome {
    let cfg = preset()?;
    let (train_set, test) = load_split(&cfg).map_err(err)?;
    let spec = KernelSpec::rbf(cfg.kernel.gamma).map_err(err)?;
    let tc = TrainConfig { epsilon: 0.0, schedule: cfg.experiment.constant, ..cfg.train.to_config() };
    let model = CachedModel::new(train(&train_set, &tc, &spec).map_err(err)?).map_err(err)?;
    let clean = clean_accuracy(&model, &test).map_err(err)?;
    let robust = |steps: usize, eps: f64| -> Result<f64, String> {
        let a = AttackConfig { epsilon: eps, pgd_steps: steps, ..cfg.attack };
        Ok(attack_model(&model, &test, AttackFamily::Pgd, &a, None).map_err(err)?.robust_accuracy())
    };
    let by_k = [1usize, 5, 10, 20]
        .iter()
        .map(|&k| robust(k, 8.0 / 255.0))
        .collect::<Result<Vec<_>, _>>()?;
    let by_eps = [2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|&e| robust(10, e / 255.0))
        .collect::<Result<Vec<_>, _>>()?;
    let fmt = |v: &[f64]| v.iter().map(|a| format!("{a:.1}")).collect::<Vec<_>>().join("/");
    Ok((
        non_increasing(&by_k, 1.0) && non_increasing(&by_eps, 1.0),
        format!("clean {clean:.1}; K 1/5/10/20: {}; eps 2/4/8/16 (/255): {}", fmt(&by_k), fmt(&by_eps)),
    ))
}

fn determinism() -> Outcome {
    let mut cfg = preset()?;
    let (train_set, test) = load_split(&cfg).map_err(err)?;
    let spec = KernelSpec::rbf(cfg.kernel.gamma).map_err(err)?;
    let tc = TrainConfig { iterations: 300, ..cfg.train.to_config() };
    let model = train(&train_set, &tc, &spec).map_err(err)?;
    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("model.bin");
    save_model(&path, &model).map_err(err)?;
    let loaded = load_model(&path).map_err(err)?;
    let mut rng = CounterRng::new(8, Purpose::Synthetic, 0);
    let inputs: Vec<Vec<f64>> = (0..1000)
        .map(|i| {
            let base = test.row(i % test.len());
            base.iter().map(|v| (v + 0.1 * (rng.uniform() - 0.5)).clamp(0.0, 1.0)).collect()
        })
        .collect();
    let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
    let in_memory = predict_batch(&model, &refs).map_err(err)?;
    let reloaded = predict_batch(&loaded, &refs).map_err(err)?;
    let mismatched = in_memory
        .iter()
        .zip(&reloaded)
        .filter(|(a, b)| a.score.to_bits() != b.score.to_bits() || a.label != b.label)
        .count();

    cfg.train.iterations = 100;
    cfg.data.test_per_class = 50;
    cfg.data.train_per_class = Some(150);
    cfg.experiment.trials = 2;
    cfg.experiment.trace = true;
    cfg.experiment.attacks = AttackFamily::ALL.to_vec();
    cfg.experiment.max_attack_samples = [(AttackFamily::CwL2, 5), (AttackFamily::Zoo, 2)].into_iter().collect();
    cfg.attack.cw_iters = 20;
    cfg.attack.zoo_iters = 50;
    let (small_train, small_test) = load_split(&cfg).map_err(err)?;
    let once = || -> Result<_, String> {
        let (r, f) = run_on_split(&cfg, &small_train, &small_test).map_err(err)?;
        match f {
            Some(e) => Err(e.to_string()),
            None => Ok(r.without_timings()),
        }
    };
    let (r1, r2) = (once()?, once()?);
    let same_report = r1 == r2 && r1.to_csv() == r2.to_csv() && r1.trace_csv() == r2.trace_csv();
    Ok((
        mismatched == 0 && same_report,
        format!("{mismatched}/1000 predictions differ after reload; repeated reports identical: {same_report}"),
    ))
}

fn gradient_oracle() -> Outcome {
    let d = 5;
    let h = 1e-5;
    let (mut checked, mut failed, mut worst) = (0usize, 0usize, 0.0f64);
    for seed in 0..10u64 {
        let mut rng = CounterRng::new(seed, Purpose::Synthetic, 9);
        let rows_vec: Vec<Vec<f64>> = (0..200).map(|_| uniform_vec(&mut rng, d)).collect();
        let labels: Vec<Label> = rows_vec
            .iter()
            .map(|r| if r[0] + r[1] > 1.0 { Label::Pos } else { Label::Neg })
            .collect();
        let data = LabeledDataset::from_rows(&rows_vec, labels, "gradient oracle").map_err(err)?;
        let cfg = TrainConfig {
            c: 1.0 + rng.uniform() * 4.0,
            epsilon: rng.uniform(),
            schedule: Schedule::Constant { eta: 0.1 },
            batch_size: 4,
            block_size: 16,
            iterations: 50,
            master_seed: seed,
            learn_bias: true,
        };
        let model = CachedModel::new(train(&data, &cfg, &KernelSpec::rbf(0.5 + rng.uniform() * 2.0).map_err(err)?).map_err(err)?)
            .map_err(err)?;
        for _ in 0..10 {
            let x = uniform_vec(&mut rng, d);
            let g = model.grad(&x).map_err(err)?;
            let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
            let mut rel = 0.0f64;
            for j in 0..d {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let fd = (model.score(&xp).map_err(err)? - model.score(&xm).map_err(err)?) / (2.0 * h);
                rel = rel.max((fd - g[j]).abs() / scale);
            }
            checked += 1;
            if rel > 1e-5 {
                failed += 1;
            }
            worst = worst.max(rel);
        }
    }
    Ok((failed == 0 && checked == 100, format!("{failed}/{checked} pairs off; worst relative error {worst:.2e}")))
}
