use advsvm::config::RunConfig;
use advsvm::experiment::run_on_split;
use advsvm::report::{ExperimentReport, Stat};
use advsvm_core::attacks::AttackFamily;
use advsvm_core::data::{gaussian_blobs, LabeledDataset};
use advsvm_core::trainer::Schedule;

fn split() -> (LabeledDataset, LabeledDataset) {
    (
        gaussian_blobs(120, [0.3, 0.3], [0.7, 0.7], 0.15, 1).unwrap(),
        gaussian_blobs(40, [0.3, 0.3], [0.7, 0.7], 0.15, 2).unwrap(),
    )
}

fn small(attacks: Vec<AttackFamily>, trials: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.kernel.gamma = 2.0;
    cfg.train.c = 4.0;
    cfg.train.epsilon = 0.1;
    cfg.train.batch_size = 4;
    cfg.train.block_size = 8;
    cfg.train.iterations = 64;
    cfg.train.seed = 9;
    cfg.experiment.trials = trials;
    cfg.experiment.attacks = attacks;
    cfg.experiment.constant = Schedule::Constant { eta: 0.05 };
    cfg.experiment.max_attack_samples = [(AttackFamily::CwL2, 4), (AttackFamily::Zoo, 2)].into_iter().collect();
    cfg.attack.epsilon = 0.1;
    cfg.attack.cw_iters = 10;
    cfg.attack.zoo_iters = 20;
    cfg
}

fn run(cfg: &RunConfig) -> ExperimentReport {
    let (tr, te) = split();
    let (r, failure) = run_on_split(cfg, &tr, &te).unwrap();
    assert!(failure.is_none());
    r
}

#[test]
fn no_attacks_reports_clean_accuracy_only() {
    let r = run(&small(vec![], 1));
    assert_eq!(r.columns(), vec!["Normal"]);
    assert_eq!(r.variants.len(), 3);
    for v in &r.variants {
        assert!(v.trials[0].robust.is_empty());
        assert!(v.clean().mean > 80.0, "{} clean {}", v.name, v.clean().mean);
    }
    assert_eq!(r.to_csv().lines().next().unwrap(), "model,epsilon,schedule,Normal mean,Normal std,train seconds");
}

#[test]
fn full_table_has_one_column_per_attack() {
    let r = run(&small(AttackFamily::ALL.to_vec(), 1));
    assert_eq!(r.columns(), vec!["Normal", "FGSM", "PGD", "C&W", "ZOO"]);
    assert_eq!(r.attack_samples, vec![40, 40, 4, 2]);
    let summary = r.summary();
    for name in ["natural", "adv-svm(C)", "adv-svm(D)", "C&W"] {
        assert!(summary.contains(name), "{summary}");
    }
    for v in &r.variants {
        assert!(v.trace.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(v.trace.last().unwrap().0, 64);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let cfg = small(vec![AttackFamily::Fgsm, AttackFamily::Zoo], 2);
    let (a, b) = (run(&cfg).without_timings(), run(&cfg).without_timings());
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    let seeds: Vec<u64> = a.variants[0].trials.iter().map(|t| t.master_seed).collect();
    assert_eq!(seeds, vec![9, 10]);
}

#[test]
fn zero_trials_is_a_config_error() {
    let (tr, te) = split();
    assert!(run_on_split(&small(vec![], 0), &tr, &te).is_err());
}

#[test]
fn stat_uses_sample_deviation() {
    let s = Stat::of(&[1.0, 2.0, 3.0]);
    assert_eq!(s.mean, 2.0);
    assert_eq!(s.std, 1.0);
    assert_eq!(Stat::of(&[5.0]).std, 0.0);
}
