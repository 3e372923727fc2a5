use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advsvm::config::RunConfig;
use advsvm::csvio::load_features;
use advsvm::error::{AppError, AppResult};
use advsvm::experiment::{attack_model, clean_accuracy, load_split, run_experiment};
use advsvm::modelio::{load_model, save_model};
use advsvm_core::attacks::AttackFamily;
use advsvm_core::kernel::KernelSpec;
use advsvm_core::predictor::{CachedModel, Scorer};
use advsvm_core::selection::{grid, grid_search, powers_of_two};
use advsvm_core::trainer::{train, Schedule};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "advsvm", version, about = "Adversarially robust kernel SVMs trained with doubly stochastic gradients")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Training perturbation radius (L2, input space).
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// `constant:<eta>` or `diminishing:<theta>`.
    #[arg(long, global = true)]
    schedule: Option<Schedule>,
    #[arg(long, global = true)]
    iterations: Option<u64>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    block_size: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// RBF bandwidth.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Regularisation trade-off.
    #[arg(long = "c", global = true)]
    c: Option<f64>,
    /// Attack family (fgsm, pgd, cw, zoo); repeatable.
    #[arg(long = "attack", global = true)]
    attack: Vec<AttackFamily>,
    /// Attack radius (L-infinity) for FGSM and PGD.
    #[arg(long, global = true)]
    attack_epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the configured training split and write a model file.
    Train {
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score the rows of a feature-only CSV, already scaled to [0, 1].
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Attack the test split and write a per-sample dump.
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Attack at most this many test rows.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Clean and robust accuracy of a model on the test split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// k-fold grid search over (C, gamma) on the training split.
    Gridsearch {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Full experiment: natural, adv-svm(C) and adv-svm(D), all attacks.
    Bench {
        #[arg(long, short)]
        out_dir: PathBuf,
    },
}

fn load_config(c: &Common) -> AppResult<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = c.epsilon {
        cfg.train.epsilon = v;
    }
    if let Some(v) = c.schedule {
        cfg.train.schedule = v;
        match v {
            Schedule::Constant { .. } => cfg.experiment.constant = v,
            Schedule::Diminishing { .. } => cfg.experiment.diminishing = v,
        }
    }
    if let Some(v) = c.iterations {
        cfg.train.iterations = v;
    }
    if let Some(v) = c.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = c.block_size {
        cfg.train.block_size = v;
    }
    if let Some(v) = c.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = c.gamma {
        cfg.kernel.gamma = v;
    }
    if let Some(v) = c.c {
        cfg.train.c = v;
    }
    if let Some(v) = c.attack_epsilon {
        cfg.attack.epsilon = v;
    }
    if !c.attack.is_empty() {
        cfg.experiment.attacks = c.attack.clone();
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> AppResult<()> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn open_model(path: &Path) -> AppResult<CachedModel> {
    Ok(CachedModel::new(load_model(path)?)?)
}

fn run(cli: Cli) -> AppResult<()> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Train { out } => {
            let (tr, te) = load_split(&cfg)?;
            let model = train(&tr, &cfg.train.to_config(), &KernelSpec::rbf(cfg.kernel.gamma)?)?;
            save_model(&out, &model)?;
            let acc = clean_accuracy(&CachedModel::new(model.clone())?, &te)?;
            println!(
                "trained {} entries on {} rows; test accuracy {acc:.2}%; wrote {}",
                model.entries.len(),
                tr.len(),
                out.display()
            );
        }
        Command::Predict { model, input, out } => {
            let m = open_model(&model)?;
            let raw = load_features(&input)?;
            let rows: Vec<&[f64]> = (0..raw.len()).map(|i| raw.row(i)).collect();
            let scores = m.score_batch(&rows)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["id", "score", "label"]).expect("in-memory write");
            for (i, s) in scores.iter().enumerate() {
                let label = if *s >= 0.0 { "+1" } else { "-1" };
                w.write_record([i.to_string(), format!("{s:?}"), label.to_string()])
                    .expect("in-memory write");
            }
            let text = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
            match out {
                Some(p) => write(&p, &text)?,
                None => {
                    let _ = std::io::stdout().write_all(text.as_bytes());
                }
            }
        }
        Command::Attack { model, out, limit } => {
            let m = open_model(&model)?;
            let (_, te) = load_split(&cfg)?;
            let family = *cfg.experiment.attacks.first().unwrap_or(&AttackFamily::Pgd);
            let run = attack_model(&m, &te, family, &cfg.attack, limit)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["id", "clean_label", "clean_score", "adv_score", "l2", "linf", "success"])
                .expect("in-memory write");
            for (i, o) in run.outcomes.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    format!("{:+}", te.label(i).sign() as i32),
                    format!("{:?}", o.clean_score),
                    format!("{:?}", o.adv_score),
                    format!("{:?}", o.l2),
                    format!("{:?}", o.linf),
                    u8::from(o.success).to_string(),
                ])
                .expect("in-memory write");
            }
            write(&out, &String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"))?;
            println!(
                "{family}: robust accuracy {:.2}% on {} samples; wrote {}",
                run.robust_accuracy(),
                run.outcomes.len(),
                out.display()
            );
        }
        Command::Eval { model, limit } => {
            let m = open_model(&model)?;
            let (_, te) = load_split(&cfg)?;
            println!("Normal: {:.2}%", clean_accuracy(&m, &te)?);
            for a in &cfg.experiment.attacks {
                let cap = limit.or_else(|| cfg.experiment.max_attack_samples.get(a).copied());
                let run = attack_model(&m, &te, *a, &cfg.attack, cap)?;
                println!("{}: {:.2}% ({} samples)", a.display_name(), run.robust_accuracy(), run.outcomes.len());
            }
        }
        Command::Gridsearch { out } => {
            let (tr, _) = load_split(&cfg)?;
            let g = &cfg.gridsearch;
            let points = grid(
                &powers_of_two(g.log2_c[0], g.log2_c[1]),
                &powers_of_two(g.log2_gamma[0], g.log2_gamma[1]),
            );
            let r = grid_search(&tr, &points, g.folds, cfg.data.split_seed, &cfg.train.to_config())?;
            let mut text = String::from("c,gamma,accuracy\n");
            for (p, acc) in &r.scores {
                text.push_str(&format!("{},{},{:.6}\n", p.c, p.gamma, acc));
            }
            if let Some(p) = out {
                write(&p, &text)?;
            }
            println!(
                "best C={} gamma={} (mean validation accuracy {:.2}%)",
                r.best.c,
                r.best.gamma,
                100.0 * r.best_accuracy
            );
        }
        Command::Bench { out_dir } => {
            fs::create_dir_all(&out_dir).map_err(|e| AppError::io(&out_dir, e))?;
            let (report, failure) = run_experiment(&cfg)?;
            write(&out_dir.join("report.csv"), &report.to_csv())?;
            write(&out_dir.join("trace.csv"), &report.trace_csv())?;
            write(&out_dir.join("summary.txt"), &report.summary())?;
            write(&out_dir.join("config.toml"), &cfg.to_toml())?;
            print!("{}", report.summary());
            if let Some(e) = failure {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
