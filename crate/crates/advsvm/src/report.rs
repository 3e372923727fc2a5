//! Experiment reports: a CSV accuracy table, a CSV convergence trace and a
//! plain-text summary.

use std::fmt::Write as _;

use advsvm_core::attacks::AttackFamily;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Mean and sample standard deviation over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

/// Accuracies of one trained model, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub master_seed: u64,
    pub clean: f64,
    /// Robust accuracy per attack, in the report's attack order.
    pub robust: Vec<f64>,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    pub epsilon: f64,
    pub schedule: String,
    pub trials: Vec<TrialResult>,
    /// `(iteration, mean test error %)`, iterations strictly increasing.
    pub trace: Vec<(u64, f64)>,
}

impl VariantReport {
    pub fn clean(&self) -> Stat {
        Stat::of(&self.trials.iter().map(|t| t.clean).collect::<Vec<_>>())
    }

    pub fn robust(&self, k: usize) -> Stat {
        Stat::of(&self.trials.iter().map(|t| t.robust[k]).collect::<Vec<_>>())
    }

    pub fn train_seconds(&self) -> f64 {
        Stat::of(&self.trials.iter().map(|t| t.train_seconds).collect::<Vec<_>>()).mean
    }

    /// Final test error in percent.
    pub fn final_error(&self) -> f64 {
        100.0 - self.clean().mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub n_train: usize,
    pub n_test: usize,
    pub attacks: Vec<AttackFamily>,
    /// Number of test samples each attack was run on.
    pub attack_samples: Vec<usize>,
    pub variants: Vec<VariantReport>,
    pub wall_seconds: f64,
    pub config: RunConfig,
    /// Set when a component failed; the variants hold what finished.
    pub partial: Option<String>,
}

impl ExperimentReport {
    pub fn variant(&self, name: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.name == name)
    }

    pub fn attack_index(&self, family: AttackFamily) -> Option<usize> {
        self.attacks.iter().position(|a| *a == family)
    }

    /// Table headings: `Normal` followed by one column per attack.
    pub fn columns(&self) -> Vec<&'static str> {
        let mut c = vec!["Normal"];
        c.extend(self.attacks.iter().map(|a| a.display_name()));
        c
    }

    /// Copy with every timing field zeroed, for comparing runs.
    pub fn without_timings(&self) -> ExperimentReport {
        let mut r = self.clone();
        r.wall_seconds = 0.0;
        for v in &mut r.variants {
            for t in &mut v.trials {
                t.train_seconds = 0.0;
            }
        }
        r
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["model".to_string(), "epsilon".into(), "schedule".into()];
        for c in self.columns() {
            header.push(format!("{c} mean"));
            header.push(format!("{c} std"));
        }
        header.push("train seconds".into());
        w.write_record(&header).expect("in-memory write");
        for v in &self.variants {
            let mut row = vec![v.name.clone(), v.epsilon.to_string(), v.schedule.clone()];
            let mut push = |s: Stat| {
                row.push(format!("{:.4}", s.mean));
                row.push(format!("{:.4}", s.std));
            };
            push(v.clean());
            for k in 0..self.attacks.len() {
                push(v.robust(k));
            }
            row.push(format!("{:.3}", v.train_seconds()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn trace_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "iteration", "test error %"]).expect("in-memory write");
        for v in &self.variants {
            for (t, e) in &v.trace {
                w.write_record([v.name.clone(), t.to_string(), format!("{e:.4}")])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let trials = self.variants.first().map_or(0, |v| v.trials.len());
        let _ = writeln!(
            s,
            "{}: {} train / {} test, {} trial(s), {:.1} s",
            self.experiment, self.n_train, self.n_test, trials, self.wall_seconds
        );
        if !self.attacks.is_empty() {
            let caps: Vec<String> = self
                .attacks
                .iter()
                .zip(&self.attack_samples)
                .map(|(a, n)| format!("{}={n}", a.display_name()))
                .collect();
            let _ = writeln!(s, "attacked samples: {}", caps.join(", "));
        }
        let _ = write!(s, "{:<12}", "model");
        for c in self.columns() {
            let _ = write!(s, "{c:>16}");
        }
        let _ = writeln!(s, "{:>12}", "train (s)");
        for v in &self.variants {
            let _ = write!(s, "{:<12}", v.name);
            let mut cell = |st: Stat| {
                let _ = write!(s, "{:>16}", format!("{:.2} ± {:.2}", st.mean, st.std));
            };
            cell(v.clean());
            for k in 0..self.attacks.len() {
                cell(v.robust(k));
            }
            let _ = writeln!(s, "{:>12.2}", v.train_seconds());
        }
        if let Some(p) = &self.partial {
            let _ = writeln!(s, "PARTIAL: {p}");
        }
        s
    }
}
