//! Run configuration files (TOML).
//!
//! ```toml
//! [data]
//! manifest = "data/manifest.toml"   # relative to the config file
//! experiment = "mnist-1v7"
//! test_per_class = 250
//! # train_per_class = 1000
//! split_seed = 0
//!
//! [kernel]
//! gamma = 0.0125
//!
//! [train]
//! c = 1.0
//! epsilon = 0.1
//! schedule = "constant:0.05"        # or "diminishing:1.0"
//! batch_size = 100
//! block_size = 256
//! iterations = 17
//! seed = 0
//! learn_bias = false
//!
//! [attack]                          # any AttackConfig field
//! epsilon = 0.0313725
//! pgd_steps = 10
//!
//! [experiment]
//! trials = 5
//! attacks = ["fgsm", "pgd", "cw", "zoo"]
//! constant = "constant:0.05"
//! diminishing = "diminishing:1.0"
//! max_attack_samples = { cw = 100, zoo = 20 }
//! trace = true
//!
//! [gridsearch]
//! folds = 5
//! log2_c = [-3, 3]
//! log2_gamma = [-3, 3]
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use advsvm_core::attacks::{AttackConfig, AttackFamily};
use advsvm_core::trainer::{Schedule, TrainConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AppError, AppResult};

fn de_schedule<'de, D: Deserializer<'de>>(d: D) -> Result<Schedule, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn ser_schedule<S: Serializer>(v: &Schedule, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub manifest: PathBuf,
    pub experiment: String,
    pub test_per_class: usize,
    pub train_per_class: Option<usize>,
    pub split_seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            manifest: PathBuf::from("data/manifest.toml"),
            experiment: "mnist-1v7".into(),
            test_per_class: 250,
            train_per_class: None,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub gamma: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        // About 1 / (2 * typical squared distance) for 784-d digits.
        KernelSection { gamma: 0.0125 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub c: f64,
    pub epsilon: f64,
    #[serde(deserialize_with = "de_schedule", serialize_with = "ser_schedule")]
    pub schedule: Schedule,
    pub batch_size: usize,
    pub block_size: usize,
    pub iterations: u64,
    pub seed: u64,
    pub learn_bias: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            c: 1.0,
            epsilon: 0.0,
            schedule: Schedule::Diminishing { theta: 1.0 },
            batch_size: 100,
            block_size: 256,
            iterations: 17,
            seed: 0,
            learn_bias: false,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self) -> TrainConfig {
        TrainConfig {
            c: self.c,
            epsilon: self.epsilon,
            schedule: self.schedule,
            batch_size: self.batch_size,
            block_size: self.block_size,
            iterations: self.iterations,
            master_seed: self.seed,
            learn_bias: self.learn_bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: usize,
    pub attacks: Vec<AttackFamily>,
    /// Schedule of the natural and adv-SVM(C) models.
    #[serde(deserialize_with = "de_schedule", serialize_with = "ser_schedule")]
    pub constant: Schedule,
    /// Schedule of the adv-SVM(D) model.
    #[serde(deserialize_with = "de_schedule", serialize_with = "ser_schedule")]
    pub diminishing: Schedule,
    /// Per-attack cap on the number of test samples attacked.
    pub max_attack_samples: BTreeMap<AttackFamily, usize>,
    /// Record test error at power-of-two iterations.
    pub trace: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            trials: 1,
            attacks: AttackFamily::ALL.to_vec(),
            constant: Schedule::Constant { eta: 0.05 },
            diminishing: Schedule::Diminishing { theta: 1.0 },
            max_attack_samples: BTreeMap::new(),
            trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub folds: usize,
    pub log2_c: [i32; 2],
    pub log2_gamma: [i32; 2],
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            folds: 5,
            log2_c: [-3, 3],
            log2_gamma: [-3, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub kernel: KernelSection,
    pub train: TrainSection,
    pub attack: AttackConfig,
    pub experiment: ExperimentSection,
    pub gridsearch: GridSection,
}

impl RunConfig {
    /// Parses a config; relative manifest paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> AppResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        if cfg.data.manifest.is_relative() {
            cfg.data.manifest = base.join(&cfg.data.manifest);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}
