//! Dataset manifests: named experiments mapped to files and a class pair.
//!
//! ```toml
//! [experiments.mnist-1v7]
//! format = "idx"
//! images = "mnist-1v7/images.idx3-ubyte"
//! labels = "mnist-1v7/labels.idx1-ubyte"
//! class_a = 1
//! class_b = 7
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use advsvm_core::data::{select_binary, LabeledDataset, RawDataset};
use serde::Deserialize;

use crate::csvio::{load_csv, load_features};
use crate::error::{AppError, AppResult};
use crate::idx::load_idx;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
pub enum Source {
    Idx { images: PathBuf, labels: PathBuf },
    Csv {
        path: PathBuf,
        #[serde(default)]
        label_column: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub source: Source,
    /// Mapped to `+1`.
    pub class_a: i64,
    /// Mapped to `-1`.
    pub class_b: i64,
    #[serde(default)]
    pub description: String,
}

impl ManifestEntry {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.source {
            Source::Idx { images, labels } => {
                join(images);
                join(labels);
            }
            Source::Csv { path, .. } => join(path),
        }
    }

    pub fn load_raw(&self) -> AppResult<RawDataset> {
        match &self.source {
            Source::Idx { images, labels } => load_idx(images, labels),
            Source::Csv { path, label_column } => {
                // Default label column is the last one.
                let col = match label_column {
                    Some(c) => *c,
                    None => load_features(path)?.dim.saturating_sub(1),
                };
                load_csv(path, col)
            }
        }
    }

    pub fn load(&self) -> AppResult<LabeledDataset> {
        Ok(select_binary(&self.load_raw()?, self.class_a, self.class_b)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Manifest {
    pub experiments: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> AppResult<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| AppError::Config(format!("manifest: {e}")))?;
        for e in m.experiments.values_mut() {
            e.resolve(base);
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn entry(&self, name: &str) -> AppResult<&ManifestEntry> {
        self.experiments.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.experiments.keys().map(String::as_str).collect();
            AppError::Config(format!("experiment '{name}' not in manifest (known: {})", known.join(", ")))
        })
    }
}
