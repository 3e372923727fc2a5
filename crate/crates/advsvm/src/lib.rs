//! File formats, the experiment pipeline and the `advsvm` command line,
//! built on [`advsvm_core`].

pub mod config;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod idx;
pub mod manifest;
pub mod modelio;
pub mod report;

pub use advsvm_core;
pub use crate::error::{AppError, AppResult};
