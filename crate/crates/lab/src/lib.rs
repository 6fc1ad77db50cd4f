//! Experiment runner for dynamic section-based clip sampling: config files,
//! binary dataset and checkpoint formats, report emission, gradient checks
//! and the `dsnlab` command line.

mod bytes;
pub mod checkpoint;
pub mod checks;
pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod report;

pub use error::{LabError, Result};
