//! Experiment runner for task adaptation network training: dataset files,
//! per-seed training with cached results, ablations and sweeps.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;

pub use config::{DatasetConfig, ExperimentConfig, Variant};
pub use error::{Result, TanError};
pub use tan_core;
