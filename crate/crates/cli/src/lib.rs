//! Configuration, file formats and experiment commands around
//! `sisalloc-core`.

pub mod commands;
pub mod config;
pub mod io;
pub mod parallel;

pub use config::ExperimentConfig;
