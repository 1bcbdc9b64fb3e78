//! IO, file formats, configuration and experiment orchestration on top
//! of `gsc-core`. The `gsc` binary is a thin wrapper over the runners
//! in this crate, so tests drive the same code paths as the command
//! line.

pub mod cache;
pub mod cli;
pub mod config;
pub mod manifest;
pub mod pattern_file;
pub mod report;
pub mod rng;
pub mod runner;

/// Version string stamped into every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
