//! Std companion of `ust-core`: TOML run configuration and scenario files,
//! PPM image sequences, run artifacts (traces, success curves, summaries)
//! and the experiment runner behind the `ust` command.

pub mod artifacts;
pub mod config;
pub mod ppm;
pub mod runner;
pub mod sequence;

pub use config::{OracleKind, RunConfig, ScenarioSource};
pub use runner::{bench, run_once, run_seeds, write_run, BenchPlan, Input, RunOptions, RunOutcome, Seeds};
