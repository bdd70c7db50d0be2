//! Benchmark harness for the noisy Monte Carlo samplers: experiment
//! presets, seeded repetitions, CSV output and summary tables.

pub mod config;
pub mod output;
pub mod runner;
pub mod stats;

pub use config::{Algorithm, ConfigError, Experiment, ExperimentConfig};
pub use output::{emit_csv, read_csv, summarize, write_csv};
pub use runner::{quadrature_truth, run_experiment, ResultRow, RowKind, RunError};
