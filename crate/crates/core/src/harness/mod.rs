//! Experiment orchestration: configs, seeded batteries, γ sweeps.

mod battery;
mod config;
pub mod selfcheck;

pub use battery::{
    execute, gamma_sweep, median, prepare, run_baseline_dsgd, run_battery, summary_csv,
    summary_rows, BatteryReport, Prepared, ProblemInstance, RunResult, SummaryRow, SUMMARY_HEADER,
};
pub use config::{
    AlgorithmSpec, AlphaRule, ConfigError, DeltaRule, EtaRule, ExperimentConfig, ProblemSpec,
    TopologySpec, BUNDLED,
};

use thiserror::Error;

use crate::dynamics::RunError;
use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{label} (seed {seed}): {source}")]
    Run { label: String, seed: u64, source: RunError },
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}
