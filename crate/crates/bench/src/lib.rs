//! Benchmark harness around the shape-matrix estimators: reproducible
//! Monte-Carlo experiments with CSV/JSON outputs.

pub mod config;
pub mod experiments;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] shapemat::Error),
}

pub use config::{AlphaSpec, ExperimentConfig, ExperimentKind, OutlierModelName};
pub use experiments::{run_experiment, RunArtifacts};
pub use output::{LreRecord, Row, LRE_HEADER, ROWS_HEADER};
