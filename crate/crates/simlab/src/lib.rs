//! Monte Carlo harness and command-line front end for `rescluster`:
//! dataset ingestion, the synthetic experiment recipes and result files.

pub mod cli;
pub mod config;
pub mod harness;
pub mod ingest;
pub mod output;

use thiserror::Error;

pub use config::{Experiment, ExperimentConfig, PenaltyChoice, RuntimeSweep};
pub use harness::{Condition, DetectionRecord, ExperimentOutput, ReplicateRecord};
pub use ingest::{ingest_csv, IngestError};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] IngestError),
    #[error("every candidate model is invalid")]
    AllInvalid,
    #[error("output error: {0}")]
    Io(String),
}

impl SimError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Io(_) => 2,
            SimError::Data(_) => 3,
            SimError::AllInvalid => 4,
        }
    }
}
