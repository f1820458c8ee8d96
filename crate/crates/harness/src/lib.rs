//! Experiment runner for the gdq-core learners: config files, seeded
//! training runs, greedy evaluation and cross-seed aggregation.

pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod run;
pub mod scene;

use std::path::PathBuf;

pub use config::RunConfig;
pub use run::{aggregate, evaluate, run_experiment, EvalOptions, EvalSummary, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Non-finite values or failed placement while training.
    #[error("training fault: {0}")]
    Training(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit status: 2 for configuration errors, 3 for training
    /// faults, 1 for filesystem errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Training(_) => 3,
            HarnessError::Io { .. } => 1,
        }
    }
}

impl From<gdq_core::Error> for HarnessError {
    fn from(e: gdq_core::Error) -> Self {
        use gdq_core::Error as E;
        match e {
            E::Config(_) | E::Dimension { .. } | E::EnumerationCap { .. } | E::Codec(_) => {
                HarnessError::Config(e.to_string())
            }
            E::TrainingFault { .. } | E::Placement { .. } | E::Internal(_) => HarnessError::Training(e.to_string()),
        }
    }
}
