//! Monte Carlo experiments, exact oracles, statistical checks and reports.

pub mod experiment;
pub mod oracle;
pub mod privacy;
pub mod report;
pub mod stats;
pub mod sweep;
pub mod verdict;

use std::path::PathBuf;

use thiserror::Error;

use crate::params::InvalidParams;
use crate::protocol::ProtocolError;

pub use experiment::{run_experiment, AggregateStats, ChoiceMode, ExperimentConfig, InputMode, RateEstimate};
pub use oracle::{enumerate_event_probability, exact_failure_oracle, ExactProbability, FailureEvent};
pub use privacy::{privacy_independence_test, FamilyRule, PrivacyReport};
pub use report::{emit_report, to_document, OutputFormat};
pub use verdict::{check_bounds, Relation, Verdict};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Params(#[from] InvalidParams),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
