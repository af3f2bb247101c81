//! Scenario loading, paired episode execution and report emission.

pub mod config;
pub mod engine;
pub mod fixtures;
pub mod report;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::pipeline::PipelineError;
use crate::threats::ThreatError;

pub use config::{Expectation, ScenarioConfig};
pub use engine::{run, run_schedule, ScheduledInjection, Trigger};
pub use fixtures::{builtin_scenario, builtin_scenarios, resolve_scenario};
pub use report::{
    compare, emit_report, single_run, MisalignmentReport, ReportFormat, ReportRow, ScenarioSummary, Side,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: `{field}`: {reason}")]
    Invalid {
        origin: String,
        field: String,
        reason: String,
    },
    #[error("no scenario file or builtin scenario named `{0}`")]
    UnknownScenario(String),
    #[error("no chain file or builtin chain named `{0}`")]
    UnknownChain(String),
    #[error("pipeline failed at episode {episode} step {step}: {source}")]
    Pipeline {
        episode: u32,
        step: u32,
        source: PipelineError,
    },
    #[error(transparent)]
    Unpaired(#[from] ThreatError),
}

impl HarnessError {
    /// CLI exit code: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
