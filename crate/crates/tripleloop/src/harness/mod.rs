//! The user-facing surface of the testbed: configuration, suite and sweep
//! orchestration, persistence, analysis, and report emission.

pub mod analyze;
pub mod config;
pub mod logio;
pub mod report;
pub mod suite;
pub mod sweeps;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::runner::RunError;
use crate::scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config error: {message}")]
    Config { message: String },
    #[error("log format error: {message}")]
    LogFormat { message: String },
    #[error("no run logs found in {dir}")]
    NoRunLogs { dir: String },
    #[error(
        "MIL {driving} conditions need {needed} VIL night/sedan source runs, found {available}; \
         the rail-source condition must be part of the suite"
    )]
    RailDependency {
        driving: &'static str,
        needed: u32,
        available: u32,
    },
    #[error("run failed: {0}")]
    Run(#[from] RunError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("analysis of {run_id}: {source}")]
    Analysis {
        run_id: String,
        #[source]
        source: AnalysisError,
    },
}
