//! Running planners under resource limits and scoring the outcomes.
//!
//! A [`Planner`] makes one attempt at a (domain, problem) pair. The bench
//! layer turns attempts into [`RunRecord`]s: it enforces the cutoff,
//! validates any plan that comes back, and persists accepted plans. Metrics
//! (median of repetitions, PAR10, IPC score, coverage) work on records.

mod metrics;
mod runner;
mod suite;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigError;
use crate::pddl::PddlError;

pub use metrics::{
    coverage, ipc_score, ipc_scores, ipc_scores_by, median_record, par10, Coverage,
    IPC_TIME_FLOOR,
};
pub use runner::{
    evaluate_model, run_cell, run_planner, Attempt, AttemptEnd, CellSpec, ExternalPlanner, Job,
    Planner,
};
pub use suite::{
    randomized_protocol, read_records, run_suite, run_suite_with, BenchPlan, PlanFile,
    PlannersRef, ProblemEntry, Randomization, ResultHeader, SuiteOutcome, Variant, VariantFile, RESULTS_SCHEMA,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("planner `{id}`: command template must contain {{domain}} and {{problem}}")]
    Template { id: String },
    #[error("invalid limits: {0}")]
    Limits(String),
    #[error("median needs an odd, nonzero number of records, found {0}")]
    EvenCount(usize),
    #[error("no records to aggregate")]
    Empty,
    #[error("records disagree on {0}")]
    Inconsistent(String),
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("{path}: {source}")]
    Pddl {
        path: PathBuf,
        #[source]
        source: PddlError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("results file {path}: {message}")]
    Results { path: PathBuf, message: String },
}

impl BenchError {
    pub(crate) fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        BenchError::Io {
            path: path.into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlannerSpec {
    pub id: String,
    /// Shell command with `{domain}`, `{problem}`, `{planfile}` and optional
    /// `{seed}` placeholders.
    pub command_template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_seed: Option<String>,
}

impl PlannerSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.command_template.contains("{domain}") && self.command_template.contains("{problem}")
        {
            Ok(())
        } else {
            Err(BenchError::Template {
                id: self.id.clone(),
            })
        }
    }
}

fn default_repetitions() -> u32 {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunLimits {
    pub cutoff_seconds: f64,
    pub memory_megabytes: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            cutoff_seconds: 300.0,
            memory_megabytes: 4096,
            repetitions: 3,
        }
    }
}

impl RunLimits {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.cutoff_seconds.is_finite() && self.cutoff_seconds > 0.0) {
            return Err(BenchError::Limits(format!(
                "cutoff must be positive, got {}",
                self.cutoff_seconds
            )));
        }
        if self.memory_megabytes == 0 {
            return Err(BenchError::Limits("memory limit must be positive".into()));
        }
        if self.repetitions == 0 || self.repetitions.is_multiple_of(2) {
            return Err(BenchError::Limits(format!(
                "repetitions must be odd, got {}",
                self.repetitions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    None,
    Timeout,
    Memout,
    Crash,
    InvalidPlan,
}

/// Which clock `timeSeconds` was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    Cpu,
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub planner_id: String,
    pub variant: String,
    pub domain_file_digest: String,
    pub problem_id: String,
    pub config_digest: String,
    pub run_index: u32,
    pub solved: bool,
    pub time_seconds: f64,
    pub failure_kind: FailureKind,
    pub plan_length: Option<usize>,
    pub clock: Clock,
    pub cutoff_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl RunRecord {
    /// Identity of the cell this record fills in a suite.
    pub fn cell_key(&self) -> (String, String, String, u32) {
        (
            self.planner_id.clone(),
            self.variant.clone(),
            self.problem_id.clone(),
            self.run_index,
        )
    }

    /// Runtime with unsolved runs counted as ten times the cutoff.
    pub fn penalized_time(&self) -> f64 {
        if self.solved {
            self.time_seconds
        } else {
            10.0 * self.cutoff_seconds
        }
    }
}
