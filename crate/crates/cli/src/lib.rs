//! Scenario runner for dimineq: evaluates inequality and audit items from
//! JSON scenario files and emits deterministic CSV/JSON reports.

pub mod report;
pub mod runner;
pub mod scenario;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

/// Built-in scenarios run by the `oracle` command.
pub const BUNDLED_SCENARIOS: [(&str, &str); 2] = [
    (
        "gaussian_equalities",
        include_str!("../scenarios/gaussian_equalities.json"),
    ),
    ("ou_audits", include_str!("../scenarios/ou_audits.json")),
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] dimineq::Error),

    #[error("{item}: {source}")]
    Evaluation {
        item: String,
        source: dimineq::Error,
    },
}

impl CliError {
    /// serde_json messages already carry the line and column.
    pub fn from_json(e: serde_json::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

/// Exit status for a finished run: 0 when every verdict passes, 1 otherwise.
pub fn verdict_status(passed: bool) -> i32 {
    if passed {
        0
    } else {
        1
    }
}

/// Exit status for input and evaluation errors.
pub const INPUT_ERROR: i32 = 2;
