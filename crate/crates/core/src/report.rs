//! JSON report envelope shared by the command-line pipelines.

use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

/// Exit-code mapping for batch runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    /// All requested checks passed their tolerances.
    Ok = 0,
    /// A tolerance check failed.
    ToleranceFailure = 1,
    /// A file was missing or failed to parse.
    InputError = 2,
    /// A numeric computation failed (singularity, non-convergence).
    NumericFailure = 3,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: String,
    pub inputs: serde_json::Value,
    pub seed: u64,
    pub results: serde_json::Value,
    pub diagnostics: serde_json::Value,
    pub timing_ms: u128,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            inputs: serde_json::Value::Null,
            seed: 0,
            results: serde_json::Value::Null,
            diagnostics: serde_json::Value::Null,
            timing_ms: 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
