//! The certification report document.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Check, Resolved};
use crate::error::{LabError, LabResult};

/// Run metadata; the only part of a report allowed to differ between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub runtime_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inputs {
    pub command: String,
    pub potential_hash: String,
    pub config: Resolved,
}

/// Verdict and data of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: Check,
    pub pass: bool,
    /// One line per violated inequality or failed sub-check.
    pub failing: Vec<String>,
    /// Failure raised by the check itself, such as a missing Markov structure.
    pub error: Option<String>,
    pub result: Value,
    /// CSV tables written for this check, relative to the output directory.
    pub tables: Vec<String>,
}

impl CheckOutcome {
    pub fn failed(name: Check, error: String) -> Self {
        Self {
            name,
            pass: false,
            failing: vec![error.clone()],
            error: Some(error),
            result: Value::Null,
            tables: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub meta: Meta,
    pub inputs: Inputs,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

impl Report {
    pub fn write(&self, path: &Path) -> LabResult<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| LabError::io(path, e))
    }

    /// The report without its metadata block, for reproducibility comparisons.
    pub fn content(&self) -> LabResult<Value> {
        let mut v = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut v {
            map.remove("meta");
        }
        Ok(v)
    }
}

/// Removes the metadata block from a parsed report.
pub fn strip_meta(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.remove("meta");
    }
    v
}
