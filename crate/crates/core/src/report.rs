//! Machine-readable result bundles shared by the CLI and the test suites.
//!
//! Every pass/fail entry carries the numeric residual and the tolerance it
//! was compared against, so a report is auditable without rerunning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const RESULTS_SCHEMA: &str = "results.v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub details: String,
}

impl CheckEntry {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        CheckEntry {
            name: name.into(),
            pass: residual <= tolerance,
            residual,
            tolerance,
            details: String::new(),
        }
    }

    pub fn with_details(mut self, details: impl Into<String>) -> Self {
        self.details = details.into();
        self
    }

    /// An exact yes/no check (integer identities, dimension agreements).
    pub fn boolean(name: impl Into<String>, pass: bool) -> Self {
        CheckEntry {
            name: name.into(),
            pass,
            residual: if pass { 0.0 } else { 1.0 },
            tolerance: 0.0,
            details: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema: String,
    pub command: String,
    pub config: serde_json::Value,
    pub entries: Vec<CheckEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tables: BTreeMap<String, serde_json::Value>,
}

impl ReportBundle {
    pub fn new(command: impl Into<String>, config: serde_json::Value) -> Self {
        ReportBundle {
            schema: RESULTS_SCHEMA.into(),
            command: command.into(),
            config,
            entries: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    pub fn insert_table(&mut self, key: impl Into<String>, value: serde_json::Value) {
        self.tables.insert(key.into(), value);
    }

    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn first_failure(&self) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| !e.pass)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}
