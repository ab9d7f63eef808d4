//! The observable record of one execution, identical in shape for every
//! execution model so runs can be compared field for field.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::RuntimeErrorInfo;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Status {
    Completed,
    RuntimeError(RuntimeErrorInfo),
    Deadlock(DeadlockReport),
    StepLimitExceeded,
}

impl Status {
    pub fn is_completed(&self) -> bool {
        matches!(self, Status::Completed)
    }

    /// Short stable label used in reports and exploration summaries.
    pub fn label(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::RuntimeError(_) => "runtime-error",
            Status::Deadlock(_) => "deadlock",
            Status::StepLimitExceeded => "step-limit-exceeded",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Completed => write!(f, "completed"),
            Status::RuntimeError(e) => write!(f, "{e}"),
            Status::Deadlock(d) => write!(f, "deadlock: cycle [{}]", d.cycle.join(" -> ")),
            Status::StepLimitExceeded => write!(f, "step limit exceeded"),
        }
    }
}

/// Wait-for cycle among blocked tasks and unadmitted requests, plus the
/// full list of blocked task descriptors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeadlockReport {
    /// Nodes of one wait-for cycle, in order; tasks and pending requests.
    pub cycle: Vec<String>,
    /// Every blocked task at quiescence.
    pub blocked: Vec<String>,
}

/// Final state of one object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectSnapshot {
    pub type_name: String,
    pub fields: BTreeMap<String, Value>,
}

/// What an execution did: termination status, everything printed, final
/// stores, and the number of executed statements.
///
/// Step accounting is the same for every model: one step per executed
/// statement, where each evaluation of an `if` or `while` condition is
/// one execution of that statement, and an `await` that blocks costs
/// nothing until it actually completes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub status: Status,
    pub prints: Vec<Value>,
    pub globals_final: BTreeMap<String, Value>,
    pub objects_final: BTreeMap<u64, ObjectSnapshot>,
    pub steps: u64,
}

impl Outcome {
    /// Canonical one-line rendering of the final stores, used for
    /// deduplicating exploration results.
    pub fn store_key(&self) -> String {
        serde_json::to_string(&(&self.globals_final, &self.objects_final))
            .expect("stores serialize")
    }

    pub fn print_strings(&self) -> Vec<String> {
        self.prints.iter().map(|v| v.to_string()).collect()
    }
}
