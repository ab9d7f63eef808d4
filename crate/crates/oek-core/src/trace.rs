//! Totally ordered event log of one scheduled execution: the input to
//! happens-before analysis, race detection, and equivalence evidence.
//!
//! On disk a trace is line-delimited JSON. The first line is the header
//! (program hash, model, policy, seed); every other line is one event
//! with the fields (seq, task, obj, kind, loc, name, value), where absent
//! fields are null and `value` carries event-specific payload such as
//! handle, task, and request ids for synchronization events.

use std::fmt;

use serde::Serialize;

use crate::ast::Loc;
use crate::value::{HandleId, ObjRef, Value};

/// Dense task identity; task 0 is always the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task {}", self.0)
    }
}

/// Per-object request sequence number paired with the object id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RequestId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum EventKind {
    TaskStart,
    TaskEnd {
        resolves: Option<HandleId>,
    },
    Post {
        /// Task created for the posted activation; None when the policy
        /// executed it inline on the posting task.
        task: Option<TaskId>,
        handle: HandleId,
    },
    ReqSubmit {
        request: RequestId,
        handle: HandleId,
        method: String,
    },
    ReqAdmit {
        request: RequestId,
        /// Task that will run the method; the submitter itself under
        /// inline request execution.
        task: TaskId,
    },
    ReqReply {
        request: RequestId,
        handle: HandleId,
    },
    AwaitBlock {
        handle: HandleId,
    },
    AwaitResume {
        handle: HandleId,
    },
    ReadGlobal {
        name: String,
        value: Value,
    },
    WriteGlobal {
        name: String,
        value: Value,
    },
    ReadField {
        field: String,
        value: Value,
    },
    WriteField {
        field: String,
        value: Value,
    },
    Print {
        value: Value,
    },
    SchedulePick {
        chosen: TaskId,
        runnable: Vec<TaskId>,
    },
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::TaskStart => "task-start",
            EventKind::TaskEnd { .. } => "task-end",
            EventKind::Post { .. } => "post",
            EventKind::ReqSubmit { .. } => "req-submit",
            EventKind::ReqAdmit { .. } => "req-admit",
            EventKind::ReqReply { .. } => "req-reply",
            EventKind::AwaitBlock { .. } => "await-block",
            EventKind::AwaitResume { .. } => "await-resume",
            EventKind::ReadGlobal { .. } => "read-global",
            EventKind::WriteGlobal { .. } => "write-global",
            EventKind::ReadField { .. } => "read-field",
            EventKind::WriteField { .. } => "write-field",
            EventKind::Print { .. } => "print",
            EventKind::SchedulePick { .. } => "schedule-pick",
        }
    }

    /// Whether this is a read or write of a shared location.
    pub fn is_access(&self) -> bool {
        matches!(
            self,
            EventKind::ReadGlobal { .. }
                | EventKind::WriteGlobal { .. }
                | EventKind::ReadField { .. }
                | EventKind::WriteField { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub seq: u64,
    pub task: TaskId,
    pub obj: Option<ObjRef>,
    pub loc: Option<Loc>,
    pub kind: EventKind,
}

/// Execution model configuration recorded in the trace header; analysis
/// reads it to decide which synchronization edges exist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceHeader {
    pub program_sha256: String,
    pub model: String,
    pub policy: String,
    pub seed: u64,
    /// True when requests were queued and admitted serially per object
    /// (a non-inline object policy with a serial method policy), i.e.
    /// when object exclusivity is a real synchronization edge.
    pub object_serialized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<Event>,
}

impl Trace {
    /// Render as line-delimited JSON, header first, one event per line.
    pub fn to_ldjson(&self) -> String {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&self.header).expect("header serializes"));
        out.push('\n');
        for ev in &self.events {
            out.push_str(&serde_json::to_string(&FileEvent::from(ev)).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}

/// Fixed seven-field file form of an event.
#[derive(Serialize)]
struct FileEvent {
    seq: u64,
    task: u32,
    obj: Option<u64>,
    kind: &'static str,
    loc: Option<String>,
    name: Option<String>,
    value: serde_json::Value,
}

impl From<&Event> for FileEvent {
    fn from(ev: &Event) -> Self {
        use serde_json::json;
        let (name, value) = match &ev.kind {
            EventKind::TaskStart => (None, serde_json::Value::Null),
            EventKind::TaskEnd { resolves } => {
                (None, json!({ "resolves": resolves.map(|h| h.0) }))
            }
            EventKind::Post { task, handle } => (
                None,
                json!({ "task": task.map(|t| t.0), "handle": handle.0 }),
            ),
            EventKind::ReqSubmit {
                request,
                handle,
                method,
            } => (
                Some(method.clone()),
                json!({ "request": request.0, "handle": handle.0 }),
            ),
            EventKind::ReqAdmit { request, task } => {
                (None, json!({ "request": request.0, "task": task.0 }))
            }
            EventKind::ReqReply { request, handle } => {
                (None, json!({ "request": request.0, "handle": handle.0 }))
            }
            EventKind::AwaitBlock { handle } | EventKind::AwaitResume { handle } => {
                (None, json!({ "handle": handle.0 }))
            }
            EventKind::ReadGlobal { name, value } | EventKind::WriteGlobal { name, value } => (
                Some(name.clone()),
                serde_json::to_value(value).expect("value serializes"),
            ),
            EventKind::ReadField { field, value } | EventKind::WriteField { field, value } => (
                Some(field.clone()),
                serde_json::to_value(value).expect("value serializes"),
            ),
            EventKind::Print { value } => {
                (None, serde_json::to_value(value).expect("value serializes"))
            }
            EventKind::SchedulePick { chosen, runnable } => (
                None,
                json!({
                    "chosen": chosen.0,
                    "runnable": runnable.iter().map(|t| t.0).collect::<Vec<_>>()
                }),
            ),
        };
        FileEvent {
            seq: ev.seq,
            task: ev.task.0,
            obj: ev.obj.map(|o| o.0),
            kind: ev.kind.label(),
            loc: ev.loc.map(|l| l.to_string()),
            name,
            value,
        }
    }
}

/// Structural problems that make a trace unusable for analysis.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceDefect {
    #[error("event {seq}: sequence numbers not dense (expected {expected})")]
    NonDenseSeq { seq: u64, expected: u64 },
    #[error("request {request:?}: submitted {submits} times, admitted {admits}, replied {replies}")]
    UnbalancedRequest {
        request: RequestId,
        submits: usize,
        admits: usize,
        replies: usize,
    },
}

/// Check the event invariants: dense unique sequence numbers, and (for
/// completed executions) one admit and one reply per submit.
pub fn check_well_formed(trace: &Trace, completed: bool) -> Result<(), Vec<TraceDefect>> {
    let mut defects = Vec::new();
    for (i, ev) in trace.events.iter().enumerate() {
        if ev.seq != i as u64 {
            defects.push(TraceDefect::NonDenseSeq {
                seq: ev.seq,
                expected: i as u64,
            });
        }
    }
    if completed {
        use std::collections::BTreeMap;
        let mut counts: BTreeMap<RequestId, (usize, usize, usize)> = BTreeMap::new();
        for ev in &trace.events {
            match &ev.kind {
                EventKind::ReqSubmit { request, .. } => counts.entry(*request).or_default().0 += 1,
                EventKind::ReqAdmit { request, .. } => counts.entry(*request).or_default().1 += 1,
                EventKind::ReqReply { request, .. } => counts.entry(*request).or_default().2 += 1,
                _ => {}
            }
        }
        for (request, (submits, admits, replies)) in counts {
            if submits != 1 || admits != 1 || replies != 1 {
                defects.push(TraceDefect::UnbalancedRequest {
                    request,
                    submits,
                    admits,
                    replies,
                });
            }
        }
    }
    if defects.is_empty() {
        Ok(())
    } else {
        Err(defects)
    }
}
