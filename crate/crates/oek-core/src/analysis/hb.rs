//! Happens-before over traces, computed as a vector-clock assignment per
//! event.
//!
//! Edges: program order within a task; post → start of the posted task;
//! req-submit → req-admit; reply (or resolving task-end) → every
//! await-resume of that handle; and, when the trace was produced with
//! queued requests under a serial method policy, object possession —
//! acquired at admit and resume, released into the object at block and
//! reply — which orders consecutive admitted method executions of one
//! object.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::trace::{Event, EventKind, RequestId, TaskId, Trace};
use crate::value::{HandleId, ObjRef};

/// Map task id → logical counter; the partial order witness.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VectorClock {
    clocks: BTreeMap<TaskId, u64>,
}

impl VectorClock {
    pub fn new() -> Self {
        VectorClock::default()
    }

    pub fn get(&self, task: TaskId) -> u64 {
        self.clocks.get(&task).copied().unwrap_or(0)
    }

    pub fn tick(&mut self, task: TaskId) {
        *self.clocks.entry(task).or_insert(0) += 1;
    }

    /// Component-wise maximum.
    pub fn merge(&mut self, other: &VectorClock) {
        for (&task, &count) in &other.clocks {
            let entry = self.clocks.entry(task).or_insert(0);
            *entry = (*entry).max(count);
        }
    }

    /// self ≤ other, component-wise.
    pub fn le(&self, other: &VectorClock) -> bool {
        self.clocks
            .iter()
            .all(|(task, &count)| other.get(*task) >= count)
    }

    /// Neither precedes the other: the events are concurrent.
    pub fn concurrent(&self, other: &VectorClock) -> bool {
        !self.le(other) && !other.le(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("event {seq}: {kind} names unknown request {request:?}")]
    OrphanRequest {
        seq: u64,
        kind: String,
        request: RequestId,
    },
    #[error("event {seq}: await of handle {handle} with no recorded origin")]
    OrphanHandle { seq: u64, handle: HandleId },
}

/// Assign a vector clock to every event of the trace, in sequence order.
/// The clock of event `i` is returned at index `i`.
pub fn happens_before(trace: &Trace) -> Result<Vec<VectorClock>, AnalysisError> {
    let serialized = trace.header.object_serialized;
    let mut task_vc: HashMap<TaskId, VectorClock> = HashMap::new();
    // Snapshot taken at post, merged into the child at its start.
    let mut post_snapshot: HashMap<TaskId, VectorClock> = HashMap::new();
    // Snapshot taken at req-submit, merged at admit.
    let mut submit_snapshot: HashMap<RequestId, VectorClock> = HashMap::new();
    // Clock at resolution, merged at await-resume.
    let mut resolved_at: HashMap<HandleId, VectorClock> = HashMap::new();
    // Task that created each handle: a same-task fallback when the handle
    // was resolved inline without a dedicated resolve event.
    let mut handle_origin: HashMap<HandleId, (TaskId, VectorClock)> = HashMap::new();
    // Object possession clock under serial admission.
    let mut obj_lock: HashMap<ObjRef, VectorClock> = HashMap::new();
    // Tasks known to be method executions (from admit events).
    let mut method_obj: HashMap<TaskId, ObjRef> = HashMap::new();

    let mut clocks = Vec::with_capacity(trace.events.len());

    for ev in &trace.events {
        let Event { seq, task, obj, .. } = *ev;
        // Pre-merges that must be visible to this event's clock.
        match &ev.kind {
            EventKind::TaskStart => {
                if let Some(snap) = post_snapshot.remove(&task) {
                    task_vc.entry(task).or_default().merge(&snap);
                }
            }
            EventKind::ReqAdmit { request, task: admitted } => {
                let snap = submit_snapshot.remove(request).ok_or_else(|| {
                    AnalysisError::OrphanRequest {
                        seq,
                        kind: "req-admit".to_string(),
                        request: *request,
                    }
                })?;
                let vc = task_vc.entry(*admitted).or_default();
                vc.merge(&snap);
                if serialized {
                    if let Some(obj) = obj {
                        if let Some(lock) = obj_lock.get(&obj) {
                            vc.merge(lock);
                        }
                        method_obj.insert(*admitted, obj);
                    }
                }
            }
            EventKind::AwaitResume { handle } => {
                let vc = task_vc.entry(task).or_default();
                match resolved_at.get(handle) {
                    Some(r) => {
                        let r = r.clone();
                        vc.merge(&r);
                    }
                    None => {
                        // Inline resolution: same-task program order covers
                        // it; otherwise fall back to the origin clock.
                        match handle_origin.get(handle) {
                            Some((origin, snap)) if *origin != task => {
                                let snap = snap.clone();
                                vc.merge(&snap);
                            }
                            Some(_) => {}
                            None => {
                                return Err(AnalysisError::OrphanHandle {
                                    seq,
                                    handle: *handle,
                                })
                            }
                        }
                    }
                }
                if serialized {
                    if let Some(o) = method_obj.get(&task).copied() {
                        if let Some(lock) = obj_lock.get(&o) {
                            let lock = lock.clone();
                            task_vc.entry(task).or_default().merge(&lock);
                        }
                    }
                }
            }
            _ => {}
        }

        // The event itself.
        let vc = task_vc.entry(task).or_default();
        vc.tick(task);
        let event_vc = vc.clone();

        // Post-publishes that later events pick up.
        match &ev.kind {
            EventKind::Post { task: child, handle } => {
                if let Some(child) = child {
                    post_snapshot.insert(*child, event_vc.clone());
                }
                handle_origin.insert(*handle, (task, event_vc.clone()));
            }
            EventKind::ReqSubmit { request, handle, .. } => {
                submit_snapshot.insert(*request, event_vc.clone());
                handle_origin.insert(*handle, (task, event_vc.clone()));
            }
            EventKind::ReqReply { handle, .. } => {
                resolved_at.insert(*handle, event_vc.clone());
                if serialized {
                    if let Some(obj) = obj {
                        obj_lock.entry(obj).or_default().merge(&event_vc);
                    }
                }
            }
            EventKind::TaskEnd { resolves } => {
                if let Some(handle) = resolves {
                    resolved_at.insert(*handle, event_vc.clone());
                }
                if serialized {
                    if let Some(o) = method_obj.get(&task).copied() {
                        obj_lock.entry(o).or_default().merge(&event_vc);
                    }
                }
            }
            EventKind::AwaitBlock { .. } => {
                if serialized {
                    if let Some(o) = method_obj.get(&task).copied() {
                        obj_lock.entry(o).or_default().merge(&event_vc);
                    }
                }
            }
            _ => {}
        }

        clocks.push(event_vc);
    }

    Ok(clocks)
}
