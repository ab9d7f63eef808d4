//! The small-step task engine behind the scheduled execution models.
//!
//! Tasks carry their own frame stacks and are advanced one statement at a
//! time, so a driver (a policy, the interleaving explorer, or a worker
//! pool) owns every scheduling decision. Requests queue at their target
//! object and are admitted per the method policy; posted functions either
//! nest inline on the poster or become tasks. Every shared-memory access,
//! scheduling event, and print is recorded in a totally ordered trace.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::ast::*;
use crate::error::RuntimeErrorInfo;
use crate::outcome::{DeadlockReport, ObjectSnapshot, Outcome, Status};
use crate::store::{init_globals, HandleTable, ObjectHeap};
use crate::trace::{Event, EventKind, RequestId, TaskId, Trace, TraceHeader};
use crate::validate::ValidatedProgram;
use crate::value::{
    apply_binop, apply_unop, expect_bool, logic_operand, HandleId, ObjRef, Value,
};

use super::MethodPolicy;

/// Engine-level execution model configuration.
#[derive(Debug, Clone)]
pub struct SchedConfig {
    /// Run posted functions inline on the poster instead of spawning tasks.
    pub post_inline: bool,
    /// Run requests inline on the submitter instead of queueing them.
    pub req_inline: bool,
    pub mpolicy: MethodPolicy,
    /// Trace header fields.
    pub model: String,
    pub policy: String,
    pub seed: u64,
}

impl SchedConfig {
    fn object_serialized(&self) -> bool {
        !self.req_inline && self.mpolicy.is_serial()
    }
}

/// How much of a task a driver wants to run in one dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepBudget {
    /// Exactly one statement.
    One,
    /// Up to this many statements.
    Quantum(u64),
    /// Until the task blocks, finishes, or the run ends.
    ToBlock,
}

/// What one `exec_one` call did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecResult {
    /// Executed a statement; the task remains runnable.
    Ran,
    /// The task blocked on an unresolved handle (no statement executed).
    Blocked,
    /// The task finished.
    Finished,
    /// The run reached a terminal status (error, step limit).
    Terminal,
}

/// Progress report from stepping one object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectProgress {
    /// Work remains admissible or runnable on this object.
    Progressed,
    /// The admitted task is blocked on an await.
    Blocked,
    /// No active and no pending work.
    Quiescent,
}

#[derive(Debug)]
enum ReturnAction {
    /// Last frame of the task: the value is the task result.
    TaskResult,
    /// `x = call f(..)`: bind in the calling frame.
    AssignLocal(String),
    /// Inline `post`: resolve the handle, stay on the same task.
    ResolveInline(HandleId),
    /// Inline `req`: resolve the reply and record it as the request's reply.
    ResolveReply {
        handle: HandleId,
        request: RequestId,
        obj: ObjRef,
    },
}

#[derive(Debug)]
struct BlockCtx {
    block: Block,
    idx: usize,
}

#[derive(Debug)]
struct Frame {
    locals: HashMap<String, Value>,
    self_obj: Option<ObjRef>,
    blocks: Vec<BlockCtx>,
    on_return: ReturnAction,
}

impl Frame {
    fn new(
        params: &[String],
        args: Vec<Value>,
        body: Block,
        self_obj: Option<ObjRef>,
        on_return: ReturnAction,
    ) -> Self {
        Frame {
            locals: params.iter().cloned().zip(args).collect(),
            self_obj,
            blocks: vec![BlockCtx { block: body, idx: 0 }],
            on_return,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TaskKind {
    Root,
    Posted {
        func: String,
        handle: HandleId,
    },
    Method {
        obj: ObjRef,
        type_name: String,
        method: String,
        request: RequestId,
        obj_seq: u64,
        reply: HandleId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskState {
    /// Schedulable; the ticket orders tasks by when they became runnable.
    Runnable { ticket: u64 },
    Blocked { handle: HandleId },
    /// Resumed but waiting for its object's serial ownership.
    Gated,
    Done,
}

struct TaskCell {
    id: TaskId,
    kind: TaskKind,
    state: TaskState,
    frames: Vec<Frame>,
    started: bool,
}

impl TaskCell {
    fn describe(&self) -> String {
        match &self.kind {
            TaskKind::Root => format!("task {} (main)", self.id.0),
            TaskKind::Posted { func, .. } => format!("task {} (function {})", self.id.0, func),
            TaskKind::Method {
                type_name,
                method,
                obj,
                ..
            } => format!(
                "task {} (method {} on {} {})",
                self.id.0, method, type_name, obj
            ),
        }
    }
}

#[derive(Debug, Clone)]
struct PendingRequest {
    request: RequestId,
    obj_seq: u64,
    method: String,
    args: Vec<Value>,
    reply: HandleId,
    #[allow(dead_code)]
    submitter: TaskId,
}

/// Per-object scheduling state, parallel to the object heap.
#[derive(Debug, Default)]
struct ObjSched {
    pending: VecDeque<PendingRequest>,
    /// Task currently owning the object under a serial method policy.
    owner: Option<TaskId>,
    /// Resumed method tasks waiting to re-acquire ownership (interleaved).
    ready: VecDeque<TaskId>,
    next_obj_seq: u64,
}

/// Who will resolve an unresolved handle; feeds deadlock reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HandleOwner {
    Task(TaskId),
    Pending(ObjRef, RequestId),
}

struct TaskSpawn {
    id: TaskId,
    kind: TaskKind,
    params: Vec<String>,
    args: Vec<Value>,
    body: Block,
    self_obj: Option<ObjRef>,
}

/// Shared mutable execution state, separated from the task list so a task
/// can be stepped while the stores are mutated.
struct Core {
    program: ValidatedProgram,
    globals: BTreeMap<String, Value>,
    objects: ObjectHeap,
    objsched: Vec<ObjSched>,
    handles: HandleTable,
    handle_owner: HashMap<HandleId, HandleOwner>,
    waiters: HashMap<HandleId, Vec<TaskId>>,
    prints: Vec<Value>,
    steps: u64,
    step_limit: u64,
    events: Vec<Event>,
    next_request: u64,
    next_ticket: u64,
    next_task_id: u32,
    /// Tasks created by the executing statement, materialized by `pump`.
    spawns: Vec<TaskSpawn>,
    /// Tasks whose awaited handle resolved, to be transitioned by `pump`.
    woken: Vec<TaskId>,
    terminal: Option<Status>,
}

impl Core {
    fn emit(&mut self, task: TaskId, obj: Option<ObjRef>, loc: Option<Loc>, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(Event {
            seq,
            task,
            obj,
            loc,
            kind,
        });
    }

    fn alloc_object(&mut self, def: &ObjectTypeDef) -> ObjRef {
        let obj = self.objects.alloc(def);
        self.objsched.push(ObjSched::default());
        obj
    }

    fn fresh_ticket(&mut self) -> u64 {
        self.next_ticket += 1;
        self.next_ticket
    }

    /// Resolve a handle and queue every waiter for wake-up.
    fn resolve_and_wake(&mut self, handle: HandleId, value: Value) {
        self.handles.resolve(handle, value);
        self.handle_owner.remove(&handle);
        if let Some(ws) = self.waiters.remove(&handle) {
            self.woken.extend(ws);
        }
    }
}

/// A scheduled execution in progress. Drivers pick runnable tasks and call
/// [`Engine::exec_one`]; the engine handles everything else.
pub struct Engine {
    core: Core,
    tasks: Vec<TaskCell>,
    config: SchedConfig,
}

impl Engine {
    pub fn new(program: &ValidatedProgram, config: SchedConfig, step_limit: u64) -> Self {
        let main = program.main();
        let root = TaskCell {
            id: TaskId(0),
            kind: TaskKind::Root,
            state: TaskState::Runnable { ticket: 0 },
            frames: vec![Frame::new(
                &main.params,
                Vec::new(),
                main.body.clone(),
                None,
                ReturnAction::TaskResult,
            )],
            started: false,
        };
        Engine {
            core: Core {
                program: program.clone(),
                globals: init_globals(program),
                objects: ObjectHeap::new(),
                objsched: Vec::new(),
                handles: HandleTable::new(),
                handle_owner: HashMap::new(),
                waiters: HashMap::new(),
                prints: Vec::new(),
                steps: 0,
                step_limit,
                events: Vec::new(),
                next_request: 0,
                next_ticket: 0,
                spawns: Vec::new(),
                woken: Vec::new(),
                terminal: None,
                next_task_id: 1,
            },
            tasks: vec![root],
            config,
        }
    }

    pub fn steps(&self) -> u64 {
        self.core.steps
    }

    pub fn terminal(&self) -> Option<&Status> {
        self.core.terminal.as_ref()
    }

    /// Force a terminal status (used by the explorer when it cuts a path).
    pub fn force_terminal(&mut self, status: Status) {
        self.core.terminal = Some(status);
    }

    /// Runnable task ids in id order.
    pub fn runnable_tasks(&self) -> Vec<TaskId> {
        self.tasks
            .iter()
            .filter(|t| matches!(t.state, TaskState::Runnable { .. }))
            .map(|t| t.id)
            .collect()
    }

    /// Runnable task ids ordered by when they became runnable.
    pub fn runnable_by_ticket(&self) -> Vec<TaskId> {
        let mut v: Vec<(u64, TaskId)> = self
            .tasks
            .iter()
            .filter_map(|t| match t.state {
                TaskState::Runnable { ticket } => Some((ticket, t.id)),
                _ => None,
            })
            .collect();
        v.sort();
        v.into_iter().map(|(_, t)| t).collect()
    }

    pub fn is_runnable(&self, tid: TaskId) -> bool {
        matches!(
            self.tasks[tid.0 as usize].state,
            TaskState::Runnable { .. }
        )
    }

    /// Object of a method task, if it is one.
    pub fn task_object(&self, tid: TaskId) -> Option<ObjRef> {
        match self.tasks[tid.0 as usize].kind {
            TaskKind::Method { obj, .. } => Some(obj),
            _ => None,
        }
    }

    /// Record the driver's scheduling decision in the trace.
    pub fn record_pick(&mut self, chosen: TaskId, runnable: &[TaskId]) {
        self.core.emit(
            chosen,
            None,
            None,
            EventKind::SchedulePick {
                chosen,
                runnable: runnable.to_vec(),
            },
        );
    }

    /// Execute at most one statement of a runnable task.
    pub fn exec_one(&mut self, tid: TaskId) -> ExecResult {
        if self.core.terminal.is_some() {
            return ExecResult::Terminal;
        }
        assert!(self.is_runnable(tid), "exec_one on non-runnable {tid}");

        {
            let (core, tasks) = (&mut self.core, &mut self.tasks);
            let task = &mut tasks[tid.0 as usize];
            if !task.started {
                task.started = true;
                core.emit(tid, Self::task_obj_of(&task.kind), None, EventKind::TaskStart);
            }
            // An empty body finishes without executing a statement.
            if let Some(value) = Self::normalize_task(core, task) {
                self.finish_task(tid, value);
                self.pump();
                return ExecResult::Finished;
            }
        }

        if self.core.steps == self.core.step_limit {
            self.core.terminal = Some(Status::StepLimitExceeded);
            return ExecResult::Terminal;
        }

        let (core, tasks) = (&mut self.core, &mut self.tasks);
        let task = &mut tasks[tid.0 as usize];

        let step = match Self::exec_stmt(core, task, &self.config) {
            Ok(step) => step,
            Err(err) => {
                core.steps += 1;
                core.terminal = Some(Status::RuntimeError(err));
                return ExecResult::Terminal;
            }
        };

        match step {
            StmtStep::Ran => {
                core.steps += 1;
                match Self::normalize_task(core, task) {
                    Some(value) => {
                        self.finish_task(tid, value);
                        self.pump();
                        ExecResult::Finished
                    }
                    None => {
                        self.pump();
                        ExecResult::Ran
                    }
                }
            }
            StmtStep::Blocked => {
                // No statement executed; the await will run when resumed.
                self.on_task_blocked(tid);
                self.pump();
                ExecResult::Blocked
            }
            StmtStep::Returned(value) => {
                core.steps += 1;
                self.finish_task(tid, value);
                self.pump();
                ExecResult::Finished
            }
        }
    }

    fn task_obj_of(kind: &TaskKind) -> Option<ObjRef> {
        match kind {
            TaskKind::Method { obj, .. } => Some(*obj),
            _ => None,
        }
    }

    /// Pop exhausted blocks and frames; apply inline resolutions. Returns
    /// the task's result value when its last frame finished.
    fn normalize_task(core: &mut Core, task: &mut TaskCell) -> Option<Value> {
        loop {
            let implicit_return = match task.frames.last_mut() {
                None => return Some(Value::Unit),
                Some(frame) => {
                    while frame
                        .blocks
                        .last()
                        .is_some_and(|ctx| ctx.idx >= ctx.block.len())
                    {
                        frame.blocks.pop();
                    }
                    frame.blocks.is_empty()
                }
            };
            if !implicit_return {
                return None;
            }
            if let FrameReturn::TaskDone(v) = Self::frame_return(core, task, Value::Unit) {
                return Some(v);
            }
        }
    }

    fn frame_return(core: &mut Core, task: &mut TaskCell, value: Value) -> FrameReturn {
        let frame = task.frames.pop().expect("frame to return from");
        match frame.on_return {
            ReturnAction::TaskResult => FrameReturn::TaskDone(value),
            ReturnAction::AssignLocal(name) => {
                task.frames
                    .last_mut()
                    .expect("caller frame")
                    .locals
                    .insert(name, value);
                FrameReturn::Continue
            }
            ReturnAction::ResolveInline(handle) => {
                core.resolve_and_wake(handle, value);
                FrameReturn::Continue
            }
            ReturnAction::ResolveReply {
                handle,
                request,
                obj,
            } => {
                core.emit(
                    task.id,
                    Some(obj),
                    None,
                    EventKind::ReqReply { request, handle },
                );
                core.resolve_and_wake(handle, value);
                FrameReturn::Continue
            }
        }
    }

    fn finish_task(&mut self, tid: TaskId, value: Value) {
        let (core, tasks) = (&mut self.core, &mut self.tasks);
        let task = &mut tasks[tid.0 as usize];
        match task.kind.clone() {
            TaskKind::Root => {
                core.emit(tid, None, None, EventKind::TaskEnd { resolves: None });
            }
            TaskKind::Posted { handle, .. } => {
                core.emit(
                    tid,
                    None,
                    None,
                    EventKind::TaskEnd {
                        resolves: Some(handle),
                    },
                );
                core.resolve_and_wake(handle, value);
            }
            TaskKind::Method {
                obj,
                request,
                reply,
                ..
            } => {
                core.emit(
                    tid,
                    Some(obj),
                    None,
                    EventKind::ReqReply {
                        request,
                        handle: reply,
                    },
                );
                core.emit(
                    tid,
                    Some(obj),
                    None,
                    EventKind::TaskEnd { resolves: None },
                );
                core.resolve_and_wake(reply, value);
                let sched = &mut core.objsched[obj.0 as usize];
                if sched.owner == Some(tid) {
                    sched.owner = None;
                }
            }
        }
        task.state = TaskState::Done;
        task.frames.clear();
    }

    fn on_task_blocked(&mut self, tid: TaskId) {
        let task = &self.tasks[tid.0 as usize];
        // Interleaved admission releases the object at awaits; exclusive
        // holds it through them.
        if let TaskKind::Method { obj, .. } = task.kind {
            if self.config.mpolicy == MethodPolicy::Interleaved {
                let sched = &mut self.core.objsched[obj.0 as usize];
                if sched.owner == Some(tid) {
                    sched.owner = None;
                }
            }
        }
    }

    /// Materialize spawned tasks, wake resumed ones, and run admissions.
    /// Called after every statement and by the public contract operations.
    fn pump(&mut self) {
        // 1. Spawns (ids were pre-assigned in submission order).
        let spawns = std::mem::take(&mut self.core.spawns);
        for spawn in spawns {
            debug_assert_eq!(spawn.id.0 as usize, self.tasks.len(), "dense task ids");
            let ticket = self.core.fresh_ticket();
            self.tasks.push(TaskCell {
                id: spawn.id,
                kind: spawn.kind,
                state: TaskState::Runnable { ticket },
                frames: vec![Frame::new(
                    &spawn.params,
                    spawn.args,
                    spawn.body,
                    spawn.self_obj,
                    ReturnAction::TaskResult,
                )],
                started: false,
            });
        }

        // 2. Wakes: a resumed serial-method task needs its object back.
        let woken = std::mem::take(&mut self.core.woken);
        for tid in woken {
            if !matches!(
                self.tasks[tid.0 as usize].state,
                TaskState::Blocked { .. }
            ) {
                continue;
            }
            let method_obj = match self.tasks[tid.0 as usize].kind {
                TaskKind::Method { obj, .. } => Some(obj),
                _ => None,
            };
            let next_state = match method_obj {
                Some(obj) if self.config.mpolicy.is_serial() => {
                    let owner = self.core.objsched[obj.0 as usize].owner;
                    match owner {
                        Some(o) if o == tid => TaskState::Runnable {
                            ticket: self.core.fresh_ticket(),
                        },
                        Some(_) => {
                            self.core.objsched[obj.0 as usize].ready.push_back(tid);
                            TaskState::Gated
                        }
                        None => {
                            self.core.objsched[obj.0 as usize].owner = Some(tid);
                            TaskState::Runnable {
                                ticket: self.core.fresh_ticket(),
                            }
                        }
                    }
                }
                _ => TaskState::Runnable {
                    ticket: self.core.fresh_ticket(),
                },
            };
            self.tasks[tid.0 as usize].state = next_state;
        }

        // 3. Admissions, in object-id order.
        for obj_idx in 0..self.core.objsched.len() {
            self.admit_at(ObjRef(obj_idx as u64));
        }
    }

    fn admit_at(&mut self, obj: ObjRef) {
        let i = obj.0 as usize;
        match self.config.mpolicy {
            MethodPolicy::ExclusiveInline => {
                if self.core.objsched[i].owner.is_none() {
                    if let Some(req) = self.core.objsched[i].pending.pop_front() {
                        self.spawn_method_task(obj, req, true);
                    }
                }
            }
            MethodPolicy::Interleaved => {
                if self.core.objsched[i].owner.is_none() {
                    if let Some(tid) = self.core.objsched[i].ready.pop_front() {
                        self.core.objsched[i].owner = Some(tid);
                        let ticket = self.core.fresh_ticket();
                        self.tasks[tid.0 as usize].state = TaskState::Runnable { ticket };
                    } else if let Some(req) = self.core.objsched[i].pending.pop_front() {
                        self.spawn_method_task(obj, req, true);
                    }
                }
            }
            MethodPolicy::Concurrent => {
                while let Some(req) = self.core.objsched[i].pending.pop_front() {
                    self.spawn_method_task(obj, req, false);
                }
            }
        }
    }

    fn spawn_method_task(&mut self, obj: ObjRef, req: PendingRequest, own: bool) {
        let type_name = self.core.objects.get(obj).type_name.clone();
        let def = self
            .core
            .program
            .method(&type_name, &req.method)
            .expect("method existence checked at submission")
            .clone();
        let tid = TaskId(self.core.next_task_id);
        self.core.next_task_id += 1;
        self.core.emit(
            tid,
            Some(obj),
            None,
            EventKind::ReqAdmit {
                request: req.request,
                task: tid,
            },
        );
        self.core
            .handle_owner
            .insert(req.reply, HandleOwner::Task(tid));
        if own {
            self.core.objsched[obj.0 as usize].owner = Some(tid);
        }
        let ticket = self.core.fresh_ticket();
        debug_assert_eq!(tid.0 as usize, self.tasks.len(), "dense task ids");
        self.tasks.push(TaskCell {
            id: tid,
            kind: TaskKind::Method {
                obj,
                type_name,
                method: req.method,
                request: req.request,
                obj_seq: req.obj_seq,
                reply: req.reply,
            },
            state: TaskState::Runnable { ticket },
            frames: vec![Frame::new(
                &def.params,
                req.args,
                def.body.clone(),
                Some(obj),
                ReturnAction::TaskResult,
            )],
            started: false,
        });
    }

    /// Called by drivers when no task is runnable: settle on Completed or
    /// Deadlock. Does nothing if a terminal status is already set.
    pub fn quiesce(&mut self) {
        if self.core.terminal.is_some() {
            return;
        }
        debug_assert!(self.runnable_tasks().is_empty());
        match self.detect_deadlock() {
            None => self.core.terminal = Some(Status::Completed),
            Some(report) => self.core.terminal = Some(Status::Deadlock(report)),
        }
    }

    /// Build the wait-for report if any task is blocked. Wait edges:
    /// a blocked task waits on its handle's owner (a task, or a pending
    /// request); a pending request waits on the task owning its object;
    /// a gated task waits on its object's owner. Every node has at most
    /// one outgoing edge, so a simple walk finds the cycle or chain.
    pub fn detect_deadlock(&self) -> Option<DeadlockReport> {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        enum Node {
            Task(TaskId),
            Request(ObjRef, RequestId),
        }

        let blocked: Vec<&TaskCell> = self
            .tasks
            .iter()
            .filter(|t| matches!(t.state, TaskState::Blocked { .. } | TaskState::Gated))
            .collect();
        if blocked.is_empty() {
            return None;
        }

        let describe = |node: Node| -> String {
            match node {
                Node::Task(tid) => self.tasks[tid.0 as usize].describe(),
                Node::Request(obj, request) => {
                    let sched = &self.core.objsched[obj.0 as usize];
                    let type_name = &self.core.objects.get(obj).type_name;
                    match sched.pending.iter().find(|p| p.request == request) {
                        Some(p) => format!(
                            "request {}#{} on {} {}",
                            p.method, p.obj_seq, type_name, obj
                        ),
                        None => format!("request #{} on {} {}", request.0, type_name, obj),
                    }
                }
            }
        };

        let next_of = |node: Node| -> Option<Node> {
            match node {
                Node::Task(tid) => match self.tasks[tid.0 as usize].state {
                    TaskState::Blocked { handle } => match self.core.handle_owner.get(&handle) {
                        Some(HandleOwner::Task(owner)) => Some(Node::Task(*owner)),
                        Some(HandleOwner::Pending(obj, request)) => {
                            Some(Node::Request(*obj, *request))
                        }
                        None => None,
                    },
                    TaskState::Gated => {
                        let obj = Self::task_obj_of(&self.tasks[tid.0 as usize].kind)?;
                        self.core.objsched[obj.0 as usize].owner.map(Node::Task)
                    }
                    _ => None,
                },
                Node::Request(obj, _) => {
                    self.core.objsched[obj.0 as usize].owner.map(Node::Task)
                }
            }
        };

        // Walk from the first blocked task; the graph is functional, so
        // the walk either revisits a node on its own path (a cycle) or
        // dead-ends (report the chain).
        let start = Node::Task(blocked[0].id);
        let mut path = vec![start];
        let mut cycle = None;
        let mut cur = start;
        while let Some(next) = next_of(cur) {
            if let Some(pos) = path.iter().position(|n| *n == next) {
                cycle = Some(path[pos..].to_vec());
                break;
            }
            path.push(next);
            cur = next;
        }

        Some(DeadlockReport {
            cycle: cycle
                .unwrap_or(path)
                .into_iter()
                .map(describe)
                .collect(),
            blocked: blocked.iter().map(|t| t.describe()).collect(),
        })
    }

    /// Finish the run and produce the outcome and trace. A terminal status
    /// must be set (drivers guarantee it).
    pub fn into_outcome(self) -> (Outcome, Trace) {
        let status = self.core.terminal.expect("terminal status set");
        let objects_final: BTreeMap<u64, ObjectSnapshot> = self.core.objects.snapshot();
        let outcome = Outcome {
            status,
            prints: self.core.prints,
            globals_final: self.core.globals,
            objects_final,
            steps: self.core.steps,
        };
        let header = TraceHeader {
            program_sha256: program_sha256(&self.core.program),
            model: self.config.model.clone(),
            policy: self.config.policy.clone(),
            seed: self.config.seed,
            object_serialized: self.config.object_serialized(),
        };
        (
            outcome,
            Trace {
                header,
                events: self.core.events,
            },
        )
    }

    // ------------------------------------------------------------------
    // Scheduler-internal contract operations, exposed for direct testing.
    // ------------------------------------------------------------------

    /// Submit a function activation as a new task. Panics if the function
    /// is unknown; double submission is impossible by construction since
    /// every task id is created exactly once.
    pub fn submit(&mut self, func: &str, args: Vec<Value>) -> HandleId {
        let def = self
            .core
            .program
            .function(func)
            .unwrap_or_else(|| panic!("submit of unknown function {func}"))
            .clone();
        assert_eq!(def.params.len(), args.len(), "submit arity");
        let handle = self.core.handles.alloc();
        let id = TaskId(self.core.next_task_id);
        self.core.next_task_id += 1;
        self.core.handle_owner.insert(handle, HandleOwner::Task(id));
        self.core.spawns.push(TaskSpawn {
            id,
            kind: TaskKind::Posted {
                func: func.to_string(),
                handle,
            },
            params: def.params.clone(),
            args,
            body: def.body.clone(),
            self_obj: None,
        });
        self.pump();
        handle
    }

    /// Enqueue a method request at `target` and return its reply handle.
    /// The submitter recorded is the root task.
    pub fn submit_request(
        &mut self,
        target: ObjRef,
        method: &str,
        args: Vec<Value>,
    ) -> Result<HandleId, RuntimeErrorInfo> {
        let loc = Loc::new(0, 0);
        let type_name = self.core.objects.get(target).type_name.clone();
        let def = self.core.program.method(&type_name, method).ok_or_else(|| {
            RuntimeErrorInfo::new(format!("no method {method} on {type_name}"), loc)
        })?;
        if def.params.len() != args.len() {
            return Err(RuntimeErrorInfo::new(
                format!(
                    "method {} on {} expects {} arguments, got {}",
                    method,
                    type_name,
                    def.params.len(),
                    args.len()
                ),
                loc,
            ));
        }
        let handle = Self::enqueue_request(
            &mut self.core,
            TaskId(0),
            target,
            method.to_string(),
            args,
            None,
        );
        self.pump();
        Ok(handle)
    }

    /// Resolve a handle directly. Panics on double resolution.
    pub fn resolve(&mut self, handle: HandleId, value: Value) {
        self.core.resolve_and_wake(handle, value);
        self.pump();
    }

    pub fn handle_value(&self, handle: HandleId) -> Option<Value> {
        self.core.handles.get(handle)
    }

    /// Create an object of the named type (test aid mirroring `new T()`).
    pub fn create_object(&mut self, type_name: &str) -> Option<ObjRef> {
        let def = self.core.program.object_type(type_name)?.clone();
        Some(self.core.alloc_object(&def))
    }

    /// Step one object: admit per the method policy and run the admitted
    /// task within the budget. Panics when the object is quiescent.
    pub fn object_step(&mut self, obj: ObjRef, budget: StepBudget) -> ObjectProgress {
        self.pump();
        let runnable_of_obj = |eng: &Engine| -> Option<TaskId> {
            eng.tasks
                .iter()
                .filter(|t| {
                    matches!(t.state, TaskState::Runnable { .. })
                        && Self::task_obj_of(&t.kind) == Some(obj)
                })
                .map(|t| t.id)
                .next()
        };
        let has_pending = |eng: &Engine| !eng.core.objsched[obj.0 as usize].pending.is_empty();

        let Some(tid) = runnable_of_obj(self) else {
            assert!(
                has_pending(self) || self.object_has_admitted_work(obj),
                "object_step on quiescent {obj}"
            );
            return ObjectProgress::Blocked;
        };

        let mut remaining = match budget {
            StepBudget::One => 1,
            StepBudget::Quantum(q) => q,
            StepBudget::ToBlock => u64::MAX,
        };
        let mut last = ExecResult::Ran;
        while remaining > 0 && self.is_runnable(tid) {
            last = self.exec_one(tid);
            match last {
                ExecResult::Ran => remaining -= 1,
                _ => break,
            }
        }
        match last {
            ExecResult::Blocked => ObjectProgress::Blocked,
            _ if runnable_of_obj(self).is_some() || has_pending(self) => {
                ObjectProgress::Progressed
            }
            _ if self.object_has_admitted_work(obj) => ObjectProgress::Blocked,
            _ => ObjectProgress::Quiescent,
        }
    }

    fn object_has_admitted_work(&self, obj: ObjRef) -> bool {
        self.tasks.iter().any(|t| {
            Self::task_obj_of(&t.kind) == Some(obj)
                && !matches!(t.state, TaskState::Done)
        })
    }

    /// Objects that could make progress if selected.
    pub fn schedulable_objects(&self) -> Vec<ObjRef> {
        (0..self.core.objsched.len() as u64)
            .map(ObjRef)
            .filter(|o| {
                !self.core.objsched[o.0 as usize].pending.is_empty()
                    || self.tasks.iter().any(|t| {
                        Self::task_obj_of(&t.kind) == Some(*o)
                            && matches!(t.state, TaskState::Runnable { .. })
                    })
            })
            .collect()
    }

    // ------------------------------------------------------------------
    // Statement execution.
    // ------------------------------------------------------------------

    fn enqueue_request(
        core: &mut Core,
        submitter: TaskId,
        obj: ObjRef,
        method: String,
        args: Vec<Value>,
        loc: Option<Loc>,
    ) -> HandleId {
        let reply = core.handles.alloc();
        let request = RequestId(core.next_request);
        core.next_request += 1;
        let sched = &mut core.objsched[obj.0 as usize];
        let obj_seq = sched.next_obj_seq;
        sched.next_obj_seq += 1;
        core.emit(
            submitter,
            Some(obj),
            loc,
            EventKind::ReqSubmit {
                request,
                handle: reply,
                method: method.clone(),
            },
        );
        core.handle_owner
            .insert(reply, HandleOwner::Pending(obj, request));
        core.objsched[obj.0 as usize].pending.push_back(PendingRequest {
            request,
            obj_seq,
            method,
            args,
            reply,
            submitter,
        });
        reply
    }

    fn exec_stmt(
        core: &mut Core,
        task: &mut TaskCell,
        config: &SchedConfig,
    ) -> Result<StmtStep, RuntimeErrorInfo> {
        let tid = task.id;
        let (block, idx) = {
            let frame = task.frames.last().expect("active frame");
            let ctx = frame.blocks.last().expect("active block");
            (ctx.block.clone(), ctx.idx)
        };
        let stmt = &block[idx];
        let loc = stmt.loc;

        macro_rules! frame_mut {
            () => {
                task.frames.last_mut().expect("active frame")
            };
        }
        macro_rules! advance {
            () => {{
                let frame = frame_mut!();
                frame.blocks.last_mut().expect("active block").idx += 1;
            }};
        }

        match &stmt.node {
            Stmt::VarDecl { name, init } => {
                let v = Self::eval(core, task.frames.last().expect("frame"), tid, init)?;
                frame_mut!().locals.insert(name.clone(), v);
                advance!();
                Ok(StmtStep::Ran)
            }
            Stmt::Assign { target, value } => {
                let frame = task.frames.last().expect("frame");
                let v = Self::eval(core, frame, tid, value)?;
                match target {
                    LValue::Local(name) => {
                        let frame = frame_mut!();
                        if !frame.locals.contains_key(name) {
                            return Err(RuntimeErrorInfo::new(
                                format!("undefined local {name}"),
                                loc,
                            ));
                        }
                        frame.locals.insert(name.clone(), v);
                    }
                    LValue::SelfField(field) => {
                        let obj = Self::self_obj(task.frames.last().expect("frame"), loc)?;
                        core.objects.set_field(obj, field, v);
                        core.emit(
                            tid,
                            Some(obj),
                            Some(loc),
                            EventKind::WriteField {
                                field: field.clone(),
                                value: v,
                            },
                        );
                    }
                    LValue::Global(name) => {
                        core.globals.insert(name.clone(), v);
                        core.emit(
                            tid,
                            None,
                            Some(loc),
                            EventKind::WriteGlobal {
                                name: name.clone(),
                                value: v,
                            },
                        );
                    }
                }
                advance!();
                Ok(StmtStep::Ran)
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let v = Self::eval(core, task.frames.last().expect("frame"), tid, cond)?;
                let b = expect_bool(&v).map_err(|m| RuntimeErrorInfo::new(m, cond.loc))?;
                advance!();
                let branch = if b {
                    Some(then_branch.clone())
                } else {
                    else_branch.clone()
                };
                if let Some(branch) = branch {
                    frame_mut!().blocks.push(BlockCtx {
                        block: branch,
                        idx: 0,
                    });
                }
                Ok(StmtStep::Ran)
            }
            Stmt::While { cond, body } => {
                let v = Self::eval(core, task.frames.last().expect("frame"), tid, cond)?;
                let b = expect_bool(&v).map_err(|m| RuntimeErrorInfo::new(m, cond.loc))?;
                if b {
                    frame_mut!().blocks.push(BlockCtx {
                        block: body.clone(),
                        idx: 0,
                    });
                } else {
                    advance!();
                }
                Ok(StmtStep::Ran)
            }
            Stmt::Return { value } => {
                let v = match value {
                    Some(e) => Self::eval(core, task.frames.last().expect("frame"), tid, e)?,
                    None => Value::Unit,
                };
                match Self::frame_return(core, task, v) {
                    FrameReturn::TaskDone(v) => Ok(StmtStep::Returned(v)),
                    FrameReturn::Continue => Ok(StmtStep::Ran),
                }
            }
            Stmt::Print { value } => {
                let v = Self::eval(core, task.frames.last().expect("frame"), tid, value)?;
                core.prints.push(v);
                core.emit(tid, None, Some(loc), EventKind::Print { value: v });
                advance!();
                Ok(StmtStep::Ran)
            }
            Stmt::Call { target, func, args } => {
                let argv = Self::eval_args(core, task.frames.last().expect("frame"), tid, args)?;
                let def = core
                    .program
                    .function(func)
                    .ok_or_else(|| {
                        RuntimeErrorInfo::new(format!("undefined function {func}"), loc)
                    })?
                    .clone();
                advance!();
                task.frames.push(Frame::new(
                    &def.params,
                    argv,
                    def.body.clone(),
                    None,
                    ReturnAction::AssignLocal(target.clone()),
                ));
                Ok(StmtStep::Ran)
            }
            Stmt::Post { target, func, args } => {
                let argv = Self::eval_args(core, task.frames.last().expect("frame"), tid, args)?;
                let def = core
                    .program
                    .function(func)
                    .ok_or_else(|| {
                        RuntimeErrorInfo::new(format!("undefined function {func}"), loc)
                    })?
                    .clone();
                let handle = core.handles.alloc();
                frame_mut!()
                    .locals
                    .insert(target.clone(), Value::Handle(handle));
                advance!();
                if config.post_inline {
                    core.emit(
                        tid,
                        None,
                        Some(loc),
                        EventKind::Post { task: None, handle },
                    );
                    core.handle_owner.insert(handle, HandleOwner::Task(tid));
                    task.frames.push(Frame::new(
                        &def.params,
                        argv,
                        def.body.clone(),
                        None,
                        ReturnAction::ResolveInline(handle),
                    ));
                } else {
                    let id = TaskId(core.next_task_id);
                    core.next_task_id += 1;
                    core.emit(
                        tid,
                        None,
                        Some(loc),
                        EventKind::Post {
                            task: Some(id),
                            handle,
                        },
                    );
                    core.handle_owner.insert(handle, HandleOwner::Task(id));
                    core.spawns.push(TaskSpawn {
                        id,
                        kind: TaskKind::Posted {
                            func: func.clone(),
                            handle,
                        },
                        params: def.params.clone(),
                        args: argv,
                        body: def.body.clone(),
                        self_obj: None,
                    });
                }
                Ok(StmtStep::Ran)
            }
            Stmt::Req {
                target,
                object,
                method,
                args,
            } => {
                let frame = task.frames.last().expect("frame");
                let objv = Self::eval(core, frame, tid, object)?;
                let Value::Obj(obj) = objv else {
                    return Err(RuntimeErrorInfo::new(
                        format!(
                            "type error: req target must be an object, got {}",
                            objv.type_name()
                        ),
                        object.loc,
                    ));
                };
                let argv = Self::eval_args(core, task.frames.last().expect("frame"), tid, args)?;
                let type_name = core.objects.get(obj).type_name.clone();
                let def = core
                    .program
                    .method(&type_name, method)
                    .ok_or_else(|| {
                        RuntimeErrorInfo::new(format!("no method {method} on {type_name}"), loc)
                    })?
                    .clone();
                if def.params.len() != argv.len() {
                    return Err(RuntimeErrorInfo::new(
                        format!(
                            "method {} on {} expects {} arguments, got {}",
                            method,
                            type_name,
                            def.params.len(),
                            argv.len()
                        ),
                        loc,
                    ));
                }
                if config.req_inline {
                    let reply = core.handles.alloc();
                    let request = RequestId(core.next_request);
                    core.next_request += 1;
                    let sched = &mut core.objsched[obj.0 as usize];
                    let _obj_seq = sched.next_obj_seq;
                    sched.next_obj_seq += 1;
                    core.emit(
                        tid,
                        Some(obj),
                        Some(loc),
                        EventKind::ReqSubmit {
                            request,
                            handle: reply,
                            method: method.clone(),
                        },
                    );
                    core.emit(
                        tid,
                        Some(obj),
                        Some(loc),
                        EventKind::ReqAdmit { request, task: tid },
                    );
                    core.handle_owner.insert(reply, HandleOwner::Task(tid));
                    frame_mut!()
                        .locals
                        .insert(target.clone(), Value::Handle(reply));
                    advance!();
                    task.frames.push(Frame::new(
                        &def.params,
                        argv,
                        def.body.clone(),
                        Some(obj),
                        ReturnAction::ResolveReply {
                            handle: reply,
                            request,
                            obj,
                        },
                    ));
                } else {
                    let reply = Self::enqueue_request(
                        core,
                        tid,
                        obj,
                        method.clone(),
                        argv,
                        Some(loc),
                    );
                    frame_mut!()
                        .locals
                        .insert(target.clone(), Value::Handle(reply));
                    advance!();
                }
                Ok(StmtStep::Ran)
            }
            Stmt::Await { target, handle } => {
                let frame = task.frames.last().expect("frame");
                let hv = frame.locals.get(handle).copied().ok_or_else(|| {
                    RuntimeErrorInfo::new(format!("undefined local {handle}"), loc)
                })?;
                let Value::Handle(h) = hv else {
                    return Err(RuntimeErrorInfo::new(
                        format!("type error: await expects a handle, got {}", hv.type_name()),
                        loc,
                    ));
                };
                match core.handles.get(h) {
                    Some(value) => {
                        core.emit(tid, None, Some(loc), EventKind::AwaitResume { handle: h });
                        frame_mut!().locals.insert(target.clone(), value);
                        advance!();
                        Ok(StmtStep::Ran)
                    }
                    None => {
                        core.emit(tid, None, Some(loc), EventKind::AwaitBlock { handle: h });
                        core.waiters.entry(h).or_default().push(tid);
                        task.state = TaskState::Blocked { handle: h };
                        Ok(StmtStep::Blocked)
                    }
                }
            }
        }
    }

    fn self_obj(frame: &Frame, loc: Loc) -> Result<ObjRef, RuntimeErrorInfo> {
        frame
            .self_obj
            .ok_or_else(|| RuntimeErrorInfo::new("self outside method".to_string(), loc))
    }

    fn eval_args(
        core: &mut Core,
        frame: &Frame,
        tid: TaskId,
        args: &[Spanned<Expr>],
    ) -> Result<Vec<Value>, RuntimeErrorInfo> {
        args.iter().map(|a| Self::eval(core, frame, tid, a)).collect()
    }

    fn eval(
        core: &mut Core,
        frame: &Frame,
        tid: TaskId,
        expr: &Spanned<Expr>,
    ) -> Result<Value, RuntimeErrorInfo> {
        let loc = expr.loc;
        match &expr.node {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Local(name) => frame
                .locals
                .get(name)
                .copied()
                .ok_or_else(|| RuntimeErrorInfo::new(format!("undefined local {name}"), loc)),
            Expr::SelfField(field) => {
                let obj = Self::self_obj(frame, loc)?;
                let value = core.objects.field(obj, field).ok_or_else(|| {
                    let t = core.objects.get(obj).type_name.clone();
                    RuntimeErrorInfo::new(format!("undefined field {field} on {t}"), loc)
                })?;
                core.emit(
                    tid,
                    Some(obj),
                    Some(loc),
                    EventKind::ReadField {
                        field: field.clone(),
                        value,
                    },
                );
                Ok(value)
            }
            Expr::SelfRef => Self::self_obj(frame, loc).map(Value::Obj),
            Expr::Global(name) => {
                let value = core.globals.get(name).copied().ok_or_else(|| {
                    RuntimeErrorInfo::new(format!("undefined global {name}"), loc)
                })?;
                core.emit(
                    tid,
                    None,
                    Some(loc),
                    EventKind::ReadGlobal {
                        name: name.clone(),
                        value,
                    },
                );
                Ok(value)
            }
            Expr::New(type_name) => {
                let def = core
                    .program
                    .object_type(type_name)
                    .ok_or_else(|| {
                        RuntimeErrorInfo::new(format!("unknown object type {type_name}"), loc)
                    })?
                    .clone();
                Ok(Value::Obj(core.alloc_object(&def)))
            }
            Expr::Binary { op, lhs, rhs } if matches!(op, BinOp::And | BinOp::Or) => {
                let lv = Self::eval(core, frame, tid, lhs)?;
                let lb = logic_operand(*op, &lv).map_err(|m| RuntimeErrorInfo::new(m, loc))?;
                let short = match op {
                    BinOp::And => !lb,
                    BinOp::Or => lb,
                    _ => unreachable!(),
                };
                if short {
                    return Ok(Value::Bool(lb));
                }
                let rv = Self::eval(core, frame, tid, rhs)?;
                let rb = logic_operand(*op, &rv).map_err(|m| RuntimeErrorInfo::new(m, loc))?;
                Ok(Value::Bool(rb))
            }
            Expr::Binary { op, lhs, rhs } => {
                let lv = Self::eval(core, frame, tid, lhs)?;
                let rv = Self::eval(core, frame, tid, rhs)?;
                apply_binop(*op, &lv, &rv).map_err(|m| RuntimeErrorInfo::new(m, loc))
            }
            Expr::Unary { op, operand } => {
                let v = Self::eval(core, frame, tid, operand)?;
                apply_unop(*op, &v).map_err(|m| RuntimeErrorInfo::new(m, loc))
            }
        }
    }
}

enum StmtStep {
    Ran,
    Blocked,
    Returned(Value),
}

enum FrameReturn {
    TaskDone(Value),
    Continue,
}

/// Hash of the canonical source, recorded in trace headers.
pub fn program_sha256(program: &ValidatedProgram) -> String {
    use sha2::{Digest, Sha256};
    let text = crate::pretty::pretty_print(program.program());
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
