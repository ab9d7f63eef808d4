//! Sequential scheduling drivers: they own the engine loop and realize
//! the non-parallel function and object policies deterministically.

use std::collections::VecDeque;

use crate::outcome::Outcome;
use crate::trace::{TaskId, Trace};
use crate::validate::ValidatedProgram;
use crate::value::ObjRef;

use super::engine::{Engine, ExecResult, SchedConfig};
use super::parallel::run_parallel;
use super::{mix_decision, FunctionPolicy, MethodPolicy, ObjectPolicy};

/// Run under the function-scheduling model: `post` creates tasks handed to
/// the chosen policy (inline recovers sequential execution exactly), and
/// requests execute synchronously on the submitter.
pub fn run_funcsched(
    program: &ValidatedProgram,
    policy: FunctionPolicy,
    seed: u64,
    step_limit: u64,
) -> (Outcome, Trace) {
    let config = SchedConfig {
        post_inline: matches!(policy, FunctionPolicy::Inline),
        req_inline: true,
        mpolicy: MethodPolicy::ExclusiveInline,
        model: "funcsched".to_string(),
        policy: policy.label(),
        seed,
    };
    let mut engine = Engine::new(program, config, step_limit);
    match policy {
        FunctionPolicy::Inline => drive_to_block_order(&mut engine, false),
        FunctionPolicy::Fifo => drive_to_block_order(&mut engine, true),
        FunctionPolicy::Random => drive_random(&mut engine, seed),
        FunctionPolicy::Parallel { workers } => return run_parallel(engine, workers),
    }
    engine.into_outcome()
}

/// Run under the object-scheduling model: requests queue at their object
/// and are admitted per `mpolicy`; posts execute inline.
pub fn run_objsched(
    program: &ValidatedProgram,
    opolicy: ObjectPolicy,
    mpolicy: MethodPolicy,
    seed: u64,
    step_limit: u64,
) -> (Outcome, Trace) {
    run_objsched_with_posts(program, opolicy, mpolicy, false, seed, step_limit)
}

/// As [`run_objsched`], but optionally scheduling posted functions as
/// tasks in the same run queue instead of inline.
pub fn run_objsched_with_posts(
    program: &ValidatedProgram,
    opolicy: ObjectPolicy,
    mpolicy: MethodPolicy,
    posts_scheduled: bool,
    seed: u64,
    step_limit: u64,
) -> (Outcome, Trace) {
    let config = SchedConfig {
        post_inline: !posts_scheduled,
        req_inline: matches!(opolicy, ObjectPolicy::Inline),
        mpolicy,
        model: "objsched".to_string(),
        policy: format!(
            "opolicy={},mpolicy={},fpolicy={}",
            opolicy.label(),
            mpolicy.label(),
            if posts_scheduled { "fifo" } else { "inline" }
        ),
        seed,
    };
    let mut engine = Engine::new(program, config, step_limit);
    match opolicy {
        ObjectPolicy::Inline => drive_to_block_order(&mut engine, posts_scheduled),
        ObjectPolicy::Fifo => drive_unit_fifo(&mut engine),
        ObjectPolicy::RoundRobin { quantum } => drive_round_robin(&mut engine, quantum.max(1)),
        ObjectPolicy::Random => drive_random(&mut engine, seed),
        ObjectPolicy::Parallel { workers } => return run_parallel(engine, workers),
    }
    engine.into_outcome()
}

/// Run each dispatched task until it blocks or finishes, dispatching in
/// became-runnable order. With `record_picks` off this is the inline
/// driver: a single task exists and runs to completion without scheduling
/// noise in the trace.
fn drive_to_block_order(engine: &mut Engine, record_picks: bool) {
    loop {
        if engine.terminal().is_some() {
            return;
        }
        let runnable = engine.runnable_by_ticket();
        let Some(&tid) = runnable.first() else {
            engine.quiesce();
            return;
        };
        if record_picks {
            engine.record_pick(tid, &runnable);
        }
        run_until_switch(engine, tid);
    }
}

fn run_until_switch(engine: &mut Engine, tid: TaskId) {
    loop {
        match engine.exec_one(tid) {
            ExecResult::Ran => {
                if !engine.is_runnable(tid) {
                    return;
                }
            }
            ExecResult::Blocked | ExecResult::Finished | ExecResult::Terminal => return,
        }
    }
}

/// Schedulable unit for the object-policy queue drivers: objects bundle
/// their method tasks; function tasks stand alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Unit {
    Task(TaskId),
    Obj(ObjRef),
}

fn unit_of(engine: &Engine, tid: TaskId) -> Unit {
    match engine.task_object(tid) {
        Some(obj) => Unit::Obj(obj),
        None => Unit::Task(tid),
    }
}

/// Lowest-ticket runnable task of a unit, if any.
fn unit_task(engine: &Engine, unit: Unit) -> Option<TaskId> {
    engine
        .runnable_by_ticket()
        .into_iter()
        .find(|&t| unit_of(engine, t) == unit)
}

/// Global first-in-first-out queue of units; each dispatch runs one unit's
/// task until it blocks or completes, then the unit requeues at the back
/// if it still has work.
fn drive_unit_fifo(engine: &mut Engine) {
    let mut queue: VecDeque<Unit> = VecDeque::new();
    loop {
        if engine.terminal().is_some() {
            return;
        }
        let runnable = engine.runnable_by_ticket();
        if runnable.is_empty() {
            engine.quiesce();
            return;
        }
        for &tid in &runnable {
            let unit = unit_of(engine, tid);
            if !queue.contains(&unit) {
                queue.push_back(unit);
            }
        }
        let Some(unit) = queue.pop_front() else {
            unreachable!("runnable implies enqueued unit")
        };
        let Some(tid) = unit_task(engine, unit) else {
            continue; // stale entry; the unit lost its runnable work
        };
        engine.record_pick(tid, &runnable);
        run_until_switch(engine, tid);
    }
}

/// Fixed rotation over units in first-seen order, each receiving a
/// statement quantum per turn.
fn drive_round_robin(engine: &mut Engine, quantum: u64) {
    let mut ring: Vec<Unit> = Vec::new();
    let mut cursor = 0usize;
    loop {
        if engine.terminal().is_some() {
            return;
        }
        let runnable = engine.runnable_by_ticket();
        if runnable.is_empty() {
            engine.quiesce();
            return;
        }
        for &tid in &runnable {
            let unit = unit_of(engine, tid);
            if !ring.contains(&unit) {
                ring.push(unit);
            }
        }
        // Find the next unit in the rotation with runnable work.
        let mut chosen = None;
        for offset in 0..ring.len() {
            let unit = ring[(cursor + offset) % ring.len()];
            if let Some(tid) = unit_task(engine, unit) {
                chosen = Some((tid, (cursor + offset) % ring.len()));
                break;
            }
        }
        let Some((tid, pos)) = chosen else {
            unreachable!("runnable implies a unit with work")
        };
        cursor = pos + 1;
        engine.record_pick(tid, &runnable);
        let mut left = quantum;
        while left > 0 {
            match engine.exec_one(tid) {
                ExecResult::Ran if engine.is_runnable(tid) => left -= 1,
                _ => break,
            }
        }
    }
}

/// Statement-level uniform choice among runnable tasks; the decision is a
/// pure function of (seed, decision index, runnable set).
fn drive_random(engine: &mut Engine, seed: u64) {
    let mut decision: u64 = 0;
    loop {
        if engine.terminal().is_some() {
            return;
        }
        let runnable = engine.runnable_tasks();
        if runnable.is_empty() {
            engine.quiesce();
            return;
        }
        let pick = (mix_decision(seed, decision) % runnable.len() as u64) as usize;
        decision += 1;
        let tid = runnable[pick];
        engine.record_pick(tid, &runnable);
        engine.exec_one(tid);
    }
}
