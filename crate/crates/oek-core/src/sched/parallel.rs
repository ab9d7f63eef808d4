//! Worker-pool execution: N OS threads contend for the engine lock and
//! each executes one statement per acquisition.
//!
//! Statements stay atomic (the engine lock spans one statement), which is
//! the declared preemption granularity, and scheduler transitions remain
//! atomic with respect to workers. Interleaving across statements is real
//! OS nondeterminism, so unsynchronized user programs exhibit genuine
//! lost updates while object admission still serializes method tasks.
//! The trace recorder is totally ordered by construction.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::outcome::Outcome;
use crate::trace::Trace;

use super::engine::Engine;

pub(crate) fn run_parallel(engine: Engine, workers: usize) -> (Outcome, Trace) {
    let workers = workers.max(1);
    let shared = Arc::new(Mutex::new(engine));
    let rotation = Arc::new(AtomicUsize::new(0));

    let handles: Vec<_> = (0..workers)
        .map(|_| {
            let shared = Arc::clone(&shared);
            let rotation = Arc::clone(&rotation);
            std::thread::spawn(move || loop {
                let mut engine = shared.lock().expect("engine lock");
                if engine.terminal().is_some() {
                    return;
                }
                let runnable = engine.runnable_tasks();
                if runnable.is_empty() {
                    engine.quiesce();
                    return;
                }
                // Rotate the pick so workers spread across tasks; which
                // worker wins the lock is up to the OS.
                let idx = rotation.fetch_add(1, Ordering::Relaxed) % runnable.len();
                let tid = runnable[idx];
                engine.record_pick(tid, &runnable);
                engine.exec_one(tid);
            })
        })
        .collect();

    for h in handles {
        h.join().expect("worker panicked");
    }

    let engine = Arc::try_unwrap(shared)
        .unwrap_or_else(|_| panic!("workers exited"))
        .into_inner()
        .expect("engine lock");
    engine.into_outcome()
}
