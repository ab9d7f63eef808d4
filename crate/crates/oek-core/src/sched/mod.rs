//! Scheduled execution: function activations and method requests become
//! tasks, and pluggable policies decide which runnable work proceeds.
//!
//! The inline policies execute the new activation immediately on the
//! submitting task, which recovers the sequential execution model exactly;
//! the other policies interleave tasks at statement granularity, with
//! every statement atomic, so the interleaving space is finite and
//! explorable.

mod drivers;
mod engine;
mod parallel;

pub use drivers::{run_funcsched, run_objsched, run_objsched_with_posts};
pub use engine::{Engine, ExecResult, ObjectProgress, SchedConfig, StepBudget};

use serde::Serialize;

/// How posted function activations are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FunctionPolicy {
    /// Run the posted activation to completion at the post site.
    Inline,
    /// First-in-first-out run queue; tasks run until they block or finish.
    Fifo,
    /// Uniform choice among runnable tasks at every statement, driven by
    /// the run seed; a pure function of (seed, decision index, runnable set).
    Random,
    /// Real worker threads pulling runnable tasks.
    Parallel { workers: usize },
}

/// How objects with pending or admitted work are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ObjectPolicy {
    /// Execute each request immediately on the submitter's task, bypassing
    /// the queue entirely (the sequential degenerate case).
    Inline,
    /// Global first-in-first-out queue of schedulable units.
    Fifo,
    /// Cycle through units, each receiving a fixed statement quantum.
    RoundRobin { quantum: u64 },
    /// Seeded uniform choice at every statement.
    Random,
    /// Real worker threads.
    Parallel { workers: usize },
}

/// How each object admits its pending requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MethodPolicy {
    /// One request at a time, admitted in submission order, holding the
    /// object through awaits until the method completes.
    ExclusiveInline,
    /// Serial execution, but a blocked method releases the object so the
    /// next request (or a resumed earlier one) can run.
    Interleaved,
    /// Admit everything immediately; method tasks of one object may
    /// interleave and its fields become racy by construction.
    Concurrent,
}

impl MethodPolicy {
    /// Serial policies make object possession a real synchronization edge.
    pub fn is_serial(self) -> bool {
        !matches!(self, MethodPolicy::Concurrent)
    }

    pub fn label(self) -> &'static str {
        match self {
            MethodPolicy::ExclusiveInline => "exclusive-inline",
            MethodPolicy::Interleaved => "interleaved",
            MethodPolicy::Concurrent => "concurrent",
        }
    }
}

impl FunctionPolicy {
    pub fn label(self) -> String {
        match self {
            FunctionPolicy::Inline => "inline".to_string(),
            FunctionPolicy::Fifo => "fifo".to_string(),
            FunctionPolicy::Random => "random".to_string(),
            FunctionPolicy::Parallel { workers } => format!("parallel:{workers}"),
        }
    }
}

impl ObjectPolicy {
    pub fn label(self) -> String {
        match self {
            ObjectPolicy::Inline => "inline".to_string(),
            ObjectPolicy::Fifo => "fifo".to_string(),
            ObjectPolicy::RoundRobin { quantum } => format!("round-robin:{quantum}"),
            ObjectPolicy::Random => "random".to_string(),
            ObjectPolicy::Parallel { workers } => format!("parallel:{workers}"),
        }
    }
}

/// splitmix64 of (seed, decision index): the pure decision function behind
/// the random policies, reproducible forever for a given seed.
pub(crate) fn mix_decision(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
