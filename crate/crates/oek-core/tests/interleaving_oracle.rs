//! The brute-force oracle for exploration results.
//!
//! The expected final-store sets are established two independent ways
//! before being asserted against the explorer:
//!
//! 1. By hand. racy.oek runs two tasks, each `read g into t` then
//!    `write t+1 to g`, from g = 0. The six program-order-preserving
//!    interleavings of (r1 w1) and (r2 w2):
//!
//!    r1 w1 r2 w2 → 2      r1 r2 w1 w2 → 1      r1 r2 w2 w1 → 1
//!    r2 r1 w1 w2 → 1      r2 r1 w2 w1 → 1      r2 w2 r1 w1 → 2
//!
//!    so the reachable finals are exactly {1, 2}. msg.oek routes the same
//!    two increments through one object under serial admission, which
//!    forbids the read-read overlaps: finals are exactly {2}.
//!
//! 2. By the miniature enumerator below, which interleaves abstract
//!    read/write steps with no engine code involved.

mod common;

use std::collections::BTreeSet;

use common::corpus_program;
use oek_core::analysis::{explore, ExploreBounds, ExploreConfig};
use oek_core::MethodPolicy;

/// Abstract step of the increment workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Read,
    Write,
}

/// Enumerate every interleaving of n two-step increment tasks over one
/// integer cell and collect the reachable final values. Independent of
/// the interpreter and scheduler under test.
fn enumerate_increment_finals(tasks: usize) -> BTreeSet<i64> {
    fn go(
        progress: &mut Vec<usize>,
        saved: &mut Vec<i64>,
        cell: i64,
        steps: &[Step],
        finals: &mut BTreeSet<i64>,
    ) {
        let mut any = false;
        for t in 0..progress.len() {
            if progress[t] >= steps.len() {
                continue;
            }
            any = true;
            let step = steps[progress[t]];
            progress[t] += 1;
            match step {
                Step::Read => {
                    let old = saved[t];
                    saved[t] = cell;
                    go(progress, saved, cell, steps, finals);
                    saved[t] = old;
                }
                Step::Write => {
                    go(progress, saved, saved[t] + 1, steps, finals);
                }
            }
            progress[t] -= 1;
        }
        if !any {
            finals.insert(cell);
        }
    }

    let steps = [Step::Read, Step::Write];
    let mut finals = BTreeSet::new();
    go(
        &mut vec![0; tasks],
        &mut vec![0; tasks],
        0,
        &steps,
        &mut finals,
    );
    finals
}

#[test]
fn the_hand_enumeration_and_the_miniature_enumerator_agree() {
    // Frozen from the table above.
    let expected: BTreeSet<i64> = [1, 2].into_iter().collect();
    assert_eq!(enumerate_increment_finals(2), expected);
    // Three tasks can still collapse to any count between 1 and 3.
    let expected3: BTreeSet<i64> = [1, 2, 3].into_iter().collect();
    assert_eq!(enumerate_increment_finals(3), expected3);
}

#[test]
fn explorer_matches_the_oracle_on_racy() {
    let p = corpus_program("racy.oek");
    let report = explore(&p, ExploreConfig::funcsched(), ExploreBounds::default());
    assert!(!report.truncated, "racy exploration is exhaustive");
    assert_eq!(
        report.global_finals("g"),
        enumerate_increment_finals(2),
        "explored finals equal the hand-enumerated set {{1, 2}}"
    );
    assert!(!report.races.is_empty(), "the increments race on @g");
    assert_eq!(
        report.statuses_seen,
        ["completed".to_string()].into_iter().collect::<BTreeSet<_>>()
    );
}

#[test]
fn explorer_matches_the_serialization_argument_on_msg() {
    let p = corpus_program("msg.oek");
    let report = explore(
        &p,
        ExploreConfig::objsched(MethodPolicy::ExclusiveInline),
        ExploreBounds::default(),
    );
    assert!(!report.truncated, "msg exploration is exhaustive");
    let finals = report.field_finals(0, "c");
    assert_eq!(finals, [2].into_iter().collect::<BTreeSet<i64>>());
    assert!(report.races.is_empty(), "{:?}", report.races);
    // Serial admission orders the replies but not which task gets 1 or 2;
    // the printed sum is always 3.
    assert_eq!(
        report.prints_seen,
        [vec!["3".to_string()]].into_iter().collect::<BTreeSet<_>>()
    );
}

#[test]
fn explorer_finds_the_field_race_under_concurrent_admission() {
    let p = corpus_program("counter.oek");
    let report = explore(
        &p,
        ExploreConfig::objsched(MethodPolicy::Concurrent),
        ExploreBounds::default(),
    );
    assert!(!report.truncated);
    assert_eq!(
        report.field_finals(0, "c"),
        enumerate_increment_finals(2),
        "lost update reachable: finals {{1, 2}}"
    );
    assert!(!report.races.is_empty());

    let serial = explore(
        &p,
        ExploreConfig::objsched(MethodPolicy::ExclusiveInline),
        ExploreBounds::default(),
    );
    assert!(!serial.truncated);
    assert_eq!(
        serial.field_finals(0, "c"),
        [2].into_iter().collect::<BTreeSet<i64>>()
    );
    assert!(serial.races.is_empty(), "{:?}", serial.races);
}

#[test]
fn exploration_of_a_sequential_program_is_a_single_schedule() {
    let p = corpus_program("fact.oek");
    let report = explore(&p, ExploreConfig::funcsched(), ExploreBounds::default());
    assert_eq!(report.schedules_explored, 1);
    assert!(!report.truncated);
    assert_eq!(report.distinct_final_stores.len(), 1);
    assert!(report.races.is_empty());
}

#[test]
fn deadlock_is_reported_on_every_explored_schedule() {
    for name in ["deadlock.oek", "selfwait.oek"] {
        let p = corpus_program(name);
        let mut schedules = 0u64;
        let report = oek_core::analysis::explore_with(
            &p,
            ExploreConfig::objsched(MethodPolicy::ExclusiveInline),
            ExploreBounds::default(),
            |record| {
                schedules += 1;
                assert!(
                    matches!(record.outcome.status, oek_core::Status::Deadlock(_)),
                    "{name}: schedule {} ended {:?}",
                    record.index,
                    record.outcome.status
                );
            },
        );
        assert!(!report.truncated);
        assert!(schedules >= 1);
        assert_eq!(
            report.statuses_seen,
            ["deadlock".to_string()].into_iter().collect::<BTreeSet<_>>(),
            "{name}"
        );
    }
}
