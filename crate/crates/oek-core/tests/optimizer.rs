//! The redundant-load optimizer: transform shape, counts, sequential
//! preservation over the whole corpus, and the concurrent divergence the
//! spin-wait workload exhibits after hoisting.

mod common;

use common::{corpus_names, corpus_program};
use oek_core::analysis::{
    equivalent, explore, explore_with, optimize_rle, EquivMode, ExploreBounds, ExploreConfig,
};
use oek_core::{parse, pretty_print, run_stack, validate};

const STEP_LIMIT: u64 = 100_000;

#[test]
fn spinwait_gets_exactly_one_hoisted_load() {
    let p = corpus_program("spinwait.oek");
    let result = optimize_rle(&p);
    assert_eq!(result.hoisted, 1);
    assert_eq!(result.eliminated, 0);
    let printed = pretty_print(result.program.program());
    // The loop now spins on a local cached before the loop.
    assert!(
        printed.contains("var __flag_0 = @flag;"),
        "hoisted read missing:\n{printed}"
    );
    assert!(
        printed.contains("while (__flag_0 == 0)"),
        "condition not rewritten:\n{printed}"
    );
}

#[test]
fn straight_line_repeats_are_eliminated_with_write_invalidation() {
    let p = corpus_program("cachey.oek");
    let result = optimize_rle(&p);
    assert_eq!(result.eliminated, 2);
    assert_eq!(result.hoisted, 0);
    let printed = pretty_print(result.program.program());
    // One cache before the write, a fresh one after it.
    assert!(printed.contains("var __mode_0 = @mode;"), "{printed}");
    assert!(printed.contains("var __mode_1 = @mode;"), "{printed}");
    assert!(printed.contains("@mode = 5;"), "{printed}");

    let before = run_stack(&p, STEP_LIMIT);
    let after = run_stack(&result.program, STEP_LIMIT);
    let r = equivalent(&before, &after, EquivMode::Strict);
    assert!(r.equal, "{:?}", r.diffs);
}

#[test]
fn programs_without_opportunities_are_untouched() {
    for name in ["fact.oek", "racy.oek", "globals.oek", "counter.oek"] {
        let p = corpus_program(name);
        let result = optimize_rle(&p);
        assert_eq!(result.eliminated, 0, "{name}");
        assert_eq!(result.hoisted, 0, "{name}");
        assert_eq!(
            pretty_print(result.program.program()),
            pretty_print(p.program()),
            "{name} must be identity"
        );
    }
}

#[test]
fn calls_posts_requests_and_awaits_invalidate_the_cache() {
    let src = "global g = 0; \
        func id(n) { return n; } \
        func main() { \
          var a = @g; \
          x = call id(1); \
          var b = @g; \
          h = post id(2); \
          var c = @g; \
          y = await h; \
          var d = @g; \
          print a + b + c + d; \
        }";
    let p = validate(parse(src).unwrap()).unwrap();
    let result = optimize_rle(&p);
    // Every read is separated from the next by a scheduling point.
    assert_eq!(result.eliminated, 0);
    assert_eq!(result.hoisted, 0);
}

#[test]
fn branch_writes_kill_caches_after_the_branch() {
    let src = "global g = 0; \
        func main() { \
          var a = @g + @g; \
          if (a == 0) { @g = 5; } else { } \
          var b = @g; \
          print b; \
        }";
    let p = validate(parse(src).unwrap()).unwrap();
    let result = optimize_rle(&p);
    // The doubled read in the first statement is cacheable; the read
    // after the branch is not (one path writes @g).
    assert_eq!(result.eliminated, 1);
    let printed = pretty_print(result.program.program());
    assert!(printed.contains("var __g_0 = @g;"), "{printed}");
    assert!(printed.contains("var b = @g;"), "{printed}");
    let r = equivalent(
        &run_stack(&p, STEP_LIMIT),
        &run_stack(&result.program, STEP_LIMIT),
        EquivMode::Strict,
    );
    assert!(r.equal, "{:?}", r.diffs);
}

#[test]
fn loop_bodies_reading_a_clean_global_share_the_hoisted_cache() {
    let src = "global lim = 3; \
        func main() { \
          var i = 0; \
          var acc = 0; \
          while (i < @lim) { \
            acc = acc + @lim; \
            i = i + 1; \
          } \
          print acc; \
        }";
    let p = validate(parse(src).unwrap()).unwrap();
    let result = optimize_rle(&p);
    assert_eq!(result.hoisted, 1);
    // The body read reuses the hoisted cache.
    assert_eq!(result.eliminated, 1);
    let before = run_stack(&p, STEP_LIMIT);
    let after = run_stack(&result.program, STEP_LIMIT);
    assert!(equivalent(&before, &after, EquivMode::Strict).equal);
    assert_eq!(after.print_strings(), vec!["9"]);
}

#[test]
fn sequential_preservation_over_the_whole_corpus() {
    for name in corpus_names() {
        let p = corpus_program(name.as_str());
        let result = optimize_rle(&p);
        let before = run_stack(&p, STEP_LIMIT);
        let after = run_stack(&result.program, STEP_LIMIT);
        let r = equivalent(&before, &after, EquivMode::Strict);
        assert!(r.equal, "{name}: {:?}", r.diffs);
    }
}

#[test]
fn optimizer_output_reparses_and_revalidates() {
    for name in corpus_names() {
        let p = corpus_program(name.as_str());
        let result = optimize_rle(&p);
        let printed = pretty_print(result.program.program());
        let reparsed = parse(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert!(validate(reparsed).is_ok(), "{name}");
    }
}

#[test]
fn spinwait_pre_opt_completes_on_every_recorded_schedule_printing_seven() {
    let p = corpus_program("spinwait.oek");
    let bounds = ExploreBounds {
        max_schedules: 10_000,
        max_steps: 200,
    };
    let report = explore(&p, ExploreConfig::funcsched(), bounds);
    assert_eq!(
        report.statuses_seen,
        ["completed".to_string()].into_iter().collect(),
        "every recorded schedule completes"
    );
    assert_eq!(
        report.prints_seen,
        [vec!["7".to_string()]].into_iter().collect(),
        "the handshake always publishes 7 before the flag"
    );
}

#[test]
fn spinwait_post_opt_can_spin_forever_on_some_schedule() {
    let p = corpus_program("spinwait.oek");
    let optimized = optimize_rle(&p).program;
    let bounds = ExploreBounds {
        max_schedules: 10_000,
        max_steps: 200,
    };
    let mut sole_runnable_cuts = 0u64;
    let report = explore_with(&p, ExploreConfig::funcsched(), bounds, |_| {});
    assert!(!report.statuses_seen.contains("step-limit-exceeded"));

    let report = explore_with(
        &optimized,
        ExploreConfig::funcsched(),
        bounds,
        |record| {
            if !record.starved_cut
                && matches!(record.outcome.status, oek_core::Status::StepLimitExceeded)
            {
                sole_runnable_cuts += 1;
            }
        },
    );
    assert!(
        report.statuses_seen.contains("step-limit-exceeded"),
        "hoisting makes some schedule spin forever: {:?}",
        report.statuses_seen
    );
    assert!(sole_runnable_cuts >= 1);
}
