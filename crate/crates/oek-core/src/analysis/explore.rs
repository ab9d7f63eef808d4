//! Exhaustive statement-level interleaving exploration.
//!
//! Depth-first enumeration over scheduler choice points with replay: each
//! schedule is a fresh engine run driven by a choice prefix, extended
//! with first-runnable picks, and backtracking flips the deepest decision
//! with an untried alternative. Memory stays linear in the path depth.
//!
//! When the step bound cuts a path, the cut is classified: if at least
//! two tasks were runnable, the schedule was starving a runnable
//! alternative and is excluded from the status and store sets (only
//! `truncated` records it). If exactly one task is runnable, the
//! remaining execution is choice-free, so it gets a deterministic grace
//! run of up to `max_steps` further statements: settling within the grace
//! records the natural outcome, a second task waking up returns
//! scheduling freedom and excludes the path, and exhausting the grace is
//! genuine divergence, recorded as a step-limit-exceeded outcome.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::outcome::{ObjectSnapshot, Outcome, Status};
use crate::sched::{Engine, MethodPolicy, SchedConfig};
use crate::trace::Trace;
use crate::validate::ValidatedProgram;
use crate::value::Value;

use super::races::{detect_races, Race};

/// Which execution model the explorer drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    /// Queue requests at objects and admit per the method policy (the
    /// object-scheduling model); otherwise requests run inline on the
    /// submitter (the function-scheduling model).
    pub req_scheduled: bool,
    pub mpolicy: MethodPolicy,
}

impl ExploreConfig {
    pub fn funcsched() -> Self {
        ExploreConfig {
            req_scheduled: false,
            mpolicy: MethodPolicy::ExclusiveInline,
        }
    }

    pub fn objsched(mpolicy: MethodPolicy) -> Self {
        ExploreConfig {
            req_scheduled: true,
            mpolicy,
        }
    }

    pub fn model_label(&self) -> String {
        if self.req_scheduled {
            format!("objsched/{}", self.mpolicy.label())
        } else {
            "funcsched".to_string()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreBounds {
    pub max_schedules: u64,
    pub max_steps: u64,
}

impl Default for ExploreBounds {
    fn default() -> Self {
        ExploreBounds {
            max_schedules: 10_000,
            max_steps: 10_000,
        }
    }
}

/// One explored schedule, handed to the per-schedule callback.
#[derive(Debug, Clone)]
pub struct ScheduleRecord {
    pub index: u64,
    pub outcome: Outcome,
    pub trace: Trace,
    /// Cut by the step bound while another task was runnable; outcome
    /// status and stores are not aggregated for such paths.
    pub starved_cut: bool,
}

/// Deduplicated final store of a completed schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FinalStore {
    pub globals: std::collections::BTreeMap<String, Value>,
    pub objects: std::collections::BTreeMap<u64, ObjectSnapshot>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplorationReport {
    pub model: String,
    pub max_schedules: u64,
    pub max_steps: u64,
    pub schedules_explored: u64,
    /// A bound bound: max_schedules ran out or max_steps cut some path.
    pub truncated: bool,
    /// Status labels of recorded (non-starved) schedules.
    pub statuses_seen: BTreeSet<String>,
    /// Final stores of completed schedules, deduplicated.
    pub distinct_final_stores: Vec<FinalStore>,
    /// Print sequences of completed schedules.
    pub prints_seen: BTreeSet<Vec<String>>,
    /// Races found on any schedule, deduplicated by location and program points.
    pub races: Vec<Race>,
}

impl ExplorationReport {
    /// Distinct final integer values of one global across completed schedules.
    pub fn global_finals(&self, name: &str) -> BTreeSet<i64> {
        self.distinct_final_stores
            .iter()
            .filter_map(|s| match s.globals.get(name) {
                Some(Value::Int(v)) => Some(*v),
                _ => None,
            })
            .collect()
    }

    /// Distinct final integer values of one object field across completed schedules.
    pub fn field_finals(&self, obj: u64, field: &str) -> BTreeSet<i64> {
        self.distinct_final_stores
            .iter()
            .filter_map(|s| match s.objects.get(&obj).and_then(|o| o.fields.get(field)) {
                Some(Value::Int(v)) => Some(*v),
                _ => None,
            })
            .collect()
    }
}

/// Explore every statement-level interleaving within the bounds.
pub fn explore(
    program: &ValidatedProgram,
    config: ExploreConfig,
    bounds: ExploreBounds,
) -> ExplorationReport {
    explore_with(program, config, bounds, |_| {})
}

/// As [`explore`], invoking `on_schedule` for every explored path
/// (including starved cuts) before it is aggregated.
pub fn explore_with(
    program: &ValidatedProgram,
    config: ExploreConfig,
    bounds: ExploreBounds,
    mut on_schedule: impl FnMut(&ScheduleRecord),
) -> ExplorationReport {
    let mut report = ExplorationReport {
        model: config.model_label(),
        max_schedules: bounds.max_schedules,
        max_steps: bounds.max_steps,
        schedules_explored: 0,
        truncated: false,
        statuses_seen: BTreeSet::new(),
        distinct_final_stores: Vec::new(),
        prints_seen: BTreeSet::new(),
        races: Vec::new(),
    };
    let mut store_keys: BTreeSet<String> = BTreeSet::new();
    let mut race_keys: BTreeSet<(String, String, String)> = BTreeSet::new();

    // The choice prefix for the next run; extended with 0 picks beyond its
    // length, backtracked by flipping the deepest decision with an
    // untried alternative.
    let mut prefix: Vec<usize> = Vec::new();

    loop {
        if report.schedules_explored == bounds.max_schedules {
            report.truncated = true;
            break;
        }
        let (mut record, choices, fanouts) =
            run_one_schedule(program, &config, bounds.max_steps, &prefix);
        record.index = report.schedules_explored;
        report.schedules_explored += 1;

        if record.starved_cut {
            report.truncated = true;
        } else {
            report
                .statuses_seen
                .insert(record.outcome.status.label().to_string());
            if matches!(record.outcome.status, Status::StepLimitExceeded) {
                report.truncated = true;
            }
            if record.outcome.status.is_completed() {
                if store_keys.insert(record.outcome.store_key()) {
                    report.distinct_final_stores.push(FinalStore {
                        globals: record.outcome.globals_final.clone(),
                        objects: record.outcome.objects_final.clone(),
                    });
                }
                report.prints_seen.insert(record.outcome.print_strings());
            }
        }

        if let Ok(races) = detect_races(&record.trace) {
            for race in races {
                if race_keys.insert(race.dedup_key()) {
                    report.races.push(race);
                }
            }
        }

        on_schedule(&record);

        // Backtrack to the deepest decision with an untried alternative.
        let mut next = None;
        for d in (0..choices.len()).rev() {
            if choices[d] + 1 < fanouts[d] {
                next = Some(d);
                break;
            }
        }
        match next {
            Some(d) => {
                prefix = choices[..d].to_vec();
                prefix.push(choices[d] + 1);
            }
            None => break, // exhausted the whole interleaving space
        }
    }

    report
}

fn run_one_schedule(
    program: &ValidatedProgram,
    config: &ExploreConfig,
    max_steps: u64,
    prefix: &[usize],
) -> (ScheduleRecord, Vec<usize>, Vec<usize>) {
    let grace_limit = max_steps.saturating_mul(2);
    let sched_config = SchedConfig {
        post_inline: false,
        req_inline: !config.req_scheduled,
        mpolicy: config.mpolicy,
        model: "explore".to_string(),
        policy: config.model_label(),
        seed: 0,
    };
    let mut engine = Engine::new(program, sched_config, grace_limit);
    let mut choices = Vec::new();
    let mut fanouts = Vec::new();
    let mut starved_cut = false;

    loop {
        if engine.terminal().is_some() {
            break;
        }
        let runnable = engine.runnable_tasks();
        if runnable.is_empty() {
            engine.quiesce();
            break;
        }
        if engine.steps() == max_steps {
            if runnable.len() >= 2 {
                // The scheduler had an alternative all along: a starving
                // schedule, excluded from the aggregates.
                starved_cut = true;
                engine.force_terminal(Status::StepLimitExceeded);
            } else {
                // Choice-free from here; let it settle or prove divergent.
                grace_run(&mut engine, &mut starved_cut);
            }
            break;
        }
        let depth = choices.len();
        let pick = prefix.get(depth).copied().unwrap_or(0);
        debug_assert!(pick < runnable.len(), "replayed choice in range");
        choices.push(pick);
        fanouts.push(runnable.len());
        let tid = runnable[pick];
        engine.record_pick(tid, &runnable);
        engine.exec_one(tid);
    }

    let (outcome, trace) = engine.into_outcome();
    (
        ScheduleRecord {
            index: 0,
            outcome,
            trace,
            starved_cut,
        },
        choices,
        fanouts,
    )
}

/// Drive the single runnable task until the run settles, another task
/// wakes (freedom returns: exclude the path), or the engine's doubled
/// step budget expires (genuine divergence, recorded).
fn grace_run(engine: &mut Engine, starved_cut: &mut bool) {
    loop {
        if engine.terminal().is_some() {
            return;
        }
        let runnable = engine.runnable_tasks();
        if runnable.is_empty() {
            engine.quiesce();
            return;
        }
        if runnable.len() >= 2 {
            *starved_cut = true;
            engine.force_terminal(Status::StepLimitExceeded);
            return;
        }
        engine.record_pick(runnable[0], &runnable);
        engine.exec_one(runnable[0]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::validate::validate;

    fn program(src: &str) -> ValidatedProgram {
        validate(parse(src).unwrap()).unwrap()
    }

    #[test]
    fn sequential_program_has_one_schedule_and_no_races() {
        let p = program("func main() { var x = 1; print x; }");
        let report = explore(&p, ExploreConfig::funcsched(), ExploreBounds::default());
        assert_eq!(report.schedules_explored, 1);
        assert!(!report.truncated);
        assert_eq!(report.distinct_final_stores.len(), 1);
        assert!(report.races.is_empty());
    }

    #[test]
    fn two_posted_printers_interleave_both_ways() {
        let p = program(
            "func a() { print 1; } func b() { print 2; } \
             func main() { h1 = post a(); h2 = post b(); x = await h1; y = await h2; }",
        );
        let report = explore(&p, ExploreConfig::funcsched(), ExploreBounds::default());
        assert!(!report.truncated);
        assert!(report.prints_seen.contains(&vec!["1".to_string(), "2".to_string()]));
        assert!(report.prints_seen.contains(&vec!["2".to_string(), "1".to_string()]));
    }

    #[test]
    fn schedule_budget_truncates() {
        let p = program(
            "func a() { print 1; } func b() { print 2; } \
             func main() { h1 = post a(); h2 = post b(); x = await h1; y = await h2; }",
        );
        let report = explore(
            &p,
            ExploreConfig::funcsched(),
            ExploreBounds {
                max_schedules: 2,
                max_steps: 10_000,
            },
        );
        assert!(report.truncated);
        assert_eq!(report.schedules_explored, 2);
    }
}
