//! Dynamic race detection: conflicting accesses (same global or same
//! object field, at least one write, different tasks) unordered by
//! happens-before.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::ast::Loc;
use crate::trace::{EventKind, TaskId, Trace};
use crate::value::{ObjRef, Value};

use super::hb::{happens_before, AnalysisError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

/// One side of a race.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessInfo {
    pub task: TaskId,
    pub seq: u64,
    pub kind: AccessKind,
    pub loc: Option<Loc>,
    pub value: Value,
}

/// Two conflicting, happens-before-unordered accesses to one location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Race {
    /// `@name` for globals, `obj#k.field` for fields.
    pub location: String,
    pub first: AccessInfo,
    pub second: AccessInfo,
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "race on {}: {:?} by {} at {} vs {:?} by {} at {}",
            self.location,
            self.first.kind,
            self.first.task,
            self.first
                .loc
                .map(|l| l.to_string())
                .unwrap_or_else(|| "?".to_string()),
            self.second.kind,
            self.second.task,
            self.second
                .loc
                .map(|l| l.to_string())
                .unwrap_or_else(|| "?".to_string()),
        )
    }
}

impl Race {
    /// Schedule-independent identity: location, ordered program points and
    /// access kinds. Used to deduplicate within and across schedules.
    pub fn dedup_key(&self) -> (String, String, String) {
        let side = |a: &AccessInfo| {
            format!(
                "{:?}@{}",
                a.kind,
                a.loc.map(|l| l.to_string()).unwrap_or_default()
            )
        };
        let (a, b) = (side(&self.first), side(&self.second));
        if a <= b {
            (self.location.clone(), a, b)
        } else {
            (self.location.clone(), b, a)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Location {
    Global(u32),
    Field(ObjRef, u32),
}

/// All races in one trace, deduplicated by (location, task pair, program
/// locations). Computes happens-before internally.
pub fn detect_races(trace: &Trace) -> Result<Vec<Race>, AnalysisError> {
    let clocks = happens_before(trace)?;

    // Intern location names to keep the grouping key small.
    let mut names: Vec<String> = Vec::new();
    let mut name_ids: HashMap<String, u32> = HashMap::new();
    let mut intern = |s: &str| -> u32 {
        if let Some(&id) = name_ids.get(s) {
            return id;
        }
        let id = names.len() as u32;
        names.push(s.to_string());
        name_ids.insert(s.to_string(), id);
        id
    };

    struct Access {
        idx: usize,
        task: TaskId,
        kind: AccessKind,
        loc: Option<Loc>,
        value: Value,
    }

    let mut by_location: HashMap<Location, Vec<Access>> = HashMap::new();
    for (idx, ev) in trace.events.iter().enumerate() {
        let (location, kind, value) = match &ev.kind {
            EventKind::ReadGlobal { name, value } => {
                (Location::Global(intern(name)), AccessKind::Read, *value)
            }
            EventKind::WriteGlobal { name, value } => {
                (Location::Global(intern(name)), AccessKind::Write, *value)
            }
            EventKind::ReadField { field, value } => (
                Location::Field(ev.obj.expect("field access has object"), intern(field)),
                AccessKind::Read,
                *value,
            ),
            EventKind::WriteField { field, value } => (
                Location::Field(ev.obj.expect("field access has object"), intern(field)),
                AccessKind::Write,
                *value,
            ),
            _ => continue,
        };
        by_location.entry(location).or_default().push(Access {
            idx,
            task: ev.task,
            kind,
            loc: ev.loc,
            value,
        });
    }

    let mut races = Vec::new();
    let mut seen: BTreeSet<(String, TaskId, TaskId, String, String)> = BTreeSet::new();

    let mut locations: Vec<&Location> = by_location.keys().collect();
    locations.sort_by_key(|l| match l {
        Location::Global(n) => (0u8, 0u64, *n),
        Location::Field(o, n) => (1u8, o.0, *n),
    });

    for location in locations {
        let accesses = &by_location[location];
        let loc_name = match location {
            Location::Global(n) => format!("@{}", names[*n as usize]),
            Location::Field(o, n) => format!("{}.{}", o, names[*n as usize]),
        };
        // Compare each write against every access of another task.
        for (i, a) in accesses.iter().enumerate() {
            for b in accesses.iter().skip(i + 1) {
                if a.task == b.task {
                    continue;
                }
                if a.kind == AccessKind::Read && b.kind == AccessKind::Read {
                    continue;
                }
                if !clocks[a.idx].concurrent(&clocks[b.idx]) {
                    continue;
                }
                let (lo, hi) = if a.task <= b.task {
                    (a, b)
                } else {
                    (b, a)
                };
                let key = (
                    loc_name.clone(),
                    lo.task,
                    hi.task,
                    format!("{:?}@{:?}", lo.kind, lo.loc),
                    format!("{:?}@{:?}", hi.kind, hi.loc),
                );
                if !seen.insert(key) {
                    continue;
                }
                races.push(Race {
                    location: loc_name.clone(),
                    first: AccessInfo {
                        task: lo.task,
                        seq: trace.events[lo.idx].seq,
                        kind: lo.kind,
                        loc: lo.loc,
                        value: lo.value,
                    },
                    second: AccessInfo {
                        task: hi.task,
                        seq: trace.events[hi.idx].seq,
                        kind: hi.kind,
                        loc: hi.loc,
                        value: hi.value,
                    },
                });
            }
        }
    }

    Ok(races)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::sched::{run_funcsched, run_objsched, FunctionPolicy, MethodPolicy, ObjectPolicy};
    use crate::validate::validate;

    const RACY: &str = "global g = 0; \
        func inc() { var t = @g; @g = t + 1; } \
        func main() { h1 = post inc(); h2 = post inc(); a = await h1; b = await h2; print @g; }";

    #[test]
    fn unsynchronized_increments_race() {
        let p = validate(parse(RACY).unwrap()).unwrap();
        let (_, trace) = run_funcsched(&p, FunctionPolicy::Fifo, 0, 100_000);
        let races = detect_races(&trace).unwrap();
        assert!(!races.is_empty());
        assert!(races.iter().all(|r| r.location == "@g"));
    }

    #[test]
    fn single_task_program_has_no_races() {
        let p = validate(
            parse("global g = 0; func main() { @g = 1; var x = @g; print x; }").unwrap(),
        )
        .unwrap();
        let (_, trace) = run_funcsched(&p, FunctionPolicy::Inline, 0, 100_000);
        assert!(detect_races(&trace).unwrap().is_empty());
    }

    #[test]
    fn serialized_object_counter_has_no_races() {
        let src = "object Counter { field c = 0; \
            method inc() { var t = self.c; self.c = t + 1; return self.c; } } \
            func main() { var o = new Counter(); h1 = req o.inc(); h2 = req o.inc(); \
            a = await h1; b = await h2; print a + b; }";
        let p = validate(parse(src).unwrap()).unwrap();
        let (out, trace) = run_objsched(
            &p,
            ObjectPolicy::Fifo,
            MethodPolicy::ExclusiveInline,
            0,
            100_000,
        );
        assert!(out.status.is_completed());
        assert!(detect_races(&trace).unwrap().is_empty());
    }

    #[test]
    fn awaited_handoff_is_not_a_race() {
        let src = "global g = 0; func child() { @g = 7; } \
            func main() { h = post child(); r = await h; var x = @g; print x; }";
        let p = validate(parse(src).unwrap()).unwrap();
        let (_, trace) = run_funcsched(&p, FunctionPolicy::Fifo, 0, 100_000);
        assert!(detect_races(&trace).unwrap().is_empty());
    }
}
