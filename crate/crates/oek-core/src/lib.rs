//! OEK: a minimal kernel language executed under interchangeable
//! execution models, from stack-based sequential interpretation up to
//! scheduled concurrent functions and objects, plus the analysis tooling
//! (interleaving exploration, happens-before race detection, equivalence
//! checking, and a sequentially-sound load optimizer) used to compare
//! them.

pub mod analysis;
pub mod ast;
pub mod error;
pub mod lexer;
pub mod outcome;
pub mod parser;
pub mod pretty;
pub mod sched;
pub mod stack;
mod store;
pub mod trace;
pub mod treewalk;
pub mod validate;
pub mod value;

pub use ast::{Loc, Program};
pub use error::{ParseError, RuntimeErrorInfo, SemanticError};
pub use outcome::{DeadlockReport, ObjectSnapshot, Outcome, Status};
pub use parser::parse;
pub use pretty::pretty_print;
pub use sched::{
    run_funcsched, run_objsched, run_objsched_with_posts, Engine, FunctionPolicy, MethodPolicy,
    ObjectPolicy,
};
pub use stack::{run_stack, StackMachine};
pub use trace::{Event, EventKind, Trace, TraceHeader};
pub use treewalk::run_inline;
pub use validate::{validate, ValidatedProgram};
pub use value::{HandleId, ObjRef, Value};

/// Default statement budget for a run.
pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;
