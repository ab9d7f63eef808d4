//! The stack-based sequential execution model.
//!
//! Control lives in an explicit frame stack driven one statement at a
//! time; the host call stack is never used for OEK calls. `call` pushes a
//! frame, `post` and `req` push a frame immediately and resolve their
//! handle when it returns (asynchrony degrades to immediate execution),
//! and `await` reads the already-resolved handle.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::ast::*;
use crate::error::RuntimeErrorInfo;
use crate::outcome::{Outcome, Status};
use crate::store::{init_globals, HandleTable, ObjectHeap};
use crate::validate::ValidatedProgram;
use crate::value::{
    apply_binop, apply_unop, expect_bool, logic_operand, HandleId, ObjRef, Value,
};

/// Run a validated program on the stack machine to completion.
pub fn run_stack(program: &ValidatedProgram, step_limit: u64) -> Outcome {
    let mut machine = StackMachine::new(program, step_limit);
    while !machine.halted() {
        machine.step().expect("machine not halted");
    }
    machine.into_outcome()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("stepping a halted machine")]
    Halted,
}

/// What to do with a frame's return value.
#[derive(Debug)]
enum ReturnAction {
    /// Entry frame: the value is discarded.
    Finish,
    /// `x = call f(..)`: bind the value in the caller.
    AssignLocal(String),
    /// `post`/`req`: resolve the reply handle.
    Resolve(HandleId),
}

/// Position inside one block of statements.
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
            blocks: vec![BlockCtx {
                block: body,
                idx: 0,
            }],
            on_return,
        }
    }
}

/// Explicit-stack interpreter state. Between steps the machine is always
/// either halted or positioned at the next statement to execute.
pub struct StackMachine {
    program: ValidatedProgram,
    frames: Vec<Frame>,
    globals: BTreeMap<String, Value>,
    objects: ObjectHeap,
    handles: HandleTable,
    prints: Vec<Value>,
    steps: u64,
    step_limit: u64,
    status: Option<Status>,
}

impl StackMachine {
    pub fn new(program: &ValidatedProgram, step_limit: u64) -> Self {
        let main = program.main();
        let mut machine = StackMachine {
            program: program.clone(),
            frames: vec![Frame::new(
                &main.params,
                Vec::new(),
                main.body.clone(),
                None,
                ReturnAction::Finish,
            )],
            globals: init_globals(program),
            objects: ObjectHeap::new(),
            handles: HandleTable::new(),
            prints: Vec::new(),
            steps: 0,
            step_limit,
            status: None,
        };
        machine.normalize();
        machine
    }

    pub fn halted(&self) -> bool {
        self.status.is_some()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn prints(&self) -> &[Value] {
        &self.prints
    }

    /// Execute exactly one statement (or halt on the step limit).
    pub fn step(&mut self) -> Result<(), StepError> {
        if self.halted() {
            return Err(StepError::Halted);
        }
        if self.steps == self.step_limit {
            self.status = Some(Status::StepLimitExceeded);
            return Ok(());
        }
        self.steps += 1;
        if let Err(err) = self.exec_current() {
            self.status = Some(Status::RuntimeError(err));
            return Ok(());
        }
        self.normalize();
        Ok(())
    }

    pub fn into_outcome(self) -> Outcome {
        Outcome {
            status: self.status.expect("machine halted"),
            prints: self.prints,
            globals_final: self.globals,
            objects_final: self.objects.snapshot(),
            steps: self.steps,
        }
    }

    /// Pop exhausted blocks and frames until the machine sits at a
    /// statement or has finished. Falling off a body returns unit.
    fn normalize(&mut self) {
        loop {
            let implicit_return = match self.frames.last_mut() {
                None => {
                    self.status = Some(Status::Completed);
                    return;
                }
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
            if implicit_return {
                self.do_return(Value::Unit);
            } else {
                return;
            }
        }
    }

    fn do_return(&mut self, value: Value) {
        let frame = self.frames.pop().expect("frame to return from");
        match frame.on_return {
            ReturnAction::Finish => {}
            ReturnAction::AssignLocal(name) => {
                self.frames
                    .last_mut()
                    .expect("caller frame")
                    .locals
                    .insert(name, value);
            }
            ReturnAction::Resolve(h) => self.handles.resolve(h, value),
        }
    }

    fn current_stmt(&self) -> Spanned<Stmt> {
        let frame = self.frames.last().expect("active frame");
        let ctx = frame.blocks.last().expect("active block");
        ctx.block[ctx.idx].clone()
    }

    fn advance(&mut self) {
        let frame = self.frames.last_mut().expect("active frame");
        let ctx = frame.blocks.last_mut().expect("active block");
        ctx.idx += 1;
    }

    fn push_block(&mut self, block: Block) {
        self.frames
            .last_mut()
            .expect("active frame")
            .blocks
            .push(BlockCtx { block, idx: 0 });
    }

    fn set_local(&mut self, name: &str, value: Value) {
        self.frames
            .last_mut()
            .expect("active frame")
            .locals
            .insert(name.to_string(), value);
    }

    fn exec_current(&mut self) -> Result<(), RuntimeErrorInfo> {
        let stmt = self.current_stmt();
        let loc = stmt.loc;
        match &stmt.node {
            Stmt::VarDecl { name, init } => {
                let v = self.eval(init)?;
                self.set_local(name, v);
                self.advance();
            }
            Stmt::Assign { target, value } => {
                let v = self.eval(value)?;
                match target {
                    LValue::Local(name) => {
                        let frame = self.frames.last_mut().expect("active frame");
                        if !frame.locals.contains_key(name) {
                            return Err(RuntimeErrorInfo::new(
                                format!("undefined local {name}"),
                                loc,
                            ));
                        }
                        frame.locals.insert(name.clone(), v);
                    }
                    LValue::SelfField(field) => {
                        let obj = self.self_obj(loc)?;
                        self.objects.set_field(obj, field, v);
                    }
                    LValue::Global(name) => {
                        self.globals.insert(name.clone(), v);
                    }
                }
                self.advance();
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let v = self.eval(cond)?;
                let b = expect_bool(&v).map_err(|m| RuntimeErrorInfo::new(m, cond.loc))?;
                self.advance();
                if b {
                    self.push_block(then_branch.clone());
                } else if let Some(els) = else_branch {
                    self.push_block(els.clone());
                }
            }
            Stmt::While { cond, body } => {
                let v = self.eval(cond)?;
                let b = expect_bool(&v).map_err(|m| RuntimeErrorInfo::new(m, cond.loc))?;
                if b {
                    // Leave the cursor on the while; the body block pops
                    // back here for the next condition evaluation.
                    self.push_block(body.clone());
                } else {
                    self.advance();
                }
            }
            Stmt::Return { value } => {
                let v = match value {
                    Some(e) => self.eval(e)?,
                    None => Value::Unit,
                };
                self.do_return(v);
            }
            Stmt::Print { value } => {
                let v = self.eval(value)?;
                self.prints.push(v);
                self.advance();
            }
            Stmt::Call { target, func, args } => {
                let argv = self.eval_args(args)?;
                let def = self.lookup_function(func, loc)?;
                let (params, body) = (def.params.clone(), def.body.clone());
                self.advance();
                self.frames.push(Frame::new(
                    &params,
                    argv,
                    body,
                    None,
                    ReturnAction::AssignLocal(target.clone()),
                ));
            }
            Stmt::Post { target, func, args } => {
                let argv = self.eval_args(args)?;
                let def = self.lookup_function(func, loc)?;
                let (params, body) = (def.params.clone(), def.body.clone());
                let h = self.handles.alloc();
                self.set_local(target, Value::Handle(h));
                self.advance();
                self.frames.push(Frame::new(
                    &params,
                    argv,
                    body,
                    None,
                    ReturnAction::Resolve(h),
                ));
            }
            Stmt::Req {
                target,
                object,
                method,
                args,
            } => {
                let obj = self.eval_object(object)?;
                let argv = self.eval_args(args)?;
                let type_name = self.objects.get(obj).type_name.clone();
                let def = self.lookup_method(&type_name, method, argv.len(), loc)?;
                let (params, body) = (def.params.clone(), def.body.clone());
                let h = self.handles.alloc();
                self.set_local(target, Value::Handle(h));
                self.advance();
                self.frames.push(Frame::new(
                    &params,
                    argv,
                    body,
                    Some(obj),
                    ReturnAction::Resolve(h),
                ));
            }
            Stmt::Await { target, handle } => {
                let hv = self
                    .frames
                    .last()
                    .expect("active frame")
                    .locals
                    .get(handle)
                    .copied()
                    .ok_or_else(|| {
                        RuntimeErrorInfo::new(format!("undefined local {handle}"), loc)
                    })?;
                let Value::Handle(h) = hv else {
                    return Err(RuntimeErrorInfo::new(
                        format!("type error: await expects a handle, got {}", hv.type_name()),
                        loc,
                    ));
                };
                let value = self.handles.get(h).ok_or_else(|| {
                    RuntimeErrorInfo::new("await on unresolved handle".to_string(), loc)
                })?;
                self.set_local(target, value);
                self.advance();
            }
        }
        Ok(())
    }

    fn self_obj(&self, loc: Loc) -> Result<ObjRef, RuntimeErrorInfo> {
        self.frames
            .last()
            .expect("active frame")
            .self_obj
            .ok_or_else(|| RuntimeErrorInfo::new("self outside method".to_string(), loc))
    }

    fn lookup_function(&self, name: &str, loc: Loc) -> Result<&FuncDef, RuntimeErrorInfo> {
        self.program
            .function(name)
            .ok_or_else(|| RuntimeErrorInfo::new(format!("undefined function {name}"), loc))
    }

    fn lookup_method(
        &self,
        type_name: &str,
        method: &str,
        arity: usize,
        loc: Loc,
    ) -> Result<&MethodDef, RuntimeErrorInfo> {
        let def = self.program.method(type_name, method).ok_or_else(|| {
            RuntimeErrorInfo::new(format!("no method {method} on {type_name}"), loc)
        })?;
        if def.params.len() != arity {
            return Err(RuntimeErrorInfo::new(
                format!(
                    "method {} on {} expects {} arguments, got {}",
                    method,
                    type_name,
                    def.params.len(),
                    arity
                ),
                loc,
            ));
        }
        Ok(def)
    }

    fn eval_args(&mut self, args: &[Spanned<Expr>]) -> Result<Vec<Value>, RuntimeErrorInfo> {
        args.iter().map(|a| self.eval(a)).collect()
    }

    fn eval_object(&mut self, expr: &Spanned<Expr>) -> Result<ObjRef, RuntimeErrorInfo> {
        let v = self.eval(expr)?;
        match v {
            Value::Obj(o) => Ok(o),
            other => Err(RuntimeErrorInfo::new(
                format!(
                    "type error: req target must be an object, got {}",
                    other.type_name()
                ),
                expr.loc,
            )),
        }
    }

    fn eval(&mut self, expr: &Spanned<Expr>) -> Result<Value, RuntimeErrorInfo> {
        let loc = expr.loc;
        match &expr.node {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Local(name) => self
                .frames
                .last()
                .expect("active frame")
                .locals
                .get(name)
                .copied()
                .ok_or_else(|| RuntimeErrorInfo::new(format!("undefined local {name}"), loc)),
            Expr::SelfField(field) => {
                let obj = self.self_obj(loc)?;
                self.objects.field(obj, field).ok_or_else(|| {
                    let t = &self.objects.get(obj).type_name;
                    RuntimeErrorInfo::new(format!("undefined field {field} on {t}"), loc)
                })
            }
            Expr::SelfRef => self.self_obj(loc).map(Value::Obj),
            Expr::Global(name) => self
                .globals
                .get(name)
                .copied()
                .ok_or_else(|| RuntimeErrorInfo::new(format!("undefined global {name}"), loc)),
            Expr::New(type_name) => {
                let def = self
                    .program
                    .object_type(type_name)
                    .ok_or_else(|| {
                        RuntimeErrorInfo::new(format!("unknown object type {type_name}"), loc)
                    })?
                    .clone();
                Ok(Value::Obj(self.objects.alloc(&def)))
            }
            Expr::Binary { op, lhs, rhs } if matches!(op, BinOp::And | BinOp::Or) => {
                let lv = self.eval(lhs)?;
                let lb = logic_operand(*op, &lv).map_err(|m| RuntimeErrorInfo::new(m, loc))?;
                let short = match op {
                    BinOp::And => !lb,
                    BinOp::Or => lb,
                    _ => unreachable!(),
                };
                if short {
                    return Ok(Value::Bool(lb));
                }
                let rv = self.eval(rhs)?;
                let rb = logic_operand(*op, &rv).map_err(|m| RuntimeErrorInfo::new(m, loc))?;
                Ok(Value::Bool(rb))
            }
            Expr::Binary { op, lhs, rhs } => {
                let lv = self.eval(lhs)?;
                let rv = self.eval(rhs)?;
                apply_binop(*op, &lv, &rv).map_err(|m| RuntimeErrorInfo::new(m, loc))
            }
            Expr::Unary { op, operand } => {
                let v = self.eval(operand)?;
                apply_unop(*op, &v).map_err(|m| RuntimeErrorInfo::new(m, loc))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::validate::validate;

    fn run(src: &str) -> Outcome {
        let p = validate(parse(src).unwrap()).unwrap();
        run_stack(&p, 1_000_000)
    }

    #[test]
    fn factorial() {
        let out = run(
            "func fact(n) { if (n < 2) { return 1; } r = call fact(n - 1); return n * r; } \
             func main() { f = call fact(5); print f; }",
        );
        assert_eq!(out.status, Status::Completed);
        assert_eq!(out.prints, vec![Value::Int(120)]);
    }

    #[test]
    fn division_by_zero_reports_location() {
        let out = run("func main() { var x = 1/0; }");
        match out.status {
            Status::RuntimeError(e) => {
                assert_eq!(e.message, "division by zero");
                assert_eq!(e.loc.line, 1);
            }
            other => panic!("expected runtime error, got {other:?}"),
        }
    }

    #[test]
    fn post_and_req_run_immediately() {
        let out = run(
            "object Counter { field c = 0; method inc() { self.c = self.c + 1; return self.c; } } \
             func twice(n) { return n * 2; } \
             func main() { \
               var o = new Counter(); \
               h1 = req o.inc(); \
               h2 = post twice(21); \
               a = await h1; \
               b = await h2; \
               print a; \
               print b; \
             }",
        );
        assert_eq!(out.status, Status::Completed);
        assert_eq!(out.prints, vec![Value::Int(1), Value::Int(42)]);
        assert_eq!(out.objects_final[&0].fields["c"], Value::Int(1));
    }

    #[test]
    fn stepping_prints_one_at_a_time() {
        let p = validate(parse("func main() { print 1; print 2; }").unwrap()).unwrap();
        let mut m = StackMachine::new(&p, 100);
        m.step().unwrap();
        assert_eq!(m.prints(), &[Value::Int(1)]);
        m.step().unwrap();
        assert_eq!(m.prints(), &[Value::Int(1), Value::Int(2)]);
        assert!(m.halted());
        assert_eq!(m.step(), Err(StepError::Halted));
    }

    #[test]
    fn step_count_matches_outcome_steps() {
        let src = "func main() { var i = 0; while (i < 3) { i = i + 1; } print i; }";
        let p = validate(parse(src).unwrap()).unwrap();
        let out = run_stack(&p, 1000);
        let mut m = StackMachine::new(&p, 1000);
        let mut n = 0;
        while !m.halted() {
            m.step().unwrap();
            n += 1;
        }
        assert_eq!(n, out.steps);
        // var + 4 condition evaluations + 3 increments + print.
        assert_eq!(out.steps, 9);
    }

    #[test]
    fn step_limit_halts_with_state_intact() {
        let out = run("func main() { while (true) { } }");
        assert!(matches!(out.status, Status::StepLimitExceeded));
        assert_eq!(out.steps, 1_000_000);
    }

    #[test]
    fn unknown_method_is_a_runtime_error() {
        let out = run(
            "object T { method m() { } } func main() { var o = new T(); h = req o.nope(); }",
        );
        match out.status {
            Status::RuntimeError(e) => assert_eq!(e.message, "no method nope on T"),
            other => panic!("expected runtime error, got {other:?}"),
        }
    }

    #[test]
    fn request_arity_is_checked_at_the_request_site() {
        let out = run(
            "object T { method m(a) { return a; } } \
             func main() { var o = new T(); h = req o.m(); }",
        );
        match out.status {
            Status::RuntimeError(e) => {
                assert_eq!(e.message, "method m on T expects 1 arguments, got 0")
            }
            other => panic!("expected runtime error, got {other:?}"),
        }
    }

    #[test]
    fn await_non_handle_is_a_type_error() {
        let out = run("func main() { var x = 5; y = await x; }");
        match out.status {
            Status::RuntimeError(e) => {
                assert_eq!(e.message, "type error: await expects a handle, got int")
            }
            other => panic!("expected runtime error, got {other:?}"),
        }
    }

    #[test]
    fn short_circuit_skips_the_right_operand() {
        let out = run("func main() { if (false && 1/0 == 0) { print 1; } print 2; }");
        assert_eq!(out.status, Status::Completed);
        assert_eq!(out.prints, vec![Value::Int(2)]);
    }

    #[test]
    fn branch_skipped_binding_fails_at_runtime() {
        let out = run("func main() { if (false) { var x = 1; } print x; }");
        match out.status {
            Status::RuntimeError(e) => assert_eq!(e.message, "undefined local x"),
            other => panic!("expected runtime error, got {other:?}"),
        }
    }
}
