//! The sequential computational model with abstract calls: a recursive
//! tree-walking interpreter with no reified frame stack. Calls are host
//! recursion; `post` and `req` run their callee to completion on the spot
//! and resolve the handle immediately. Observably identical to the stack
//! machine on every program, which the differential tests pin.

use std::collections::{BTreeMap, HashMap};

use crate::ast::*;
use crate::error::RuntimeErrorInfo;
use crate::outcome::{Outcome, Status};
use crate::store::{init_globals, HandleTable, ObjectHeap};
use crate::validate::ValidatedProgram;
use crate::value::{
    apply_binop, apply_unop, expect_bool, logic_operand, ObjRef, Value,
};

/// Activation depth at which the interpreter gives up; the documented
/// bound for "recursion depth exceeded".
pub const RECURSION_LIMIT: usize = 2_000;

/// Native stack reserved for the interpreter thread; sized so the
/// recursion limit trips long before the host stack runs out, even with
/// unoptimized frames.
const INTERP_STACK_BYTES: usize = 128 * 1024 * 1024;

/// Run a validated program with the recursive interpreter.
///
/// The walk happens on a dedicated thread with a large stack so deep OEK
/// recursion hits the documented limit rather than the host's default.
pub fn run_inline(program: &ValidatedProgram, step_limit: u64) -> Outcome {
    let program = program.clone();
    std::thread::Builder::new()
        .name("oek-inline".to_string())
        .stack_size(INTERP_STACK_BYTES)
        .spawn(move || {
            let mut interp = Interp {
                program,
                globals: BTreeMap::new(),
                objects: ObjectHeap::new(),
                handles: HandleTable::new(),
                prints: Vec::new(),
                steps: 0,
                step_limit,
                depth: 0,
            };
            interp.globals = init_globals(&interp.program);
            interp.run()
        })
        .expect("spawn interpreter thread")
        .join()
        .expect("interpreter thread panicked")
}

/// Why the walk stopped early.
enum Stop {
    Error(RuntimeErrorInfo),
    StepLimit,
}

/// How a statement left its block.
enum Flow {
    Next,
    Return(Value),
}

struct Interp {
    program: ValidatedProgram,
    globals: BTreeMap<String, Value>,
    objects: ObjectHeap,
    handles: HandleTable,
    prints: Vec<Value>,
    steps: u64,
    step_limit: u64,
    depth: usize,
}

struct Env {
    locals: HashMap<String, Value>,
    self_obj: Option<ObjRef>,
}

impl Interp {
    fn run(mut self) -> Outcome {
        let main = self.program.main().clone();
        let status = match self.activate(&main.params, Vec::new(), &main.body, None, main.loc) {
            Ok(_) => Status::Completed,
            Err(Stop::Error(e)) => Status::RuntimeError(e),
            Err(Stop::StepLimit) => Status::StepLimitExceeded,
        };
        Outcome {
            status,
            prints: self.prints,
            globals_final: self.globals,
            objects_final: self.objects.snapshot(),
            steps: self.steps,
        }
    }

    /// Execute one function or method activation to its return value.
    fn activate(
        &mut self,
        params: &[String],
        args: Vec<Value>,
        body: &Block,
        self_obj: Option<ObjRef>,
        loc: Loc,
    ) -> Result<Value, Stop> {
        if self.depth >= RECURSION_LIMIT {
            return Err(Stop::Error(RuntimeErrorInfo::new(
                "recursion depth exceeded".to_string(),
                loc,
            )));
        }
        self.depth += 1;
        let mut env = Env {
            locals: params.iter().cloned().zip(args).collect(),
            self_obj,
        };
        let result = self.exec_block(body, &mut env);
        self.depth -= 1;
        match result? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(Value::Unit),
        }
    }

    fn charge_step(&mut self) -> Result<(), Stop> {
        if self.steps == self.step_limit {
            return Err(Stop::StepLimit);
        }
        self.steps += 1;
        Ok(())
    }

    fn exec_block(&mut self, block: &Block, env: &mut Env) -> Result<Flow, Stop> {
        for stmt in block.iter() {
            match self.exec_stmt(stmt, env)? {
                Flow::Next => {}
                ret @ Flow::Return(_) => return Ok(ret),
            }
        }
        Ok(Flow::Next)
    }

    fn exec_stmt(&mut self, stmt: &Spanned<Stmt>, env: &mut Env) -> Result<Flow, Stop> {
        let loc = stmt.loc;
        match &stmt.node {
            Stmt::VarDecl { name, init } => {
                self.charge_step()?;
                let v = self.eval(init, env)?;
                env.locals.insert(name.clone(), v);
                Ok(Flow::Next)
            }
            Stmt::Assign { target, value } => {
                self.charge_step()?;
                let v = self.eval(value, env)?;
                match target {
                    LValue::Local(name) => {
                        if !env.locals.contains_key(name) {
                            return Err(Stop::Error(RuntimeErrorInfo::new(
                                format!("undefined local {name}"),
                                loc,
                            )));
                        }
                        env.locals.insert(name.clone(), v);
                    }
                    LValue::SelfField(field) => {
                        let obj = self.self_obj(env, loc)?;
                        self.objects.set_field(obj, field, v);
                    }
                    LValue::Global(name) => {
                        self.globals.insert(name.clone(), v);
                    }
                }
                Ok(Flow::Next)
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.charge_step()?;
                let v = self.eval(cond, env)?;
                let b = expect_bool(&v).map_err(|m| Stop::Error(RuntimeErrorInfo::new(m, cond.loc)))?;
                if b {
                    self.exec_block(then_branch, env)
                } else if let Some(els) = else_branch {
                    self.exec_block(els, env)
                } else {
                    Ok(Flow::Next)
                }
            }
            Stmt::While { cond, body } => loop {
                self.charge_step()?;
                let v = self.eval(cond, env)?;
                let b = expect_bool(&v).map_err(|m| Stop::Error(RuntimeErrorInfo::new(m, cond.loc)))?;
                if !b {
                    return Ok(Flow::Next);
                }
                match self.exec_block(body, env)? {
                    Flow::Next => {}
                    ret @ Flow::Return(_) => return Ok(ret),
                }
            },
            Stmt::Return { value } => {
                self.charge_step()?;
                let v = match value {
                    Some(e) => self.eval(e, env)?,
                    None => Value::Unit,
                };
                Ok(Flow::Return(v))
            }
            Stmt::Print { value } => {
                self.charge_step()?;
                let v = self.eval(value, env)?;
                self.prints.push(v);
                Ok(Flow::Next)
            }
            Stmt::Call { target, func, args } => {
                self.charge_step()?;
                let v = self.call_function(func, args, env, loc)?;
                env.locals.insert(target.clone(), v);
                Ok(Flow::Next)
            }
            Stmt::Post { target, func, args } => {
                self.charge_step()?;
                let v = self.call_function(func, args, env, loc)?;
                let h = self.handles.alloc();
                self.handles.resolve(h, v);
                env.locals.insert(target.clone(), Value::Handle(h));
                Ok(Flow::Next)
            }
            Stmt::Req {
                target,
                object,
                method,
                args,
            } => {
                self.charge_step()?;
                let obj = match self.eval(object, env)? {
                    Value::Obj(o) => o,
                    other => {
                        return Err(Stop::Error(RuntimeErrorInfo::new(
                            format!(
                                "type error: req target must be an object, got {}",
                                other.type_name()
                            ),
                            object.loc,
                        )))
                    }
                };
                let argv = self.eval_args(args, env)?;
                let type_name = self.objects.get(obj).type_name.clone();
                let def = self
                    .program
                    .method(&type_name, method)
                    .ok_or_else(|| {
                        Stop::Error(RuntimeErrorInfo::new(
                            format!("no method {method} on {type_name}"),
                            loc,
                        ))
                    })?
                    .clone();
                if def.params.len() != argv.len() {
                    return Err(Stop::Error(RuntimeErrorInfo::new(
                        format!(
                            "method {} on {} expects {} arguments, got {}",
                            method,
                            type_name,
                            def.params.len(),
                            argv.len()
                        ),
                        loc,
                    )));
                }
                let v = self.activate(&def.params, argv, &def.body, Some(obj), loc)?;
                let h = self.handles.alloc();
                self.handles.resolve(h, v);
                env.locals.insert(target.clone(), Value::Handle(h));
                Ok(Flow::Next)
            }
            Stmt::Await { target, handle } => {
                self.charge_step()?;
                let hv = env.locals.get(handle).copied().ok_or_else(|| {
                    Stop::Error(RuntimeErrorInfo::new(
                        format!("undefined local {handle}"),
                        loc,
                    ))
                })?;
                let Value::Handle(h) = hv else {
                    return Err(Stop::Error(RuntimeErrorInfo::new(
                        format!("type error: await expects a handle, got {}", hv.type_name()),
                        loc,
                    )));
                };
                let value = self.handles.get(h).ok_or_else(|| {
                    Stop::Error(RuntimeErrorInfo::new(
                        "await on unresolved handle".to_string(),
                        loc,
                    ))
                })?;
                env.locals.insert(target.clone(), value);
                Ok(Flow::Next)
            }
        }
    }

    fn call_function(
        &mut self,
        func: &str,
        args: &[Spanned<Expr>],
        env: &mut Env,
        loc: Loc,
    ) -> Result<Value, Stop> {
        let argv = self.eval_args(args, env)?;
        let def = self
            .program
            .function(func)
            .ok_or_else(|| {
                Stop::Error(RuntimeErrorInfo::new(
                    format!("undefined function {func}"),
                    loc,
                ))
            })?
            .clone();
        self.activate(&def.params, argv, &def.body, None, loc)
    }

    fn eval_args(&mut self, args: &[Spanned<Expr>], env: &mut Env) -> Result<Vec<Value>, Stop> {
        args.iter().map(|a| self.eval(a, env)).collect()
    }

    fn self_obj(&self, env: &Env, loc: Loc) -> Result<ObjRef, Stop> {
        env.self_obj.ok_or_else(|| {
            Stop::Error(RuntimeErrorInfo::new("self outside method".to_string(), loc))
        })
    }

    fn eval(&mut self, expr: &Spanned<Expr>, env: &mut Env) -> Result<Value, Stop> {
        let loc = expr.loc;
        let rt = |m: String| Stop::Error(RuntimeErrorInfo::new(m, loc));
        match &expr.node {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Local(name) => env
                .locals
                .get(name)
                .copied()
                .ok_or_else(|| rt(format!("undefined local {name}"))),
            Expr::SelfField(field) => {
                let obj = self.self_obj(env, loc)?;
                self.objects.field(obj, field).ok_or_else(|| {
                    let t = self.objects.get(obj).type_name.clone();
                    rt(format!("undefined field {field} on {t}"))
                })
            }
            Expr::SelfRef => self.self_obj(env, loc).map(Value::Obj),
            Expr::Global(name) => self
                .globals
                .get(name)
                .copied()
                .ok_or_else(|| rt(format!("undefined global {name}"))),
            Expr::New(type_name) => {
                let def = self
                    .program
                    .object_type(type_name)
                    .ok_or_else(|| rt(format!("unknown object type {type_name}")))?
                    .clone();
                Ok(Value::Obj(self.objects.alloc(&def)))
            }
            Expr::Binary { op, lhs, rhs } if matches!(op, BinOp::And | BinOp::Or) => {
                let lv = self.eval(lhs, env)?;
                let lb = logic_operand(*op, &lv).map_err(rt)?;
                let short = match op {
                    BinOp::And => !lb,
                    BinOp::Or => lb,
                    _ => unreachable!(),
                };
                if short {
                    return Ok(Value::Bool(lb));
                }
                let rv = self.eval(rhs, env)?;
                let rb = logic_operand(*op, &rv)
                    .map_err(|m| Stop::Error(RuntimeErrorInfo::new(m, loc)))?;
                Ok(Value::Bool(rb))
            }
            Expr::Binary { op, lhs, rhs } => {
                let lv = self.eval(lhs, env)?;
                let rv = self.eval(rhs, env)?;
                apply_binop(*op, &lv, &rv)
                    .map_err(|m| Stop::Error(RuntimeErrorInfo::new(m, loc)))
            }
            Expr::Unary { op, operand } => {
                let v = self.eval(operand, env)?;
                apply_unop(*op, &v).map_err(|m| Stop::Error(RuntimeErrorInfo::new(m, loc)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::stack::run_stack;
    use crate::validate::validate;

    fn program(src: &str) -> ValidatedProgram {
        validate(parse(src).unwrap()).unwrap()
    }

    #[test]
    fn factorial_matches_hand_value() {
        let p = program(
            "func fact(n) { if (n < 2) { return 1; } r = call fact(n - 1); return n * r; } \
             func main() { f = call fact(5); print f; }",
        );
        let out = run_inline(&p, 1_000_000);
        assert_eq!(out.status, Status::Completed);
        assert_eq!(out.prints, vec![Value::Int(120)]);
    }

    #[test]
    fn matches_stack_machine_on_a_worked_example() {
        let p = program(
            "global g = 10; \
             object Box { field v = 0; method put(x) { self.v = x + @g; return self.v; } } \
             func main() { \
               var o = new Box(); \
               h = req o.put(5); \
               r = await h; \
               print r; \
               @g = r; \
               var i = 0; \
               while (i < 3) { i = i + 1; } \
               print i; \
             }",
        );
        let a = run_stack(&p, 100_000);
        let b = run_inline(&p, 100_000);
        assert_eq!(a, b);
    }

    #[test]
    fn recursion_depth_is_bounded() {
        let p = program(
            "func down(n) { r = call down(n + 1); return r; } \
             func main() { x = call down(0); }",
        );
        let out = run_inline(&p, u64::MAX);
        match out.status {
            Status::RuntimeError(e) => assert_eq!(e.message, "recursion depth exceeded"),
            other => panic!("expected recursion error, got {other:?}"),
        }
    }

    #[test]
    fn step_limit_matches_stack_machine_cutoff() {
        let p = program("func main() { while (true) { } }");
        let a = run_stack(&p, 500);
        let b = run_inline(&p, 500);
        assert_eq!(a, b);
        assert_eq!(b.steps, 500);
    }
}
