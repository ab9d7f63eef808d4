//! Name resolution and arity checking.
//!
//! Validation is total: it either returns an immutable `ValidatedProgram`
//! or every problem it found, never just the first. Scoping follows the
//! runtime model: locals are activation-scoped, a binding is visible from
//! its statement onward in pre-order (a binding inside a branch stays
//! visible after it; if the branch is skipped at runtime the read fails
//! with a runtime error, not a validation error). The targets of
//! `call`/`post`/`req`/`await` statements bind like `var`. Methods of a
//! request target are looked up at runtime; everything else is static.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use crate::ast::*;
use crate::error::SemanticError;

/// An immutable, fully resolved program, cheap to clone and safe to share
/// across concurrent executors.
#[derive(Debug, Clone)]
pub struct ValidatedProgram {
    inner: Arc<ProgramIndex>,
}

#[derive(Debug)]
pub struct ProgramIndex {
    pub program: Program,
    /// Function name → index into `program.functions`.
    pub functions: BTreeMap<String, usize>,
    /// Object type name → index into `program.object_types`.
    pub object_types: BTreeMap<String, usize>,
    /// Global name → initial value, in declaration order.
    pub globals: BTreeMap<String, i64>,
}

impl ValidatedProgram {
    pub fn program(&self) -> &Program {
        &self.inner.program
    }

    pub fn function(&self, name: &str) -> Option<&FuncDef> {
        self.inner
            .functions
            .get(name)
            .map(|&i| &self.inner.program.functions[i])
    }

    pub fn object_type(&self, name: &str) -> Option<&ObjectTypeDef> {
        self.inner
            .object_types
            .get(name)
            .map(|&i| &self.inner.program.object_types[i])
    }

    pub fn method(&self, type_name: &str, method: &str) -> Option<&MethodDef> {
        self.object_type(type_name)
            .and_then(|ot| ot.methods.iter().find(|m| m.name == method))
    }

    pub fn globals(&self) -> &BTreeMap<String, i64> {
        &self.inner.globals
    }

    pub fn main(&self) -> &FuncDef {
        self.function("main").expect("validated program has main")
    }
}

/// Check a parsed program; returns all semantic errors if any exist.
pub fn validate(program: Program) -> Result<ValidatedProgram, Vec<SemanticError>> {
    let mut errors = Vec::new();
    let mut checker = Checker {
        program: &program,
        errors: &mut errors,
    };
    checker.run();
    if errors.is_empty() {
        let functions = program
            .functions
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect();
        let object_types = program
            .object_types
            .iter()
            .enumerate()
            .map(|(i, o)| (o.name.clone(), i))
            .collect();
        let globals = program
            .globals
            .iter()
            .map(|g| (g.name.clone(), g.init))
            .collect();
        Ok(ValidatedProgram {
            inner: Arc::new(ProgramIndex {
                program,
                functions,
                object_types,
                globals,
            }),
        })
    } else {
        Err(errors)
    }
}

struct Checker<'a> {
    program: &'a Program,
    errors: &'a mut Vec<SemanticError>,
}

/// Fields of the enclosing object type, when inside a method.
struct BodyCtx<'a> {
    self_type: Option<&'a ObjectTypeDef>,
}

impl<'a> Checker<'a> {
    fn err(&mut self, loc: Loc, message: String) {
        self.errors.push(SemanticError { loc, message });
    }

    fn run(&mut self) {
        self.check_top_level_names();
        self.check_entry();

        for ot in &self.program.object_types {
            self.check_object_type(ot);
        }
        for f in &self.program.functions {
            self.check_params(&f.params, f.loc);
            let mut bound: HashSet<String> = f.params.iter().cloned().collect();
            self.check_block(&f.body, &mut bound, &BodyCtx { self_type: None });
        }
    }

    fn check_top_level_names(&mut self) {
        let mut seen: HashSet<&str> = HashSet::new();
        let names = self
            .program
            .globals
            .iter()
            .map(|g| (g.name.as_str(), g.loc))
            .chain(
                self.program
                    .object_types
                    .iter()
                    .map(|o| (o.name.as_str(), o.loc)),
            )
            .chain(
                self.program
                    .functions
                    .iter()
                    .map(|f| (f.name.as_str(), f.loc)),
            )
            .collect::<Vec<_>>();
        for (name, loc) in names {
            if !seen.insert(name) {
                self.err(loc, format!("duplicate top-level name {name}"));
            }
        }
    }

    fn check_entry(&mut self) {
        match self.program.functions.iter().find(|f| f.name == "main") {
            None => self.err(Loc::new(1, 1), "missing entry function main".to_string()),
            Some(f) if !f.params.is_empty() => {
                self.err(f.loc, "main must take zero parameters".to_string())
            }
            Some(_) => {}
        }
    }

    fn check_object_type(&mut self, ot: &'a ObjectTypeDef) {
        let mut member_names: HashSet<&str> = HashSet::new();
        for f in &ot.fields {
            if !member_names.insert(&f.name) {
                self.err(
                    f.loc,
                    format!("duplicate member {} in object {}", f.name, ot.name),
                );
            }
        }
        for m in &ot.methods {
            if !member_names.insert(&m.name) {
                self.err(
                    m.loc,
                    format!("duplicate member {} in object {}", m.name, ot.name),
                );
            }
        }
        for m in &ot.methods {
            self.check_params(&m.params, m.loc);
            let mut bound: HashSet<String> = m.params.iter().cloned().collect();
            self.check_block(
                &m.body,
                &mut bound,
                &BodyCtx {
                    self_type: Some(ot),
                },
            );
        }
    }

    fn check_params(&mut self, params: &[String], loc: Loc) {
        let mut seen = HashSet::new();
        for p in params {
            if !seen.insert(p.as_str()) {
                self.err(loc, format!("duplicate parameter {p}"));
            }
        }
    }

    fn check_block(&mut self, block: &Block, bound: &mut HashSet<String>, ctx: &BodyCtx<'a>) {
        for stmt in block.iter() {
            self.check_stmt(stmt, bound, ctx);
        }
    }

    fn check_stmt(&mut self, stmt: &Spanned<Stmt>, bound: &mut HashSet<String>, ctx: &BodyCtx<'a>) {
        let loc = stmt.loc;
        match &stmt.node {
            Stmt::VarDecl { name, init } => {
                self.check_expr(init, bound, ctx);
                bound.insert(name.clone());
            }
            Stmt::Assign { target, value } => {
                self.check_expr(value, bound, ctx);
                match target {
                    LValue::Local(name) => {
                        if !bound.contains(name) {
                            self.err(loc, format!("undefined local {name}"));
                        }
                    }
                    LValue::SelfField(field) => self.check_self_field(field, loc, ctx),
                    LValue::Global(name) => self.check_global(name, loc),
                }
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.check_expr(cond, bound, ctx);
                self.check_block(then_branch, bound, ctx);
                if let Some(els) = else_branch {
                    self.check_block(els, bound, ctx);
                }
            }
            Stmt::While { cond, body } => {
                self.check_expr(cond, bound, ctx);
                self.check_block(body, bound, ctx);
            }
            Stmt::Return { value } => {
                if let Some(v) = value {
                    self.check_expr(v, bound, ctx);
                }
            }
            Stmt::Print { value } => self.check_expr(value, bound, ctx),
            Stmt::Call { target, func, args } | Stmt::Post { target, func, args } => {
                for a in args {
                    self.check_expr(a, bound, ctx);
                }
                match self.program.functions.iter().find(|f| &f.name == func) {
                    None => self.err(loc, format!("undefined function {func}")),
                    Some(f) if f.params.len() != args.len() => self.err(
                        loc,
                        format!(
                            "function {} expects {} arguments, got {}",
                            func,
                            f.params.len(),
                            args.len()
                        ),
                    ),
                    Some(_) => {}
                }
                bound.insert(target.clone());
            }
            Stmt::Req {
                target,
                object,
                args,
                ..
            } => {
                // The method is resolved at runtime against the target's type.
                self.check_expr(object, bound, ctx);
                for a in args {
                    self.check_expr(a, bound, ctx);
                }
                bound.insert(target.clone());
            }
            Stmt::Await { target, handle } => {
                if !bound.contains(handle) {
                    self.err(loc, format!("undefined local {handle}"));
                }
                bound.insert(target.clone());
            }
        }
    }

    fn check_self_field(&mut self, field: &str, loc: Loc, ctx: &BodyCtx<'a>) {
        match ctx.self_type {
            None => self.err(loc, "self outside method".to_string()),
            Some(ot) => {
                if !ot.fields.iter().any(|f| f.name == field) {
                    self.err(loc, format!("undefined field {} on {}", field, ot.name));
                }
            }
        }
    }

    fn check_global(&mut self, name: &str, loc: Loc) {
        if !self.program.globals.iter().any(|g| g.name == name) {
            self.err(loc, format!("undefined global {name}"));
        }
    }

    fn check_expr(&mut self, expr: &Spanned<Expr>, bound: &HashSet<String>, ctx: &BodyCtx<'a>) {
        let loc = expr.loc;
        match &expr.node {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Local(name) => {
                if !bound.contains(name) {
                    self.err(loc, format!("undefined local {name}"));
                }
            }
            Expr::SelfField(field) => self.check_self_field(field, loc, ctx),
            Expr::SelfRef => {
                if ctx.self_type.is_none() {
                    self.err(loc, "self outside method".to_string());
                }
            }
            Expr::Global(name) => self.check_global(name, loc),
            Expr::New(type_name) => {
                if !self
                    .program
                    .object_types
                    .iter()
                    .any(|o| &o.name == type_name)
                {
                    self.err(loc, format!("undefined object type {type_name}"));
                }
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.check_expr(lhs, bound, ctx);
                self.check_expr(rhs, bound, ctx);
            }
            Expr::Unary { operand, .. } => self.check_expr(operand, bound, ctx),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn errors_of(src: &str) -> Vec<String> {
        match validate(parse(src).unwrap()) {
            Ok(_) => Vec::new(),
            Err(errs) => errs.into_iter().map(|e| e.message).collect(),
        }
    }

    #[test]
    fn valid_program_passes() {
        assert!(errors_of("func main() { print 42; }").is_empty());
    }

    #[test]
    fn undefined_function() {
        let errs = errors_of("func main() { x = call f(); }");
        assert_eq!(errs, vec!["undefined function f"]);
    }

    #[test]
    fn undefined_self_field() {
        let errs =
            errors_of("object T { field a = 0; method m() { var v = self.x; } } func main() { }");
        assert_eq!(errs, vec!["undefined field x on T"]);
    }

    #[test]
    fn arity_mismatch() {
        let errs = errors_of("func f(a) { } func main() { x = call f(1, 2); }");
        assert_eq!(errs, vec!["function f expects 1 arguments, got 2"]);
    }

    #[test]
    fn all_errors_reported_not_just_the_first() {
        let errs = errors_of("func main() { x = call f(); y = call g(); print z; }");
        assert_eq!(errs.len(), 3);
    }

    #[test]
    fn self_outside_method() {
        let errs = errors_of("func main() { self.x = 1; }");
        assert_eq!(errs, vec!["self outside method"]);
    }

    #[test]
    fn undefined_global() {
        let errs = errors_of("func main() { print @nope; }");
        assert_eq!(errs, vec!["undefined global nope"]);
    }

    #[test]
    fn main_must_exist_with_zero_params() {
        assert_eq!(errors_of("func f() { }"), vec!["missing entry function main"]);
        assert_eq!(
            errors_of("func main(a) { }"),
            vec!["main must take zero parameters"]
        );
    }

    #[test]
    fn duplicate_names() {
        assert_eq!(
            errors_of("global x = 1; func x() { } func main() { }"),
            vec!["duplicate top-level name x"]
        );
        assert_eq!(
            errors_of("object T { field a = 0; method a() { } } func main() { }"),
            vec!["duplicate member a in object T"]
        );
        assert_eq!(
            errors_of("func f(a, a) { } func main() { }"),
            vec!["duplicate parameter a"]
        );
    }

    #[test]
    fn scheduling_targets_bind_locals() {
        let errs = errors_of(
            "func f() { return 1; } func main() { h = post f(); x = await h; print x; }",
        );
        assert!(errs.is_empty(), "{errs:?}");
    }

    #[test]
    fn await_of_unbound_handle_is_an_error() {
        let errs = errors_of("func main() { x = await h; }");
        assert_eq!(errs, vec!["undefined local h"]);
    }

    #[test]
    fn new_of_unknown_type_is_caught() {
        let errs = errors_of("func main() { var o = new Ghost(); }");
        assert_eq!(errs, vec!["undefined object type Ghost"]);
    }

    #[test]
    fn branch_bindings_stay_visible_after_the_branch() {
        let errs = errors_of(
            "func main() { if (true) { var x = 1; } else { var x = 2; } print x; }",
        );
        assert!(errs.is_empty(), "{errs:?}");
    }
}
