//! Redundant global-load elimination: a sequentially sound transform that
//! caches repeated reads of a global in a compiler-introduced local.
//!
//! Within one function or method body, along straight-line and loop paths
//! with no intervening write to the global by the same body and no
//! scheduling-point statement (`call`/`post`/`req`/`await`), a repeated
//! read of `@g` is replaced by a local cached at the first read. A loop
//! whose condition reads `@g` and whose body neither writes `@g` nor
//! crosses a scheduling point gets the condition read hoisted in front of
//! the loop. Caches are introduced only where they eliminate at least one
//! later read, so the transform is the identity when no opportunity
//! exists. Sequential semantics are preserved; under concurrent execution
//! a hoisted spin-loop read no longer observes other tasks' writes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use crate::ast::*;
use crate::validate::{validate, ValidatedProgram};

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub program: ValidatedProgram,
    /// Repeated reads replaced by a cached local.
    pub eliminated: usize,
    /// Loop condition reads hoisted in front of their loop.
    pub hoisted: usize,
}

/// Apply redundant-global-load elimination to every function and method body.
pub fn optimize_rle(program: &ValidatedProgram) -> OptimizeResult {
    let src = program.program();
    let mut eliminated: isize = 0;
    let mut hoisted = 0;

    let mut optimized = src.clone();
    for f in &mut optimized.functions {
        let mut pass = BodyPass::new(&f.body);
        f.body = pass.rewrite_block(&f.body);
        eliminated += pass.eliminated;
        hoisted += pass.hoisted;
    }
    for ot in &mut optimized.object_types {
        for m in &mut ot.methods {
            let mut pass = BodyPass::new(&m.body);
            m.body = pass.rewrite_block(&m.body);
            eliminated += pass.eliminated;
            hoisted += pass.hoisted;
        }
    }

    let program = validate(optimized).expect("optimizer output validates");
    OptimizeResult {
        program,
        eliminated: eliminated.max(0) as usize,
        hoisted,
    }
}

/// Per-body rewriting state.
struct BodyPass {
    /// Identifiers already used anywhere in the body; cache names avoid them.
    used_names: HashSet<String>,
    /// Global → cache local currently holding its value.
    cache: BTreeMap<String, String>,
    next_temp: usize,
    /// Signed while the pass runs: insertions pre-subtract the moved first
    /// read before the rewrite counts it.
    eliminated: isize,
    hoisted: usize,
}

/// What a block does to the cache, summarized for loops and branches.
#[derive(Debug, Clone, Default)]
struct BlockEffects {
    writes: BTreeSet<String>,
    has_scheduling_point: bool,
}

impl BodyPass {
    fn new(body: &Block) -> Self {
        let mut used_names = HashSet::new();
        collect_names_block(body, &mut used_names);
        BodyPass {
            used_names,
            cache: BTreeMap::new(),
            next_temp: 0,
            eliminated: 0,
            hoisted: 0,
        }
    }

    fn fresh_temp(&mut self, global: &str) -> String {
        loop {
            let name = format!("__{}_{}", global, self.next_temp);
            self.next_temp += 1;
            if self.used_names.insert(name.clone()) {
                return name;
            }
        }
    }

    /// Rewrite one block: at each statement, first introduce caches for
    /// globals profitably readable from here, then rewrite the statement.
    fn rewrite_block(&mut self, block: &Block) -> Block {
        let mut out = Vec::new();
        let stmts: &[Spanned<Stmt>] = block;
        for (i, stmt) in stmts.iter().enumerate() {
            self.introduce_caches_for(&stmts[i..], &mut out);
            self.rewrite_stmt(stmt, &mut out);
        }
        Arc::new(out)
    }

    /// Rewrite the reads of one expression against the current cache.
    /// The first uncached read of a global becomes a cache candidate only
    /// when a later read can use it, so this pass runs with the set of
    /// globals worth caching precomputed per statement sequence; here we
    /// simply replace reads that already have a cache local.
    fn rewrite_reads(&mut self, expr: &Spanned<Expr>) -> Spanned<Expr> {
        let node = match &expr.node {
            Expr::Global(name) => match self.cache.get(name) {
                Some(temp) => {
                    self.eliminated += 1;
                    Expr::Local(temp.clone())
                }
                None => Expr::Global(name.clone()),
            },
            Expr::Binary { op, lhs, rhs } => Expr::Binary {
                op: *op,
                lhs: Box::new(self.rewrite_reads(lhs)),
                rhs: Box::new(self.rewrite_reads(rhs)),
            },
            Expr::Unary { op, operand } => Expr::Unary {
                op: *op,
                operand: Box::new(self.rewrite_reads(operand)),
            },
            other => other.clone(),
        };
        Spanned::new(node, expr.loc)
    }

    /// Cache every global read at least twice along the upcoming run of
    /// statements before anything invalidates it. `stmts` is the rest of
    /// the current block from the statement about to be rewritten.
    fn introduce_caches_for(&mut self, stmts: &[Spanned<Stmt>], out: &mut Vec<Spanned<Stmt>>) {
        let first = &stmts[0];
        let candidates = reads_of_stmt_head(first);
        for global in candidates {
            if self.cache.contains_key(&global) {
                continue;
            }
            if count_reads_until_invalidated(&global, stmts) >= 2 {
                let temp = self.fresh_temp(&global);
                out.push(Spanned::new(
                    Stmt::VarDecl {
                        name: temp.clone(),
                        init: Spanned::new(Expr::Global(global.clone()), first.loc),
                    },
                    first.loc,
                ));
                // The insertion point read replaces the first read, so it
                // is not an elimination; rewrite_reads will count the rest.
                self.eliminated -= 1;
                self.cache.insert(global, temp);
            }
        }
    }

    fn rewrite_stmt(&mut self, stmt: &Spanned<Stmt>, out: &mut Vec<Spanned<Stmt>>) {
        let loc = stmt.loc;
        match &stmt.node {
            Stmt::VarDecl { name, init } => {
                let init = self.rewrite_reads(init);
                out.push(Spanned::new(
                    Stmt::VarDecl {
                        name: name.clone(),
                        init,
                    },
                    loc,
                ));
                // Rebinding a name that is serving as a cache local would
                // change its meaning; drop such entries (cache locals are
                // fresh, so this only fires on pathological shadowing).
                self.cache.retain(|_, temp| temp != name);
            }
            Stmt::Assign { target, value } => {
                let value = self.rewrite_reads(value);
                if let LValue::Global(g) = target {
                    self.cache.remove(g);
                }
                if let LValue::Local(name) = target {
                    self.cache.retain(|_, temp| temp != name);
                }
                out.push(Spanned::new(
                    Stmt::Assign {
                        target: target.clone(),
                        value,
                    },
                    loc,
                ));
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let cond = self.rewrite_reads(cond);
                // Each branch starts from the current cache; entries
                // created inside a branch do not escape it, and entries
                // invalidated in either branch are gone afterwards.
                let entry_cache = self.cache.clone();
                let then_b = self.rewrite_nested(then_branch, &entry_cache);
                let else_b = else_branch
                    .as_ref()
                    .map(|b| self.rewrite_nested(b, &entry_cache));
                let mut surviving = entry_cache;
                let then_fx = block_effects(then_branch);
                let else_fx = else_branch
                    .as_ref()
                    .map(block_effects)
                    .unwrap_or_default();
                surviving.retain(|g, _| {
                    let killed = then_fx.has_scheduling_point
                        || else_fx.has_scheduling_point
                        || then_fx.writes.contains(g)
                        || else_fx.writes.contains(g);
                    !killed
                });
                self.cache = surviving;
                out.push(Spanned::new(
                    Stmt::If {
                        cond,
                        then_branch: then_b,
                        else_branch: else_b,
                    },
                    loc,
                ));
            }
            Stmt::While { cond, body } => {
                let fx = block_effects(body);
                // Entries invalidated by the body are unusable in the
                // condition and beyond; drop them before rewriting.
                if fx.has_scheduling_point {
                    self.cache.clear();
                } else {
                    self.cache.retain(|g, _| !fx.writes.contains(g));
                }
                // Hoist: condition reads of globals the body leaves alone.
                // The moved first read is not an elimination, so undo the
                // count the condition rewrite below will add for it.
                if !fx.has_scheduling_point {
                    let mut cond_reads = BTreeSet::new();
                    collect_global_reads(cond, &mut cond_reads);
                    for g in cond_reads {
                        if fx.writes.contains(&g) || self.cache.contains_key(&g) {
                            continue;
                        }
                        let temp = self.fresh_temp(&g);
                        out.push(Spanned::new(
                            Stmt::VarDecl {
                                name: temp.clone(),
                                init: Spanned::new(Expr::Global(g.clone()), cond.loc),
                            },
                            cond.loc,
                        ));
                        self.cache.insert(g, temp);
                        self.hoisted += 1;
                        self.eliminated -= 1;
                    }
                }
                let cond = self.rewrite_reads(cond);
                let entry_cache = self.cache.clone();
                let body_b = self.rewrite_nested(body, &entry_cache);
                out.push(Spanned::new(
                    Stmt::While { cond, body: body_b },
                    loc,
                ));
            }
            Stmt::Return { value } => {
                let value = value.as_ref().map(|v| self.rewrite_reads(v));
                out.push(Spanned::new(Stmt::Return { value }, loc));
            }
            Stmt::Print { value } => {
                let value = self.rewrite_reads(value);
                out.push(Spanned::new(Stmt::Print { value }, loc));
            }
            Stmt::Call { target, func, args } => {
                let args = args.iter().map(|a| self.rewrite_reads(a)).collect();
                out.push(Spanned::new(
                    Stmt::Call {
                        target: target.clone(),
                        func: func.clone(),
                        args,
                    },
                    loc,
                ));
                self.invalidate_scheduling_point(target);
            }
            Stmt::Post { target, func, args } => {
                let args = args.iter().map(|a| self.rewrite_reads(a)).collect();
                out.push(Spanned::new(
                    Stmt::Post {
                        target: target.clone(),
                        func: func.clone(),
                        args,
                    },
                    loc,
                ));
                self.invalidate_scheduling_point(target);
            }
            Stmt::Req {
                target,
                object,
                method,
                args,
            } => {
                let object = self.rewrite_reads(object);
                let args = args.iter().map(|a| self.rewrite_reads(a)).collect();
                out.push(Spanned::new(
                    Stmt::Req {
                        target: target.clone(),
                        object,
                        method: method.clone(),
                        args,
                    },
                    loc,
                ));
                self.invalidate_scheduling_point(target);
            }
            Stmt::Await { target, handle } => {
                out.push(Spanned::new(
                    Stmt::Await {
                        target: target.clone(),
                        handle: handle.clone(),
                    },
                    loc,
                ));
                self.invalidate_scheduling_point(target);
            }
        }
    }

    fn invalidate_scheduling_point(&mut self, _bound_name: &str) {
        self.cache.clear();
    }

    /// Rewrite a nested block with a copy of the cache; entries created
    /// inside stay local to it.
    fn rewrite_nested(&mut self, block: &Block, entry_cache: &BTreeMap<String, String>) -> Block {
        let saved = std::mem::replace(&mut self.cache, entry_cache.clone());
        let rewritten = self.rewrite_block(block);
        self.cache = saved;
        rewritten
    }
}

/// Globals read by the head statement itself (its expressions, not nested
/// blocks): these are the cache insertion candidates at this point.
fn reads_of_stmt_head(stmt: &Spanned<Stmt>) -> BTreeSet<String> {
    let mut reads = BTreeSet::new();
    match &stmt.node {
        Stmt::VarDecl { init, .. } => collect_global_reads(init, &mut reads),
        Stmt::Assign { value, .. } => collect_global_reads(value, &mut reads),
        Stmt::Print { value } => collect_global_reads(value, &mut reads),
        Stmt::Return { value } => {
            if let Some(v) = value {
                collect_global_reads(v, &mut reads)
            }
        }
        // If/while condition reads are handled by their own cases; calls
        // and requests invalidate everything anyway, so seeding a cache on
        // their arguments would be immediately thrown away.
        _ => {}
    }
    reads
}

/// Number of reads of `global` from the given statement run before a
/// write to it or a scheduling point stops the straight-line path.
/// Conditionals contribute conservatively: their branches count only if
/// neither branch invalidates.
fn count_reads_until_invalidated(global: &str, stmts: &[Spanned<Stmt>]) -> usize {
    let mut count = 0;
    for stmt in stmts {
        match &stmt.node {
            Stmt::VarDecl { init, .. } => count += reads_in_expr(global, init),
            Stmt::Assign { target, value } => {
                count += reads_in_expr(global, value);
                if matches!(target, LValue::Global(g) if g == global) {
                    return count;
                }
            }
            Stmt::Print { value } => count += reads_in_expr(global, value),
            Stmt::Return { value } => {
                if let Some(v) = value {
                    count += reads_in_expr(global, v);
                }
                return count;
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                count += reads_in_expr(global, cond);
                let then_fx = block_effects(then_branch);
                let else_fx = else_branch.as_ref().map(block_effects).unwrap_or_default();
                let killed = then_fx.has_scheduling_point
                    || else_fx.has_scheduling_point
                    || then_fx.writes.contains(global)
                    || else_fx.writes.contains(global);
                count += count_reads_in_block(global, then_branch);
                if let Some(e) = else_branch {
                    count += count_reads_in_block(global, e);
                }
                if killed {
                    return count;
                }
            }
            Stmt::While { cond, body } => {
                count += reads_in_expr(global, cond);
                let fx = block_effects(body);
                count += count_reads_in_block(global, body);
                if fx.has_scheduling_point || fx.writes.contains(global) {
                    return count;
                }
            }
            Stmt::Call { .. } | Stmt::Post { .. } | Stmt::Req { .. } | Stmt::Await { .. } => {
                // Argument reads happen before the scheduling point.
                match &stmt.node {
                    Stmt::Call { args, .. } | Stmt::Post { args, .. } => {
                        for a in args {
                            count += reads_in_expr(global, a);
                        }
                    }
                    Stmt::Req { object, args, .. } => {
                        count += reads_in_expr(global, object);
                        for a in args {
                            count += reads_in_expr(global, a);
                        }
                    }
                    _ => {}
                }
                return count;
            }
        }
    }
    count
}

fn count_reads_in_block(global: &str, block: &Block) -> usize {
    // Bounded by the same invalidation rules, starting fresh per block.
    count_reads_until_invalidated(global, block)
}

fn reads_in_expr(global: &str, expr: &Spanned<Expr>) -> usize {
    let mut count = 0;
    count_global_reads_inner(expr, global, &mut count);
    count
}

fn count_global_reads_inner(expr: &Spanned<Expr>, global: &str, count: &mut usize) {
    match &expr.node {
        Expr::Global(name) if name == global => *count += 1,
        Expr::Binary { lhs, rhs, .. } => {
            count_global_reads_inner(lhs, global, count);
            count_global_reads_inner(rhs, global, count);
        }
        Expr::Unary { operand, .. } => count_global_reads_inner(operand, global, count),
        _ => {}
    }
}

fn collect_global_reads(expr: &Spanned<Expr>, out: &mut BTreeSet<String>) {
    match &expr.node {
        Expr::Global(name) => {
            out.insert(name.clone());
        }
        Expr::Binary { lhs, rhs, .. } => {
            collect_global_reads(lhs, out);
            collect_global_reads(rhs, out);
        }
        Expr::Unary { operand, .. } => collect_global_reads(operand, out),
        _ => {}
    }
}

fn block_effects(block: &Block) -> BlockEffects {
    let mut fx = BlockEffects::default();
    for stmt in block.iter() {
        match &stmt.node {
            Stmt::Assign { target, .. } => {
                if let LValue::Global(g) = target {
                    fx.writes.insert(g.clone());
                }
            }
            Stmt::Call { .. } | Stmt::Post { .. } | Stmt::Req { .. } | Stmt::Await { .. } => {
                fx.has_scheduling_point = true;
            }
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                let t = block_effects(then_branch);
                fx.writes.extend(t.writes);
                fx.has_scheduling_point |= t.has_scheduling_point;
                if let Some(e) = else_branch {
                    let e = block_effects(e);
                    fx.writes.extend(e.writes);
                    fx.has_scheduling_point |= e.has_scheduling_point;
                }
            }
            Stmt::While { body, .. } => {
                let b = block_effects(body);
                fx.writes.extend(b.writes);
                fx.has_scheduling_point |= b.has_scheduling_point;
            }
            _ => {}
        }
    }
    fx
}

/// Collect every identifier that appears in a block, for fresh-name choice.
fn collect_names_block(block: &Block, out: &mut HashSet<String>) {
    for stmt in block.iter() {
        match &stmt.node {
            Stmt::VarDecl { name, init } => {
                out.insert(name.clone());
                collect_names_expr(init, out);
            }
            Stmt::Assign { target, value } => {
                if let LValue::Local(n) = target {
                    out.insert(n.clone());
                }
                collect_names_expr(value, out);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                collect_names_expr(cond, out);
                collect_names_block(then_branch, out);
                if let Some(e) = else_branch {
                    collect_names_block(e, out);
                }
            }
            Stmt::While { cond, body } => {
                collect_names_expr(cond, out);
                collect_names_block(body, out);
            }
            Stmt::Return { value } => {
                if let Some(v) = value {
                    collect_names_expr(v, out);
                }
            }
            Stmt::Print { value } => collect_names_expr(value, out),
            Stmt::Call { target, args, .. } | Stmt::Post { target, args, .. } => {
                out.insert(target.clone());
                for a in args {
                    collect_names_expr(a, out);
                }
            }
            Stmt::Req {
                target,
                object,
                args,
                ..
            } => {
                out.insert(target.clone());
                collect_names_expr(object, out);
                for a in args {
                    collect_names_expr(a, out);
                }
            }
            Stmt::Await { target, handle } => {
                out.insert(target.clone());
                out.insert(handle.clone());
            }
        }
    }
}

fn collect_names_expr(expr: &Spanned<Expr>, out: &mut HashSet<String>) {
    match &expr.node {
        Expr::Local(n) => {
            out.insert(n.clone());
        }
        Expr::Binary { lhs, rhs, .. } => {
            collect_names_expr(lhs, out);
            collect_names_expr(rhs, out);
        }
        Expr::Unary { operand, .. } => collect_names_expr(operand, out),
        _ => {}
    }
}
