//! Canonical text form for OEK trees.
//!
//! Layout: two-space indentation, one statement per line, one blank line
//! between top-level items and before each method. Parentheses are
//! emitted only where precedence demands, so `parse(pretty_print(p))`
//! rebuilds exactly `p` and printing is idempotent.

use std::fmt::Write;

use crate::ast::*;

/// Render a program in canonical form.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    let mut first = true;

    for g in &program.globals {
        sep(&mut out, &mut first);
        let _ = writeln!(out, "global {} = {};", g.name, g.init);
    }
    for ot in &program.object_types {
        sep(&mut out, &mut first);
        let _ = writeln!(out, "object {} {{", ot.name);
        for f in &ot.fields {
            let _ = writeln!(out, "  field {} = {};", f.name, f.init);
        }
        for m in &ot.methods {
            out.push('\n');
            let _ = writeln!(out, "  method {}({}) {{", m.name, m.params.join(", "));
            print_block(&mut out, &m.body, 2);
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    for f in &program.functions {
        sep(&mut out, &mut first);
        let _ = writeln!(out, "func {}({}) {{", f.name, f.params.join(", "));
        print_block(&mut out, &f.body, 1);
        out.push_str("}\n");
    }
    out
}

fn sep(out: &mut String, first: &mut bool) {
    if *first {
        *first = false;
    } else {
        out.push('\n');
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_block(out: &mut String, block: &Block, level: usize) {
    for stmt in block.iter() {
        print_stmt(out, &stmt.node, level);
    }
}

fn print_stmt(out: &mut String, stmt: &Stmt, level: usize) {
    indent(out, level);
    match stmt {
        Stmt::VarDecl { name, init } => {
            let _ = writeln!(out, "var {} = {};", name, expr_str(&init.node));
        }
        Stmt::Assign { target, value } => {
            let tgt = match target {
                LValue::Local(n) => n.clone(),
                LValue::SelfField(n) => format!("self.{n}"),
                LValue::Global(n) => format!("@{n}"),
            };
            let _ = writeln!(out, "{} = {};", tgt, expr_str(&value.node));
        }
        Stmt::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let _ = writeln!(out, "if ({}) {{", expr_str(&cond.node));
            print_block(out, then_branch, level + 1);
            indent(out, level);
            match else_branch {
                Some(els) => {
                    out.push_str("} else {\n");
                    print_block(out, els, level + 1);
                    indent(out, level);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        Stmt::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", expr_str(&cond.node));
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::Return { value } => match value {
            Some(v) => {
                let _ = writeln!(out, "return {};", expr_str(&v.node));
            }
            None => out.push_str("return;\n"),
        },
        Stmt::Print { value } => {
            let _ = writeln!(out, "print {};", expr_str(&value.node));
        }
        Stmt::Call { target, func, args } => {
            let _ = writeln!(out, "{} = call {}({});", target, func, args_str(args));
        }
        Stmt::Post { target, func, args } => {
            let _ = writeln!(out, "{} = post {}({});", target, func, args_str(args));
        }
        Stmt::Req {
            target,
            object,
            method,
            args,
        } => {
            let _ = writeln!(
                out,
                "{} = req {}.{}({});",
                target,
                expr_str(&object.node),
                method,
                args_str(args)
            );
        }
        Stmt::Await { target, handle } => {
            let _ = writeln!(out, "{} = await {};", target, handle);
        }
    }
}

fn args_str(args: &[Spanned<Expr>]) -> String {
    args.iter()
        .map(|a| expr_str(&a.node))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Precedence of unary operators; binds tighter than any binary operator.
const UNARY_PREC: u8 = 7;

fn expr_str(expr: &Expr) -> String {
    render(expr, 0)
}

/// Render with minimal parentheses: `min_prec` is the binding strength the
/// context requires of this expression.
fn render(expr: &Expr, min_prec: u8) -> String {
    match expr {
        Expr::Int(v) => v.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Local(n) => n.clone(),
        Expr::SelfField(n) => format!("self.{n}"),
        Expr::Global(n) => format!("@{n}"),
        Expr::SelfRef => "self".to_string(),
        Expr::New(t) => format!("new {t}()"),
        Expr::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            // Left-associative: the right child must bind strictly tighter.
            let text = format!(
                "{} {} {}",
                render(&lhs.node, prec),
                op.symbol(),
                render(&rhs.node, prec + 1)
            );
            if prec < min_prec {
                format!("({text})")
            } else {
                text
            }
        }
        Expr::Unary { op, operand } => {
            let text = format!("{}{}", op.symbol(), render(&operand.node, UNARY_PREC));
            if UNARY_PREC < min_prec {
                format!("({text})")
            } else {
                text
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn canonical_minimal_program() {
        let p = parse("func main(){print 42;}").unwrap();
        assert_eq!(pretty_print(&p), "func main() {\n  print 42;\n}\n");
    }

    #[test]
    fn idempotent_on_a_mixed_program() {
        let src = "global g = 1; object T { field x = 2; method m(a) { self.x = a; } } \
                   func main() { var o = new T(); h = req o.m(@g); v = await h; }";
        let p = parse(src).unwrap();
        let once = pretty_print(&p);
        let twice = pretty_print(&parse(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn minimal_parens_preserve_structure() {
        let cases = [
            "var x = 1 + 2 * 3;",
            "var x = (1 + 2) * 3;",
            "var x = 1 - 2 - 3;",
            "var x = 1 - (2 - 3);",
            "var x = -(1 + 2);",
            "var x = !(a && b) || c;",
            "var x = 1 < 2 == false;",
            "var x = -(-5);",
        ];
        for stmt in cases {
            let src = format!("func main() {{ var a = 0; var b = 0; {stmt} }}");
            let p = parse(&src).unwrap();
            let printed = pretty_print(&p);
            let reparsed = parse(&printed).unwrap();
            assert_eq!(p, reparsed, "round-trip failed for {stmt}\n{printed}");
        }
    }

    #[test]
    fn unary_chain_survives() {
        let p = parse("func main() { var x = --5; var y = !!true; }").unwrap();
        let printed = pretty_print(&p);
        assert_eq!(parse(&printed).unwrap(), p);
    }
}
