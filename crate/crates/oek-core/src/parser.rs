//! Recursive-descent parser for OEK.
//!
//! Grammar (whitespace-insensitive tokens, `//` line comments):
//!
//! ```text
//! program   := item*
//! item      := "global" ID "=" INT ";"
//!            | "object" ID "{" ("field" ID "=" INT ";")* method* "}"
//!            | "func" ID "(" idlist? ")" block
//! method    := "method" ID "(" idlist? ")" block
//! block     := "{" stmt* "}"
//! stmt      := "var" ID "=" expr ";"
//!            | lvalue "=" expr ";"
//!            | "if" "(" expr ")" block ("else" block)?
//!            | "while" "(" expr ")" block
//!            | "return" expr? ";"
//!            | "print" expr ";"
//!            | ID "=" "call" ID "(" arglist? ")" ";"
//!            | ID "=" "post" ID "(" arglist? ")" ";"
//!            | ID "=" "req" expr "." ID "(" arglist? ")" ";"
//!            | ID "=" "await" ID ";"
//! lvalue    := ID | "self" "." ID | "@" ID
//! expr      := INT | "true" | "false" | ID | "self" "." ID | "@" ID
//!            | "new" ID "(" ")" | expr BINOP expr | UNOP expr | "(" expr ")"
//! ```
//!
//! Binary operators parse with the usual precedence (`||` < `&&` <
//! `==`/`!=` < `<`/`<=` < `+`/`-` < `*`/`/`), all left-associative;
//! `&&` and `||` short-circuit at evaluation time. Parentheses group and
//! leave no trace in the tree. A request target may be bare `self`
//! (`h = req self.m();`), which parses to a dedicated node.

use std::sync::Arc;

use crate::ast::*;
use crate::error::ParseError;
use crate::lexer::{tokenize, Token, TokenKind};

/// Parse OEK source into a syntax tree.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const EXPR_START: &[&str] = &[
    "an integer",
    "`true`",
    "`false`",
    "an identifier",
    "`self`",
    "`@`",
    "`new`",
    "`(`",
    "`!`",
    "`-`",
];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let tok = self.peek();
        ParseError {
            loc: tok.loc,
            found: tok.kind.describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, kind: TokenKind, describe: &str) -> Result<Token, ParseError> {
        if self.peek_kind() == &kind {
            Ok(self.advance())
        } else {
            Err(self.error(&[describe]))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Loc), ParseError> {
        match self.peek_kind().clone() {
            TokenKind::Ident(name) => {
                let tok = self.advance();
                Ok((name, tok.loc))
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn expect_int(&mut self) -> Result<i64, ParseError> {
        match self.peek_kind().clone() {
            TokenKind::Int(v) => {
                self.advance();
                Ok(v)
            }
            _ => Err(self.error(&["an integer"])),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut program = Program {
            globals: Vec::new(),
            object_types: Vec::new(),
            functions: Vec::new(),
        };
        loop {
            match self.peek_kind() {
                TokenKind::Eof => return Ok(program),
                TokenKind::Global => program.globals.push(self.global_decl()?),
                TokenKind::Object => program.object_types.push(self.object_def()?),
                TokenKind::Func => program.functions.push(self.func_def()?),
                _ => return Err(self.error(&["`global`", "`object`", "`func`"])),
            }
        }
    }

    fn global_decl(&mut self) -> Result<GlobalDecl, ParseError> {
        let kw = self.advance();
        let (name, _) = self.expect_ident("a global name")?;
        self.expect(TokenKind::Assign, "`=`")?;
        let init = self.signed_int()?;
        self.expect(TokenKind::Semi, "`;`")?;
        Ok(GlobalDecl {
            name,
            init,
            loc: kw.loc,
        })
    }

    /// Initializers admit a leading minus so fields and globals can start negative.
    fn signed_int(&mut self) -> Result<i64, ParseError> {
        if self.peek_kind() == &TokenKind::Minus {
            self.advance();
            let v = self.expect_int()?;
            Ok(-v)
        } else {
            self.expect_int()
        }
    }

    fn object_def(&mut self) -> Result<ObjectTypeDef, ParseError> {
        let kw = self.advance();
        let (name, _) = self.expect_ident("an object type name")?;
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut fields = Vec::new();
        while self.peek_kind() == &TokenKind::Field {
            let fkw = self.advance();
            let (fname, _) = self.expect_ident("a field name")?;
            self.expect(TokenKind::Assign, "`=`")?;
            let init = self.signed_int()?;
            self.expect(TokenKind::Semi, "`;`")?;
            fields.push(FieldDecl {
                name: fname,
                init,
                loc: fkw.loc,
            });
        }
        let mut methods = Vec::new();
        while self.peek_kind() == &TokenKind::Method {
            methods.push(self.method_def()?);
        }
        self.expect(TokenKind::RBrace, "`}`")?;
        Ok(ObjectTypeDef {
            name,
            fields,
            methods,
            loc: kw.loc,
        })
    }

    fn method_def(&mut self) -> Result<MethodDef, ParseError> {
        let kw = self.advance();
        let (name, _) = self.expect_ident("a method name")?;
        let params = self.param_list()?;
        let body = self.block()?;
        Ok(MethodDef {
            name,
            params,
            body,
            loc: kw.loc,
        })
    }

    fn func_def(&mut self) -> Result<FuncDef, ParseError> {
        let kw = self.advance();
        let (name, _) = self.expect_ident("a function name")?;
        let params = self.param_list()?;
        let body = self.block()?;
        Ok(FuncDef {
            name,
            params,
            body,
            loc: kw.loc,
        })
    }

    fn param_list(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect(TokenKind::LParen, "`(`")?;
        let mut params = Vec::new();
        if self.peek_kind() != &TokenKind::RParen {
            loop {
                let (name, _) = self.expect_ident("a parameter name")?;
                params.push(name);
                if self.peek_kind() == &TokenKind::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(params)
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while self.peek_kind() != &TokenKind::RBrace {
            if self.peek_kind() == &TokenKind::Eof {
                return Err(self.error(&["`}`", "a statement"]));
            }
            stmts.push(self.stmt()?);
        }
        self.advance();
        Ok(Arc::new(stmts))
    }

    fn stmt(&mut self) -> Result<Spanned<Stmt>, ParseError> {
        let loc = self.peek().loc;
        match self.peek_kind().clone() {
            TokenKind::Var => {
                self.advance();
                let (name, _) = self.expect_ident("a variable name")?;
                self.expect(TokenKind::Assign, "`=`")?;
                let init = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                Ok(Spanned::new(Stmt::VarDecl { name, init }, loc))
            }
            TokenKind::If => {
                self.advance();
                self.expect(TokenKind::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                let then_branch = self.block()?;
                let else_branch = if self.peek_kind() == &TokenKind::Else {
                    self.advance();
                    Some(self.block()?)
                } else {
                    None
                };
                Ok(Spanned::new(
                    Stmt::If {
                        cond,
                        then_branch,
                        else_branch,
                    },
                    loc,
                ))
            }
            TokenKind::While => {
                self.advance();
                self.expect(TokenKind::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                let body = self.block()?;
                Ok(Spanned::new(Stmt::While { cond, body }, loc))
            }
            TokenKind::Return => {
                self.advance();
                let value = if self.peek_kind() == &TokenKind::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(TokenKind::Semi, "`;`")?;
                Ok(Spanned::new(Stmt::Return { value }, loc))
            }
            TokenKind::Print => {
                self.advance();
                let value = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                Ok(Spanned::new(Stmt::Print { value }, loc))
            }
            TokenKind::SelfKw => {
                self.advance();
                self.expect(TokenKind::Dot, "`.`")?;
                let (field, _) = self.expect_ident("a field name")?;
                self.expect(TokenKind::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                Ok(Spanned::new(
                    Stmt::Assign {
                        target: LValue::SelfField(field),
                        value,
                    },
                    loc,
                ))
            }
            TokenKind::At => {
                self.advance();
                let (name, _) = self.expect_ident("a global name")?;
                self.expect(TokenKind::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                Ok(Spanned::new(
                    Stmt::Assign {
                        target: LValue::Global(name),
                        value,
                    },
                    loc,
                ))
            }
            TokenKind::Ident(name) => {
                // `x = ...`: the right-hand side decides between the four
                // scheduling statements and a plain expression assignment.
                self.advance();
                self.expect(TokenKind::Assign, "`=`")?;
                match self.peek_kind().clone() {
                    TokenKind::Call => {
                        self.advance();
                        let (func, _) = self.expect_ident("a function name")?;
                        let args = self.arg_list()?;
                        self.expect(TokenKind::Semi, "`;`")?;
                        Ok(Spanned::new(
                            Stmt::Call {
                                target: name,
                                func,
                                args,
                            },
                            loc,
                        ))
                    }
                    TokenKind::Post => {
                        self.advance();
                        let (func, _) = self.expect_ident("a function name")?;
                        let args = self.arg_list()?;
                        self.expect(TokenKind::Semi, "`;`")?;
                        Ok(Spanned::new(
                            Stmt::Post {
                                target: name,
                                func,
                                args,
                            },
                            loc,
                        ))
                    }
                    TokenKind::Req => {
                        self.advance();
                        let (object, method) = self.req_target()?;
                        let args = self.arg_list()?;
                        self.expect(TokenKind::Semi, "`;`")?;
                        Ok(Spanned::new(
                            Stmt::Req {
                                target: name,
                                object,
                                method,
                                args,
                            },
                            loc,
                        ))
                    }
                    TokenKind::Await => {
                        self.advance();
                        let (handle, _) = self.expect_ident("a handle variable")?;
                        self.expect(TokenKind::Semi, "`;`")?;
                        Ok(Spanned::new(
                            Stmt::Await {
                                target: name,
                                handle,
                            },
                            loc,
                        ))
                    }
                    _ => {
                        let value = self.expr()?;
                        self.expect(TokenKind::Semi, "`;`")?;
                        Ok(Spanned::new(
                            Stmt::Assign {
                                target: LValue::Local(name),
                                value,
                            },
                            loc,
                        ))
                    }
                }
            }
            _ => Err(self.error(&[
                "`var`",
                "`if`",
                "`while`",
                "`return`",
                "`print`",
                "`self`",
                "`@`",
                "an identifier",
            ])),
        }
    }

    /// Target of `req`: an expression followed by `.method`, or bare
    /// `self.method`. `self.m` would otherwise parse as a field read, so
    /// when the field-read parse is immediately followed by `(` it is
    /// reinterpreted as a request on self.
    fn req_target(&mut self) -> Result<(Spanned<Expr>, String), ParseError> {
        let start = self.peek().loc;
        if self.peek_kind() == &TokenKind::SelfKw {
            self.advance();
            self.expect(TokenKind::Dot, "`.`")?;
            let (name, _) = self.expect_ident("a method or field name")?;
            if self.peek_kind() == &TokenKind::LParen {
                return Ok((Spanned::new(Expr::SelfRef, start), name));
            }
            // It was a field read after all; continue as a full expression.
            let lhs = Spanned::new(Expr::SelfField(name), start);
            let object = self.binary_rhs(lhs, 0)?;
            self.expect(TokenKind::Dot, "`.`")?;
            let (method, _) = self.expect_ident("a method name")?;
            return Ok((object, method));
        }
        let object = self.expr()?;
        self.expect(TokenKind::Dot, "`.`")?;
        let (method, _) = self.expect_ident("a method name")?;
        Ok((object, method))
    }

    fn arg_list(&mut self) -> Result<Vec<Spanned<Expr>>, ParseError> {
        self.expect(TokenKind::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek_kind() != &TokenKind::RParen {
            loop {
                args.push(self.expr()?);
                if self.peek_kind() == &TokenKind::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(args)
    }

    fn expr(&mut self) -> Result<Spanned<Expr>, ParseError> {
        let lhs = self.unary()?;
        self.binary_rhs(lhs, 0)
    }

    /// Precedence climbing over a parsed left-hand side.
    fn binary_rhs(
        &mut self,
        mut lhs: Spanned<Expr>,
        min_prec: u8,
    ) -> Result<Spanned<Expr>, ParseError> {
        loop {
            let op = match self.binop_at(self.peek_kind()) {
                Some(op) if op.precedence() >= min_prec => op,
                _ => return Ok(lhs),
            };
            self.advance();
            let mut rhs = self.unary()?;
            loop {
                match self.binop_at(self.peek_kind()) {
                    Some(next) if next.precedence() > op.precedence() => {
                        rhs = self.binary_rhs(rhs, next.precedence())?;
                    }
                    _ => break,
                }
            }
            let loc = lhs.loc;
            lhs = Spanned::new(
                Expr::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                loc,
            );
        }
    }

    fn binop_at(&self, kind: &TokenKind) -> Option<BinOp> {
        Some(match kind {
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::EqEq => BinOp::Eq,
            TokenKind::NotEq => BinOp::Ne,
            TokenKind::AndAnd => BinOp::And,
            TokenKind::OrOr => BinOp::Or,
            _ => return None,
        })
    }

    fn unary(&mut self) -> Result<Spanned<Expr>, ParseError> {
        let loc = self.peek().loc;
        match self.peek_kind() {
            TokenKind::Not => {
                self.advance();
                let operand = self.unary()?;
                Ok(Spanned::new(
                    Expr::Unary {
                        op: UnOp::Not,
                        operand: Box::new(operand),
                    },
                    loc,
                ))
            }
            TokenKind::Minus => {
                self.advance();
                let operand = self.unary()?;
                Ok(Spanned::new(
                    Expr::Unary {
                        op: UnOp::Neg,
                        operand: Box::new(operand),
                    },
                    loc,
                ))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Spanned<Expr>, ParseError> {
        let loc = self.peek().loc;
        match self.peek_kind().clone() {
            TokenKind::Int(v) => {
                self.advance();
                Ok(Spanned::new(Expr::Int(v), loc))
            }
            TokenKind::True => {
                self.advance();
                Ok(Spanned::new(Expr::Bool(true), loc))
            }
            TokenKind::False => {
                self.advance();
                Ok(Spanned::new(Expr::Bool(false), loc))
            }
            TokenKind::Ident(name) => {
                self.advance();
                Ok(Spanned::new(Expr::Local(name), loc))
            }
            TokenKind::SelfKw => {
                self.advance();
                self.expect(TokenKind::Dot, "`.`")?;
                let (field, _) = self.expect_ident("a field name")?;
                Ok(Spanned::new(Expr::SelfField(field), loc))
            }
            TokenKind::At => {
                self.advance();
                let (name, _) = self.expect_ident("a global name")?;
                Ok(Spanned::new(Expr::Global(name), loc))
            }
            TokenKind::New => {
                self.advance();
                let (type_name, _) = self.expect_ident("an object type name")?;
                self.expect(TokenKind::LParen, "`(`")?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(Spanned::new(Expr::New(type_name), loc))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                // Grouping only; the parenthesis leaves no node behind.
                Ok(inner)
            }
            _ => Err(self.error(EXPR_START)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("func main() { print 42; }").unwrap();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.functions[0].name, "main");
        assert_eq!(p.functions[0].body.len(), 1);
        match &p.functions[0].body[0].node {
            Stmt::Print { value } => assert_eq!(value.node, Expr::Int(42)),
            other => panic!("expected print, got {other:?}"),
        }
    }

    #[test]
    fn missing_expression_reports_position_and_expected_set() {
        let err = parse("func main() { var x = ; }").unwrap_err();
        assert_eq!(err.loc, Loc::new(1, 23));
        assert_eq!(err.found, "`;`");
        assert!(err.expected.contains(&"an integer".to_string()));
        assert!(err.expected.contains(&"`(`".to_string()));
    }

    #[test]
    fn precedence_builds_the_usual_tree() {
        let p = parse("func main() { var x = 1 + 2 * 3; }").unwrap();
        let Stmt::VarDecl { init, .. } = &p.functions[0].body[0].node else {
            panic!()
        };
        let Expr::Binary { op, lhs, rhs } = &init.node else {
            panic!()
        };
        assert_eq!(*op, BinOp::Add);
        assert_eq!(lhs.node, Expr::Int(1));
        assert!(matches!(
            rhs.node,
            Expr::Binary {
                op: BinOp::Mul,
                ..
            }
        ));
    }

    #[test]
    fn left_associativity() {
        let p = parse("func main() { var x = 1 - 2 - 3; }").unwrap();
        let Stmt::VarDecl { init, .. } = &p.functions[0].body[0].node else {
            panic!()
        };
        let Expr::Binary { op, lhs, .. } = &init.node else {
            panic!()
        };
        assert_eq!(*op, BinOp::Sub);
        assert!(matches!(
            lhs.node,
            Expr::Binary {
                op: BinOp::Sub,
                ..
            }
        ));
    }

    #[test]
    fn request_on_self_parses() {
        let p = parse("object T { method m() { h = req self.n(); } } func main() { }").unwrap();
        let m = &p.object_types[0].methods[0];
        match &m.body[0].node {
            Stmt::Req { object, method, .. } => {
                assert_eq!(object.node, Expr::SelfRef);
                assert_eq!(method, "n");
            }
            other => panic!("expected req, got {other:?}"),
        }
    }

    #[test]
    fn request_on_expression_parses() {
        let p = parse("func main() { h = req o.m(1, 2); }").unwrap();
        match &p.functions[0].body[0].node {
            Stmt::Req {
                object,
                method,
                args,
                ..
            } => {
                assert_eq!(object.node, Expr::Local("o".to_string()));
                assert_eq!(method, "m");
                assert_eq!(args.len(), 2);
            }
            other => panic!("expected req, got {other:?}"),
        }
    }

    #[test]
    fn object_items_and_negative_initializers() {
        let p = parse("object A { field x = -3; method m(a, b) { return a; } }func main() { }")
            .unwrap();
        assert_eq!(p.object_types[0].fields[0].init, -3);
        assert_eq!(p.object_types[0].methods[0].params.len(), 2);
    }

    #[test]
    fn scheduling_statements_parse() {
        let p = parse("func f() { } func main() { h = post f(); x = await h; y = call f(); }")
            .unwrap();
        let body = &p.functions[1].body;
        assert!(matches!(body[0].node, Stmt::Post { .. }));
        assert!(matches!(body[1].node, Stmt::Await { .. }));
        assert!(matches!(body[2].node, Stmt::Call { .. }));
    }

    #[test]
    fn unterminated_block_is_an_error() {
        assert!(parse("func main() { print 1;").is_err());
    }

    #[test]
    fn else_block_is_preserved_even_when_empty() {
        let p = parse("func main() { if (true) { } else { } }").unwrap();
        match &p.functions[0].body[0].node {
            Stmt::If { else_branch, .. } => {
                assert!(else_branch.as_ref().is_some_and(|b| b.is_empty()))
            }
            other => panic!("expected if, got {other:?}"),
        }
    }
}
