//! Syntax tree for the OEK kernel language.
//!
//! The tree is immutable after construction; executors share it through
//! `Arc` blocks. `Spanned` carries source locations but compares and
//! hashes by node only, so structural equality is location-independent.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl Loc {
    pub fn new(line: u32, col: u32) -> Self {
        Loc { line, col }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A node plus the location it was parsed at. Equality ignores the
/// location so reformatted programs compare structurally equal.
#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub node: T,
    pub loc: Loc,
}

impl<T> Spanned<T> {
    pub fn new(node: T, loc: Loc) -> Self {
        Spanned { node, loc }
    }
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<T: Eq> Eq for Spanned<T> {}

/// Statement list shared between the tree and suspended interpreter state.
pub type Block = Arc<Vec<Spanned<Stmt>>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub globals: Vec<GlobalDecl>,
    pub object_types: Vec<ObjectTypeDef>,
    pub functions: Vec<FuncDef>,
}

#[derive(Debug, Clone)]
pub struct GlobalDecl {
    pub name: String,
    pub init: i64,
    pub loc: Loc,
}

impl PartialEq for GlobalDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.init == other.init
    }
}

impl Eq for GlobalDecl {}

#[derive(Debug, Clone)]
pub struct ObjectTypeDef {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDef>,
    pub loc: Loc,
}

impl PartialEq for ObjectTypeDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.fields == other.fields && self.methods == other.methods
    }
}

impl Eq for ObjectTypeDef {}

#[derive(Debug, Clone)]
pub struct FieldDecl {
    pub name: String,
    pub init: i64,
    pub loc: Loc,
}

impl PartialEq for FieldDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.init == other.init
    }
}

impl Eq for FieldDecl {}

#[derive(Debug, Clone)]
pub struct FuncDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
    pub loc: Loc,
}

impl PartialEq for FuncDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.params == other.params && self.body == other.body
    }
}

impl Eq for FuncDef {}

#[derive(Debug, Clone)]
pub struct MethodDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
    pub loc: Loc,
}

impl PartialEq for MethodDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.params == other.params && self.body == other.body
    }
}

impl Eq for MethodDef {}

/// Assignment target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Local(String),
    SelfField(String),
    Global(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    /// `var x = e;`
    VarDecl { name: String, init: Spanned<Expr> },
    /// `x = e;`, `self.f = e;`, `@g = e;`
    Assign { target: LValue, value: Spanned<Expr> },
    /// `if (c) { .. } else { .. }` — the else block is kept even when empty.
    If {
        cond: Spanned<Expr>,
        then_branch: Block,
        else_branch: Option<Block>,
    },
    /// `while (c) { .. }`
    While { cond: Spanned<Expr>, body: Block },
    /// `return;` or `return e;`
    Return { value: Option<Spanned<Expr>> },
    /// `print e;`
    Print { value: Spanned<Expr> },
    /// `x = call f(a, b);` — synchronous function call.
    Call {
        target: String,
        func: String,
        args: Vec<Spanned<Expr>>,
    },
    /// `x = post f(a, b);` — asynchronous function activation, x gets a handle.
    Post {
        target: String,
        func: String,
        args: Vec<Spanned<Expr>>,
    },
    /// `x = req o.m(a, b);` — asynchronous method request, x gets the reply handle.
    Req {
        target: String,
        object: Spanned<Expr>,
        method: String,
        args: Vec<Spanned<Expr>>,
    },
    /// `x = await h;` — resolve a handle held in local h.
    Await { target: String, handle: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength for parsing and minimal-paren printing; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnOp {
    Not,
    Neg,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Local(String),
    SelfField(String),
    Global(String),
    /// Bare `self`; produced only as the target of `req self.m(..)`.
    SelfRef,
    New(String),
    Binary {
        op: BinOp,
        lhs: Box<Spanned<Expr>>,
        rhs: Box<Spanned<Expr>>,
    },
    Unary {
        op: UnOp,
        operand: Box<Spanned<Expr>>,
    },
}
