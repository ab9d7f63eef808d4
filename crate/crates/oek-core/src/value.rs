//! Runtime values and the operator semantics shared by every execution
//! model. Typing is dynamic: ill-typed operations surface as runtime
//! errors with fixed message strings so outcomes compare across models.

use std::fmt;

use serde::Serialize;

/// Opaque object identity; dense, in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ObjRef(pub u64);

impl fmt::Display for ObjRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "obj#{}", self.0)
    }
}

/// Reply placeholder id; resolvable exactly once, readable many times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct HandleId(pub u64);

impl fmt::Display for HandleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "handle#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "t", content = "v", rename_all = "lowercase")]
pub enum Value {
    Int(i64),
    Bool(bool),
    Obj(ObjRef),
    Handle(HandleId),
    Unit,
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Obj(_) => "object",
            Value::Handle(_) => "handle",
            Value::Unit => "unit",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Obj(o) => write!(f, "{o}"),
            Value::Handle(h) => write!(f, "{h}"),
            Value::Unit => write!(f, "unit"),
        }
    }
}

use crate::ast::{BinOp, UnOp};

/// Apply a non-short-circuit binary operator. `&&`/`||` reach this only
/// after the left operand failed to short-circuit; evaluation order and
/// short-circuiting live in the interpreters.
pub fn apply_binop(op: BinOp, lhs: &Value, rhs: &Value) -> Result<Value, String> {
    use BinOp::*;
    use Value::*;
    match (op, lhs, rhs) {
        (Add, Int(a), Int(b)) => a
            .checked_add(*b)
            .map(Int)
            .ok_or_else(|| "integer overflow".to_string()),
        (Sub, Int(a), Int(b)) => a
            .checked_sub(*b)
            .map(Int)
            .ok_or_else(|| "integer overflow".to_string()),
        (Mul, Int(a), Int(b)) => a
            .checked_mul(*b)
            .map(Int)
            .ok_or_else(|| "integer overflow".to_string()),
        (Div, Int(_), Int(0)) => Err("division by zero".to_string()),
        (Div, Int(a), Int(b)) => a
            .checked_div(*b)
            .map(Int)
            .ok_or_else(|| "integer overflow".to_string()),
        (Lt, Int(a), Int(b)) => Ok(Bool(a < b)),
        (Le, Int(a), Int(b)) => Ok(Bool(a <= b)),
        (Eq, a, b) if a.type_name() == b.type_name() => Ok(Bool(a == b)),
        (Ne, a, b) if a.type_name() == b.type_name() => Ok(Bool(a != b)),
        (And, Bool(a), Bool(b)) => Ok(Bool(*a && *b)),
        (Or, Bool(a), Bool(b)) => Ok(Bool(*a || *b)),
        (op, a, b) => Err(format!(
            "type error: operator {} on {} and {}",
            op.symbol(),
            a.type_name(),
            b.type_name()
        )),
    }
}

pub fn apply_unop(op: UnOp, operand: &Value) -> Result<Value, String> {
    match (op, operand) {
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnOp::Neg, Value::Int(v)) => v
            .checked_neg()
            .map(Value::Int)
            .ok_or_else(|| "integer overflow".to_string()),
        (op, v) => Err(format!(
            "type error: operator {} on {}",
            op.symbol(),
            v.type_name()
        )),
    }
}

/// Operand check for the short-circuit operators; `&&`/`||` evaluate their
/// left side first and may never touch the right.
pub fn logic_operand(op: BinOp, v: &Value) -> Result<bool, String> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => Err(format!(
            "type error: operator {} on {}",
            op.symbol(),
            other.type_name()
        )),
    }
}

/// The value a condition must produce.
pub fn expect_bool(v: &Value) -> Result<bool, String> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => Err(format!(
            "type error: condition must be bool, got {}",
            other.type_name()
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_comparison() {
        assert_eq!(
            apply_binop(BinOp::Add, &Value::Int(2), &Value::Int(3)),
            Ok(Value::Int(5))
        );
        assert_eq!(
            apply_binop(BinOp::Div, &Value::Int(7), &Value::Int(3)),
            Ok(Value::Int(2))
        );
        assert_eq!(
            apply_binop(BinOp::Lt, &Value::Int(1), &Value::Int(2)),
            Ok(Value::Bool(true))
        );
    }

    #[test]
    fn division_by_zero() {
        assert_eq!(
            apply_binop(BinOp::Div, &Value::Int(1), &Value::Int(0)),
            Err("division by zero".to_string())
        );
    }

    #[test]
    fn overflow_is_an_error_not_a_wrap() {
        assert_eq!(
            apply_binop(BinOp::Add, &Value::Int(i64::MAX), &Value::Int(1)),
            Err("integer overflow".to_string())
        );
        assert_eq!(
            apply_binop(BinOp::Div, &Value::Int(i64::MIN), &Value::Int(-1)),
            Err("integer overflow".to_string())
        );
        assert_eq!(
            apply_unop(UnOp::Neg, &Value::Int(i64::MIN)),
            Err("integer overflow".to_string())
        );
    }

    #[test]
    fn equality_is_same_type_only() {
        assert_eq!(
            apply_binop(BinOp::Eq, &Value::Int(1), &Value::Int(1)),
            Ok(Value::Bool(true))
        );
        assert_eq!(
            apply_binop(
                BinOp::Ne,
                &Value::Obj(ObjRef(0)),
                &Value::Obj(ObjRef(1))
            ),
            Ok(Value::Bool(true))
        );
        assert!(apply_binop(BinOp::Eq, &Value::Int(1), &Value::Bool(true)).is_err());
    }

    #[test]
    fn mismatched_operand_types_error() {
        let err = apply_binop(BinOp::Add, &Value::Int(1), &Value::Bool(true)).unwrap_err();
        assert_eq!(err, "type error: operator + on int and bool");
    }
}
