//! Error types shared across parsing, validation, and execution.

use serde::Serialize;
use thiserror::Error;

use crate::ast::Loc;

/// Syntax error with the position and the token set that would have been accepted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {loc}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub loc: Loc,
    pub found: String,
    pub expected: Vec<String>,
}

/// One name-resolution or arity problem; validation returns every one it finds.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("semantic error at {loc}: {message}")]
pub struct SemanticError {
    pub loc: Loc,
    pub message: String,
}

impl SemanticError {
    pub fn new(loc: Loc, message: impl Into<String>) -> Self {
        SemanticError {
            loc,
            message: message.into(),
        }
    }
}

/// Runtime fault: division by zero, overflow, type errors, unknown methods.
/// The message strings are fixed so outcomes compare across execution models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[error("runtime error at {loc}: {message}")]
pub struct RuntimeErrorInfo {
    pub message: String,
    pub loc: Loc,
}

impl RuntimeErrorInfo {
    pub fn new(message: impl Into<String>, loc: Loc) -> Self {
        RuntimeErrorInfo {
            message: message.into(),
            loc,
        }
    }
}
