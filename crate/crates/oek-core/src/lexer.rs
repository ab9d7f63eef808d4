//! Tokenizer for OEK source text. Whitespace-insensitive, `//` line comments.

use crate::ast::Loc;
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    // Keywords.
    Global,
    Object,
    Field,
    Method,
    Func,
    Var,
    If,
    Else,
    While,
    Return,
    Print,
    Call,
    Post,
    Req,
    Await,
    New,
    True,
    False,
    SelfKw,
    // Literals and names.
    Ident(String),
    Int(i64),
    // Punctuation.
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Dot,
    At,
    Assign,
    // Operators.
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    Not,
    Eof,
}

impl TokenKind {
    /// Human-readable form used in "expected ..." diagnostics.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Int(v) => format!("integer `{v}`"),
            TokenKind::Eof => "end of input".to_string(),
            other => format!("`{}`", other.lexeme()),
        }
    }

    fn lexeme(&self) -> &'static str {
        match self {
            TokenKind::Global => "global",
            TokenKind::Object => "object",
            TokenKind::Field => "field",
            TokenKind::Method => "method",
            TokenKind::Func => "func",
            TokenKind::Var => "var",
            TokenKind::If => "if",
            TokenKind::Else => "else",
            TokenKind::While => "while",
            TokenKind::Return => "return",
            TokenKind::Print => "print",
            TokenKind::Call => "call",
            TokenKind::Post => "post",
            TokenKind::Req => "req",
            TokenKind::Await => "await",
            TokenKind::New => "new",
            TokenKind::True => "true",
            TokenKind::False => "false",
            TokenKind::SelfKw => "self",
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::Semi => ";",
            TokenKind::Comma => ",",
            TokenKind::Dot => ".",
            TokenKind::At => "@",
            TokenKind::Assign => "=",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Star => "*",
            TokenKind::Slash => "/",
            TokenKind::Lt => "<",
            TokenKind::Le => "<=",
            TokenKind::EqEq => "==",
            TokenKind::NotEq => "!=",
            TokenKind::AndAnd => "&&",
            TokenKind::OrOr => "||",
            TokenKind::Not => "!",
            TokenKind::Ident(_) | TokenKind::Int(_) | TokenKind::Eof => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub loc: Loc,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(c) = c {
                if c == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }

    loop {
        let loc = Loc::new(line, col);
        let c = match chars.peek().copied() {
            None => {
                tokens.push(Token {
                    kind: TokenKind::Eof,
                    loc,
                });
                return Ok(tokens);
            }
            Some(c) => c,
        };

        if c.is_whitespace() {
            bump!();
            continue;
        }

        if c == '/' {
            // Either a comment or division; decide by lookahead on a clone.
            let mut ahead = chars.clone();
            ahead.next();
            if ahead.peek() == Some(&'/') {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    bump!();
                }
                continue;
            }
            bump!();
            tokens.push(Token {
                kind: TokenKind::Slash,
                loc,
            });
            continue;
        }

        if c.is_ascii_digit() {
            let mut text = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_digit() {
                    text.push(n);
                    bump!();
                } else {
                    break;
                }
            }
            let value: i64 = text.parse().map_err(|_| ParseError {
                loc,
                found: format!("integer literal `{text}`"),
                expected: vec!["integer that fits in 64 bits".to_string()],
            })?;
            tokens.push(Token {
                kind: TokenKind::Int(value),
                loc,
            });
            continue;
        }

        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_alphanumeric() || n == '_' {
                    text.push(n);
                    bump!();
                } else {
                    break;
                }
            }
            let kind = match text.as_str() {
                "global" => TokenKind::Global,
                "object" => TokenKind::Object,
                "field" => TokenKind::Field,
                "method" => TokenKind::Method,
                "func" => TokenKind::Func,
                "var" => TokenKind::Var,
                "if" => TokenKind::If,
                "else" => TokenKind::Else,
                "while" => TokenKind::While,
                "return" => TokenKind::Return,
                "print" => TokenKind::Print,
                "call" => TokenKind::Call,
                "post" => TokenKind::Post,
                "req" => TokenKind::Req,
                "await" => TokenKind::Await,
                "new" => TokenKind::New,
                "true" => TokenKind::True,
                "false" => TokenKind::False,
                "self" => TokenKind::SelfKw,
                _ => TokenKind::Ident(text),
            };
            tokens.push(Token { kind, loc });
            continue;
        }

        let kind = match c {
            '{' => {
                bump!();
                TokenKind::LBrace
            }
            '}' => {
                bump!();
                TokenKind::RBrace
            }
            '(' => {
                bump!();
                TokenKind::LParen
            }
            ')' => {
                bump!();
                TokenKind::RParen
            }
            ';' => {
                bump!();
                TokenKind::Semi
            }
            ',' => {
                bump!();
                TokenKind::Comma
            }
            '.' => {
                bump!();
                TokenKind::Dot
            }
            '@' => {
                bump!();
                TokenKind::At
            }
            '+' => {
                bump!();
                TokenKind::Plus
            }
            '-' => {
                bump!();
                TokenKind::Minus
            }
            '*' => {
                bump!();
                TokenKind::Star
            }
            '=' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    TokenKind::EqEq
                } else {
                    TokenKind::Assign
                }
            }
            '<' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    TokenKind::Le
                } else {
                    TokenKind::Lt
                }
            }
            '!' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    TokenKind::NotEq
                } else {
                    TokenKind::Not
                }
            }
            '&' => {
                bump!();
                if chars.peek() == Some(&'&') {
                    bump!();
                    TokenKind::AndAnd
                } else {
                    return Err(ParseError {
                        loc,
                        found: "`&`".to_string(),
                        expected: vec!["`&&`".to_string()],
                    });
                }
            }
            '|' => {
                bump!();
                if chars.peek() == Some(&'|') {
                    bump!();
                    TokenKind::OrOr
                } else {
                    return Err(ParseError {
                        loc,
                        found: "`|`".to_string(),
                        expected: vec!["`||`".to_string()],
                    });
                }
            }
            other => {
                return Err(ParseError {
                    loc,
                    found: format!("`{other}`"),
                    expected: vec!["a token".to_string()],
                });
            }
        };
        tokens.push(Token { kind, loc });
    }
}
