//! Parsing and type inference for MiniML phrases.

pub mod ast;
pub mod infer;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod types;

pub use ast::{Ast, Expr, ExprKind, Pattern};
pub use infer::{
    infer_phrase, Builtin, TExpr, TExprKind, TPattern, TPatternKind, TypeEnv, TypedTree,
};
pub use parser::{parse_expr, parse_phrase};
pub use types::{format_scheme, format_type, Ty, TypeScheme};

/// Byte range `[start, end)` within a phrase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn merge(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "characters {}-{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{span}: Syntax error: {message}")]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
    /// The phrase ended before it was complete; a REPL should read more lines.
    pub incomplete: bool,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            span,
            message: message.into(),
            incomplete: false,
        }
    }

    pub fn incomplete(span: Span, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            span,
            message: message.into(),
            incomplete: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeErrorKind {
    Mismatch { found: String, expected: String },
    Occurs { found: String, expected: String },
    Unbound(String),
    NotAFunction(String),
    Other(String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {}", describe(kind))]
pub struct TypeError {
    pub span: Span,
    pub kind: TypeErrorKind,
}

fn describe(kind: &TypeErrorKind) -> String {
    match kind {
        TypeErrorKind::Mismatch { found, expected } => format!(
            "Error: This expression has type {} but an expression was expected of type {}",
            found, expected
        ),
        TypeErrorKind::Occurs { found, expected } => format!(
            "Error: This expression has type {} but an expression was expected of type {} \
             (the type variable occurs inside {})",
            found, expected, expected
        ),
        TypeErrorKind::Unbound(n) => format!("Error: Unbound value {}", n),
        TypeErrorKind::NotAFunction(t) => {
            format!(
                "Error: This expression has type {}; it is not a function and cannot be applied",
                t
            )
        }
        TypeErrorKind::Other(m) => format!("Error: {}", m),
    }
}

/// Either failure of the frontend.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FrontendError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Type(#[from] TypeError),
}
