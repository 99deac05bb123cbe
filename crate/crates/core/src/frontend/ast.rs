//! Surface syntax tree.

use super::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    FAdd,
    FSub,
    FMul,
    FDiv,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
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
            BinOp::Mod => "mod",
            BinOp::FAdd => "+.",
            BinOp::FSub => "-.",
            BinOp::FMul => "*.",
            BinOp::FDiv => "/.",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    FNeg,
}

#[derive(Clone, Debug)]
pub enum Pattern {
    Var(String, Span),
    Wildcard(Span),
    Unit(Span),
    Tuple(Vec<Pattern>, Span),
}

impl Pattern {
    pub fn span(&self) -> Span {
        match self {
            Pattern::Var(_, s) | Pattern::Wildcard(s) | Pattern::Unit(s) | Pattern::Tuple(_, s) => {
                *s
            }
        }
    }

    /// Variables bound by the pattern, left to right.
    pub fn binders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Pattern, out: &mut Vec<&'a str>) {
            match p {
                Pattern::Var(n, _) => out.push(n),
                Pattern::Tuple(ps, _) => ps.iter().for_each(|p| go(p, out)),
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Bool(bool),
    Unit,
    Str(String),
    Var(String),
    Tuple(Vec<Expr>),
    Array(Vec<Expr>),
    Fun(Vec<Pattern>, Box<Expr>),
    /// Application of a function to one or more arguments, `f a b`.
    App(Box<Expr>, Vec<Expr>),
    Let {
        rec: bool,
        pat: Pattern,
        bound: Box<Expr>,
        body: Box<Expr>,
    },
    If(Box<Expr>, Box<Expr>, Option<Box<Expr>>),
    While(Box<Expr>, Box<Expr>),
    For {
        var: String,
        lo: Box<Expr>,
        hi: Box<Expr>,
        body: Box<Expr>,
    },
    Seq(Box<Expr>, Box<Expr>),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    UnOp(UnOp, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Assign(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }
}

/// The root of a parsed phrase: a definition or an expression.
#[derive(Clone, Debug)]
pub enum Ast {
    Def {
        rec: bool,
        pat: Pattern,
        expr: Expr,
        span: Span,
    },
    Expr(Expr),
}

impl Ast {
    pub fn span(&self) -> Span {
        match self {
            Ast::Def { span, .. } => *span,
            Ast::Expr(e) => e.span,
        }
    }
}

/// Structural equality that ignores spans.
pub trait SameShape {
    fn same_shape(&self, other: &Self) -> bool;
}

impl SameShape for Pattern {
    fn same_shape(&self, other: &Self) -> bool {
        match (self, other) {
            (Pattern::Var(a, _), Pattern::Var(b, _)) => a == b,
            (Pattern::Wildcard(_), Pattern::Wildcard(_)) | (Pattern::Unit(_), Pattern::Unit(_)) => {
                true
            }
            (Pattern::Tuple(a, _), Pattern::Tuple(b, _)) => a.same_shape(b),
            _ => false,
        }
    }
}

impl<T: SameShape> SameShape for Vec<T> {
    fn same_shape(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().zip(other).all(|(a, b)| a.same_shape(b))
    }
}

impl<T: SameShape> SameShape for Box<T> {
    fn same_shape(&self, other: &Self) -> bool {
        (**self).same_shape(other)
    }
}

impl SameShape for Expr {
    fn same_shape(&self, other: &Self) -> bool {
        use ExprKind::*;
        match (&self.kind, &other.kind) {
            (Int(a), Int(b)) => a == b,
            (Float(a), Float(b)) => a.to_bits() == b.to_bits(),
            (Bool(a), Bool(b)) => a == b,
            (Unit, Unit) => true,
            (Str(a), Str(b)) => a == b,
            (Var(a), Var(b)) => a == b,
            (Tuple(a), Tuple(b)) | (Array(a), Array(b)) => a.same_shape(b),
            (Fun(p, a), Fun(q, b)) => p.same_shape(q) && a.same_shape(b),
            (App(f, a), App(g, b)) => f.same_shape(g) && a.same_shape(b),
            (
                Let {
                    rec: r1,
                    pat: p1,
                    bound: b1,
                    body: e1,
                },
                Let {
                    rec: r2,
                    pat: p2,
                    bound: b2,
                    body: e2,
                },
            ) => r1 == r2 && p1.same_shape(p2) && b1.same_shape(b2) && e1.same_shape(e2),
            (If(c1, t1, e1), If(c2, t2, e2)) => {
                c1.same_shape(c2)
                    && t1.same_shape(t2)
                    && match (e1, e2) {
                        (Some(a), Some(b)) => a.same_shape(b),
                        (None, None) => true,
                        _ => false,
                    }
            }
            (While(c1, b1), While(c2, b2)) => c1.same_shape(c2) && b1.same_shape(b2),
            (
                For {
                    var: v1,
                    lo: l1,
                    hi: h1,
                    body: b1,
                },
                For {
                    var: v2,
                    lo: l2,
                    hi: h2,
                    body: b2,
                },
            ) => v1 == v2 && l1.same_shape(l2) && h1.same_shape(h2) && b1.same_shape(b2),
            (Seq(a1, b1), Seq(a2, b2)) => a1.same_shape(a2) && b1.same_shape(b2),
            (BinOp(o1, a1, b1), BinOp(o2, a2, b2)) => {
                o1 == o2 && a1.same_shape(a2) && b1.same_shape(b2)
            }
            (UnOp(o1, a), UnOp(o2, b)) => o1 == o2 && a.same_shape(b),
            (Index(a1, i1), Index(a2, i2)) => a1.same_shape(a2) && i1.same_shape(i2),
            (Assign(a1, i1, v1), Assign(a2, i2, v2)) => {
                a1.same_shape(a2) && i1.same_shape(i2) && v1.same_shape(v2)
            }
            _ => false,
        }
    }
}

impl SameShape for Ast {
    fn same_shape(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Ast::Def {
                    rec: r1,
                    pat: p1,
                    expr: e1,
                    ..
                },
                Ast::Def {
                    rec: r2,
                    pat: p2,
                    expr: e2,
                    ..
                },
            ) => r1 == r2 && p1.same_shape(p2) && e1.same_shape(e2),
            (Ast::Expr(a), Ast::Expr(b)) => a.same_shape(b),
            _ => false,
        }
    }
}
