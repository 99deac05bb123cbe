//! Fully parenthesized source rendering of syntax trees. The output parses
//! back to a tree of the same shape.

use std::fmt::Write;

use super::ast::{Ast, Expr, ExprKind, Pattern, UnOp};

pub fn print_phrase(ast: &Ast) -> String {
    match ast {
        Ast::Def { rec, pat, expr, .. } => {
            let mut out = String::from("let ");
            if *rec {
                out.push_str("rec ");
            }
            pattern(pat, &mut out);
            out.push_str(" = ");
            expr_into(expr, &mut out);
            out.push_str(";;");
            out
        }
        Ast::Expr(e) => format!("{};;", print_expr(e)),
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr_into(e, &mut out);
    out
}

fn pattern(p: &Pattern, out: &mut String) {
    match p {
        Pattern::Var(n, _) => out.push_str(n),
        Pattern::Wildcard(_) => out.push('_'),
        Pattern::Unit(_) => out.push_str("()"),
        Pattern::Tuple(ps, _) => {
            out.push('(');
            for (i, p) in ps.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                pattern(p, out);
            }
            out.push(')');
        }
    }
}

fn float_literal(f: f64) -> String {
    let s = format!("{:?}", f);
    if s.contains(['.', 'e']) {
        s
    } else {
        format!("{}.", s)
    }
}

fn string_literal(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\u{8}' => out.push_str("\\b"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn paren(e: &Expr, out: &mut String) {
    out.push('(');
    expr_into(e, out);
    out.push(')');
}

fn expr_into(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Int(n) if *n < 0 => {
            let _ = write!(out, "(-{})", (*n as i128).unsigned_abs());
        }
        ExprKind::Int(n) => {
            let _ = write!(out, "{}", n);
        }
        ExprKind::Float(f) if f.is_sign_negative() => {
            let _ = write!(out, "(-{})", float_literal(-f));
        }
        ExprKind::Float(f) => out.push_str(&float_literal(*f)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Unit => out.push_str("()"),
        ExprKind::Str(s) => string_literal(s, out),
        ExprKind::Var(n) => out.push_str(n),
        ExprKind::Tuple(items) => {
            out.push('(');
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                paren(it, out);
            }
            out.push(')');
        }
        ExprKind::Array(items) => {
            out.push_str("[|");
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                paren(it, out);
            }
            out.push_str("|]");
        }
        ExprKind::Fun(params, body) => {
            out.push_str("(fun");
            for p in params {
                out.push(' ');
                pattern(p, out);
            }
            out.push_str(" -> ");
            expr_into(body, out);
            out.push(')');
        }
        ExprKind::App(f, args) => {
            out.push('(');
            paren(f, out);
            for a in args {
                out.push(' ');
                paren(a, out);
            }
            out.push(')');
        }
        ExprKind::Let {
            rec,
            pat,
            bound,
            body,
        } => {
            out.push_str(if *rec { "(let rec " } else { "(let " });
            pattern(pat, out);
            out.push_str(" = ");
            expr_into(bound, out);
            out.push_str(" in ");
            expr_into(body, out);
            out.push(')');
        }
        ExprKind::If(c, t, el) => {
            out.push_str("(if ");
            expr_into(c, out);
            out.push_str(" then ");
            paren(t, out);
            if let Some(el) = el {
                out.push_str(" else ");
                paren(el, out);
            }
            out.push(')');
        }
        ExprKind::While(c, b) => {
            out.push_str("(while ");
            expr_into(c, out);
            out.push_str(" do ");
            expr_into(b, out);
            out.push_str(" done)");
        }
        ExprKind::For { var, lo, hi, body } => {
            let _ = write!(out, "(for {} = ", var);
            expr_into(lo, out);
            out.push_str(" to ");
            expr_into(hi, out);
            out.push_str(" do ");
            expr_into(body, out);
            out.push_str(" done)");
        }
        ExprKind::Seq(a, b) => {
            out.push('(');
            paren(a, out);
            out.push_str("; ");
            paren(b, out);
            out.push(')');
        }
        ExprKind::BinOp(op, a, b) => {
            out.push('(');
            paren(a, out);
            let _ = write!(out, " {} ", op.symbol());
            paren(b, out);
            out.push(')');
        }
        ExprKind::UnOp(op, a) => {
            out.push_str(match op {
                UnOp::Neg => "(-",
                UnOp::FNeg => "(-.",
            });
            paren(a, out);
            out.push(')');
        }
        ExprKind::Index(a, i) => {
            out.push('(');
            paren(a, out);
            out.push_str(".(");
            expr_into(i, out);
            out.push_str("))");
        }
        ExprKind::Assign(a, i, v) => {
            out.push('(');
            paren(a, out);
            out.push_str(".(");
            expr_into(i, out);
            out.push_str(") <- ");
            paren(v, out);
            out.push(')');
        }
    }
}
