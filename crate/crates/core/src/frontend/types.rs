//! Types, type schemes and their printed form.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

pub type TyVar = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ty {
    Int,
    Float,
    Bool,
    Unit,
    String,
    Array(Box<Ty>),
    /// Always at least two components.
    Tuple(Vec<Ty>),
    Arrow(Box<Ty>, Box<Ty>),
    Var(TyVar),
}

impl Ty {
    pub fn arrow(a: Ty, b: Ty) -> Ty {
        Ty::Arrow(Box::new(a), Box::new(b))
    }

    pub fn array(t: Ty) -> Ty {
        Ty::Array(Box::new(t))
    }

    /// Free type variables in first-occurrence order.
    pub fn vars(&self) -> Vec<TyVar> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<TyVar>) {
        match self {
            Ty::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Ty::Array(t) => t.collect_vars(out),
            Ty::Tuple(ts) => ts.iter().for_each(|t| t.collect_vars(out)),
            Ty::Arrow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            _ => {}
        }
    }

    pub fn is_arrow(&self) -> bool {
        matches!(self, Ty::Arrow(..))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeScheme {
    pub quantified: BTreeSet<TyVar>,
    pub body: Ty,
}

impl TypeScheme {
    pub fn mono(body: Ty) -> TypeScheme {
        TypeScheme {
            quantified: BTreeSet::new(),
            body,
        }
    }

    /// Variables of the body that are not quantified (weak variables).
    pub fn weak_vars(&self) -> Vec<TyVar> {
        self.body
            .vars()
            .into_iter()
            .filter(|v| !self.quantified.contains(v))
            .collect()
    }
}

/// Renders a type with variables named `'a`, `'b`, ... in order of first
/// occurrence.
pub fn format_type(t: &Ty) -> String {
    TypePrinter::new(&[]).render(t)
}

/// Like [`format_type`], but non-generalized variables print as `'_a`.
pub fn format_scheme(s: &TypeScheme) -> String {
    TypePrinter::new(&s.weak_vars()).render(&s.body)
}

/// Renders several types with one shared variable naming, so `'a` denotes
/// the same variable in every output string.
pub fn format_types(ts: &[&Ty]) -> Vec<String> {
    let mut p = TypePrinter::new(&[]);
    ts.iter().map(|t| p.render(t)).collect()
}

struct TypePrinter {
    names: HashMap<TyVar, String>,
    weak: Vec<TyVar>,
    next: usize,
}

impl TypePrinter {
    fn new(weak: &[TyVar]) -> TypePrinter {
        TypePrinter {
            names: HashMap::new(),
            weak: weak.to_vec(),
            next: 0,
        }
    }

    fn render(&mut self, t: &Ty) -> String {
        let mut out = String::new();
        self.arrow(t, &mut out);
        out
    }

    fn var_name(&mut self, v: TyVar) -> String {
        if let Some(n) = self.names.get(&v) {
            return n.clone();
        }
        let mut i = self.next;
        self.next += 1;
        let mut letters = String::new();
        loop {
            letters.insert(0, (b'a' + (i % 26) as u8) as char);
            if i < 26 {
                break;
            }
            i = i / 26 - 1;
        }
        let name = if self.weak.contains(&v) {
            format!("'_{}", letters)
        } else {
            format!("'{}", letters)
        };
        self.names.insert(v, name.clone());
        name
    }

    fn arrow(&mut self, t: &Ty, out: &mut String) {
        match t {
            Ty::Arrow(a, b) => {
                if a.is_arrow() {
                    out.push('(');
                    self.arrow(a, out);
                    out.push(')');
                } else {
                    self.tuple(a, out);
                }
                out.push_str(" -> ");
                self.arrow(b, out);
            }
            _ => self.tuple(t, out),
        }
    }

    fn tuple(&mut self, t: &Ty, out: &mut String) {
        match t {
            Ty::Tuple(ts) => {
                for (i, c) in ts.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" * ");
                    }
                    if matches!(c, Ty::Arrow(..) | Ty::Tuple(_)) {
                        out.push('(');
                        self.arrow(c, out);
                        out.push(')');
                    } else {
                        self.atom(c, out);
                    }
                }
            }
            _ => self.atom(t, out),
        }
    }

    fn atom(&mut self, t: &Ty, out: &mut String) {
        match t {
            Ty::Int => out.push_str("int"),
            Ty::Float => out.push_str("float"),
            Ty::Bool => out.push_str("bool"),
            Ty::Unit => out.push_str("unit"),
            Ty::String => out.push_str("string"),
            Ty::Var(v) => {
                let n = self.var_name(*v);
                out.push_str(&n);
            }
            Ty::Array(e) => {
                if matches!(**e, Ty::Arrow(..) | Ty::Tuple(_)) {
                    out.push('(');
                    self.arrow(e, out);
                    out.push(')');
                } else {
                    self.atom(e, out);
                }
                out.push_str(" array");
            }
            Ty::Arrow(..) | Ty::Tuple(_) => {
                out.push('(');
                self.arrow(t, out);
                out.push(')');
            }
        }
    }
}

impl std::fmt::Display for Ty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&format_type(self))
    }
}

/// Writes `t` into `out`; used by IR dumps.
pub fn write_type(out: &mut String, t: &Ty) {
    let _ = write!(out, "{}", format_type(t));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrows_are_right_associative() {
        let t = Ty::arrow(Ty::Int, Ty::arrow(Ty::Int, Ty::Int));
        assert_eq!(format_type(&t), "int -> int -> int");
        let t = Ty::arrow(Ty::arrow(Ty::Int, Ty::Int), Ty::Int);
        assert_eq!(format_type(&t), "(int -> int) -> int");
    }

    #[test]
    fn arrays_and_tuples() {
        assert_eq!(format_type(&Ty::array(Ty::Float)), "float array");
        assert_eq!(
            format_type(&Ty::Tuple(vec![Ty::Int, Ty::Bool])),
            "int * bool"
        );
        assert_eq!(
            format_type(&Ty::array(Ty::Tuple(vec![Ty::Int, Ty::Int]))),
            "(int * int) array"
        );
        assert_eq!(
            format_type(&Ty::array(Ty::array(Ty::Int))),
            "int array array"
        );
        assert_eq!(
            format_type(&Ty::Tuple(vec![
                Ty::Int,
                Ty::Tuple(vec![Ty::Int, Ty::Unit])
            ])),
            "int * (int * unit)"
        );
    }

    #[test]
    fn variables_named_by_first_occurrence() {
        let t = Ty::arrow(Ty::Var(7), Ty::arrow(Ty::Var(3), Ty::Var(7)));
        assert_eq!(format_type(&t), "'a -> 'b -> 'a");
    }

    #[test]
    fn weak_variables() {
        let s = TypeScheme {
            quantified: BTreeSet::new(),
            body: Ty::array(Ty::Var(4)),
        };
        assert_eq!(format_scheme(&s), "'_a array");
    }
}
