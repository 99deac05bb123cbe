//! The untyped lambda IR shared by both backends.

pub mod sexp;
mod simplify;
mod translate;

use std::collections::BTreeSet;

pub use simplify::simplify;
pub use translate::translate;

use sexp::Sexp;

pub type VarId = u32;

#[derive(Clone, Debug)]
pub enum Const {
    Int(i64),
    Float(f64),
    Bool(bool),
    Unit,
    String(String),
}

impl PartialEq for Const {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Const::Int(a), Const::Int(b)) => a == b,
            (Const::Float(a), Const::Float(b)) => a.to_bits() == b.to_bits(),
            (Const::Bool(a), Const::Bool(b)) => a == b,
            (Const::Unit, Const::Unit) => true,
            (Const::String(a), Const::String(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }

    pub fn negate(self) -> Cmp {
        match self {
            Cmp::Eq => Cmp::Ne,
            Cmp::Ne => Cmp::Eq,
            Cmp::Lt => Cmp::Ge,
            Cmp::Le => Cmp::Gt,
            Cmp::Gt => Cmp::Le,
            Cmp::Ge => Cmp::Lt,
        }
    }

    /// The comparison with operands exchanged.
    pub fn swap(self) -> Cmp {
        match self {
            Cmp::Lt => Cmp::Gt,
            Cmp::Le => Cmp::Ge,
            Cmp::Gt => Cmp::Lt,
            Cmp::Ge => Cmp::Le,
            c => c,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PrimOp {
    AddInt,
    SubInt,
    MulInt,
    DivInt,
    ModInt,
    NegInt,
    AddFloat,
    SubFloat,
    MulFloat,
    DivFloat,
    NegFloat,
    CmpInt(Cmp),
    Not,
    /// Allocates a tag-0 block from its arguments (tuples, array literals).
    MakeBlock(usize),
    Field(usize),
    ArrayMake,
    ArrayGet,
    ArraySet,
    ArrayLength,
    StringLength,
    PrintInt,
    PrintFloat,
    PrintString,
    PrintNewline,
    FloatOfInt,
    IntOfFloat,
    Sqrt,
    /// Stores the argument into a session global and yields unit.
    SetGlobal(String),
}

impl PrimOp {
    pub fn arity(&self) -> usize {
        match self {
            PrimOp::MakeBlock(n) => *n,
            PrimOp::AddInt
            | PrimOp::SubInt
            | PrimOp::MulInt
            | PrimOp::DivInt
            | PrimOp::ModInt
            | PrimOp::AddFloat
            | PrimOp::SubFloat
            | PrimOp::MulFloat
            | PrimOp::DivFloat
            | PrimOp::CmpInt(_)
            | PrimOp::ArrayMake
            | PrimOp::ArrayGet => 2,
            PrimOp::ArraySet => 3,
            _ => 1,
        }
    }

    /// True when evaluating the primitive can neither trap nor have an
    /// observable effect, so an unused result may be dropped.
    pub fn is_pure(&self) -> bool {
        !matches!(
            self,
            PrimOp::DivInt
                | PrimOp::ModInt
                | PrimOp::ArrayMake
                | PrimOp::ArrayGet
                | PrimOp::ArraySet
                | PrimOp::PrintInt
                | PrimOp::PrintFloat
                | PrimOp::PrintString
                | PrimOp::PrintNewline
                | PrimOp::SetGlobal(_)
        )
    }

    pub fn name(&self) -> String {
        match self {
            PrimOp::AddInt => "+".into(),
            PrimOp::SubInt => "-".into(),
            PrimOp::MulInt => "*".into(),
            PrimOp::DivInt => "/".into(),
            PrimOp::ModInt => "mod".into(),
            PrimOp::NegInt => "~".into(),
            PrimOp::AddFloat => "+.".into(),
            PrimOp::SubFloat => "-.".into(),
            PrimOp::MulFloat => "*.".into(),
            PrimOp::DivFloat => "/.".into(),
            PrimOp::NegFloat => "~.".into(),
            PrimOp::CmpInt(c) => c.name().into(),
            PrimOp::Not => "not".into(),
            PrimOp::MakeBlock(n) => format!("makeblock{}", n),
            PrimOp::Field(n) => format!("field{}", n),
            PrimOp::ArrayMake => "array_make".into(),
            PrimOp::ArrayGet => "array_get".into(),
            PrimOp::ArraySet => "array_set".into(),
            PrimOp::ArrayLength => "array_length".into(),
            PrimOp::StringLength => "string_length".into(),
            PrimOp::PrintInt => "print_int".into(),
            PrimOp::PrintFloat => "print_float".into(),
            PrimOp::PrintString => "print_string".into(),
            PrimOp::PrintNewline => "print_newline".into(),
            PrimOp::FloatOfInt => "float_of_int".into(),
            PrimOp::IntOfFloat => "int_of_float".into(),
            PrimOp::Sqrt => "sqrt".into(),
            PrimOp::SetGlobal(s) => format!("setglobal {}", s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Lambda {
    Var(VarId),
    /// A session global stored under the given symbol.
    Global(String),
    Const(Const),
    Fun(Vec<VarId>, Box<Lambda>),
    Apply(Box<Lambda>, Vec<Lambda>),
    Let(VarId, Box<Lambda>, Box<Lambda>),
    LetRec(Vec<(VarId, Lambda)>, Box<Lambda>),
    Prim(PrimOp, Vec<Lambda>),
    If(Box<Lambda>, Box<Lambda>, Box<Lambda>),
    While(Box<Lambda>, Box<Lambda>),
    /// `For(i, lo, hi, body)`: `lo` is evaluated before `hi`.
    For(VarId, Box<Lambda>, Box<Lambda>, Box<Lambda>),
    Seq(Box<Lambda>, Box<Lambda>),
}

impl Lambda {
    pub fn int(n: i64) -> Lambda {
        Lambda::Const(Const::Int(n))
    }

    pub fn unit() -> Lambda {
        Lambda::Const(Const::Unit)
    }

    pub fn boolean(b: bool) -> Lambda {
        Lambda::Const(Const::Bool(b))
    }

    pub fn seq(a: Lambda, b: Lambda) -> Lambda {
        Lambda::Seq(Box::new(a), Box::new(b))
    }

    pub fn let_(x: VarId, bound: Lambda, body: Lambda) -> Lambda {
        Lambda::Let(x, Box::new(bound), Box::new(body))
    }

    /// Free local variables (globals are not included).
    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        free_vars(self, &mut Vec::new(), &mut out);
        out
    }

    /// All binders introduced anywhere in the term, with repetition.
    pub fn binders(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        self.visit(&mut |l| match l {
            Lambda::Fun(ps, _) => out.extend(ps.iter().copied()),
            Lambda::Let(x, _, _) | Lambda::For(x, _, _, _) => out.push(*x),
            Lambda::LetRec(bs, _) => out.extend(bs.iter().map(|(x, _)| *x)),
            _ => {}
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Lambda)) {
        f(self);
        match self {
            Lambda::Var(_) | Lambda::Global(_) | Lambda::Const(_) => {}
            Lambda::Fun(_, b) => b.visit(f),
            Lambda::Apply(g, args) => {
                g.visit(f);
                args.iter().for_each(|a| a.visit(f));
            }
            Lambda::Let(_, a, b) | Lambda::While(a, b) | Lambda::Seq(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Lambda::LetRec(bs, b) => {
                bs.iter().for_each(|(_, e)| e.visit(f));
                b.visit(f);
            }
            Lambda::Prim(_, args) => args.iter().for_each(|a| a.visit(f)),
            Lambda::If(a, b, c) | Lambda::For(_, a, b, c) => {
                a.visit(f);
                b.visit(f);
                c.visit(f);
            }
        }
    }

    pub fn to_sexp(&self, names: &VarNames) -> Sexp {
        let v = |x: &VarId| Sexp::atom(names.display(*x));
        let s = |l: &Lambda| l.to_sexp(names);
        match self {
            Lambda::Var(x) => v(x),
            Lambda::Global(sym) => Sexp::list("global", [Sexp::atom(sym.clone())]),
            Lambda::Const(c) => Sexp::atom(const_text(c)),
            Lambda::Fun(ps, b) => Sexp::list("fun", [Sexp::List(ps.iter().map(v).collect()), s(b)]),
            Lambda::Apply(f, args) => {
                Sexp::list("apply", std::iter::once(s(f)).chain(args.iter().map(s)))
            }
            Lambda::Let(x, a, b) => Sexp::list("let", [Sexp::List(vec![v(x), s(a)]), s(b)]),
            Lambda::LetRec(bs, b) => Sexp::list(
                "letrec",
                [
                    Sexp::List(
                        bs.iter()
                            .map(|(x, e)| Sexp::List(vec![v(x), s(e)]))
                            .collect(),
                    ),
                    s(b),
                ],
            ),
            Lambda::Prim(op, args) => Sexp::list(&op.name(), args.iter().map(s)),
            Lambda::If(c, t, e) => Sexp::list("if", [s(c), s(t), s(e)]),
            Lambda::While(c, b) => Sexp::list("while", [s(c), s(b)]),
            Lambda::For(x, lo, hi, b) => Sexp::list("for", [v(x), s(lo), s(hi), s(b)]),
            Lambda::Seq(..) => {
                let mut items = Vec::new();
                let mut cur = self;
                while let Lambda::Seq(a, b) = cur {
                    items.push(s(a));
                    cur = b;
                }
                items.push(s(cur));
                Sexp::list("seq", items)
            }
        }
    }
}

fn free_vars(l: &Lambda, bound: &mut Vec<VarId>, out: &mut BTreeSet<VarId>) {
    match l {
        Lambda::Var(x) => {
            if !bound.contains(x) {
                out.insert(*x);
            }
        }
        Lambda::Global(_) | Lambda::Const(_) => {}
        Lambda::Fun(ps, b) => {
            let mark = bound.len();
            bound.extend(ps);
            free_vars(b, bound, out);
            bound.truncate(mark);
        }
        Lambda::Apply(f, args) => {
            free_vars(f, bound, out);
            args.iter().for_each(|a| free_vars(a, bound, out));
        }
        Lambda::Let(x, a, b) => {
            free_vars(a, bound, out);
            bound.push(*x);
            free_vars(b, bound, out);
            bound.pop();
        }
        Lambda::LetRec(bs, b) => {
            let mark = bound.len();
            bound.extend(bs.iter().map(|(x, _)| *x));
            bs.iter().for_each(|(_, e)| free_vars(e, bound, out));
            free_vars(b, bound, out);
            bound.truncate(mark);
        }
        Lambda::Prim(_, args) => args.iter().for_each(|a| free_vars(a, bound, out)),
        Lambda::If(a, b, c) => {
            free_vars(a, bound, out);
            free_vars(b, bound, out);
            free_vars(c, bound, out);
        }
        Lambda::While(a, b) | Lambda::Seq(a, b) => {
            free_vars(a, bound, out);
            free_vars(b, bound, out);
        }
        Lambda::For(x, lo, hi, b) => {
            free_vars(lo, bound, out);
            free_vars(hi, bound, out);
            bound.push(*x);
            free_vars(b, bound, out);
            bound.pop();
        }
    }
}

pub fn const_text(c: &Const) -> String {
    match c {
        Const::Int(n) => n.to_string(),
        Const::Float(f) => format!("{:?}", f),
        Const::Bool(b) => b.to_string(),
        Const::Unit => "()".into(),
        Const::String(s) => format!("{:?}", s),
    }
}

/// Source names of lambda variables, indexed by id. Also the id allocator.
#[derive(Clone, Debug, Default)]
pub struct VarNames {
    names: Vec<String>,
}

impl VarNames {
    pub fn fresh(&mut self, name: &str) -> VarId {
        self.names.push(name.to_string());
        (self.names.len() - 1) as VarId
    }

    pub fn name(&self, x: VarId) -> &str {
        self.names
            .get(x as usize)
            .map(String::as_str)
            .unwrap_or("v")
    }

    pub fn display(&self, x: VarId) -> String {
        format!("{}/{}", self.name(x), x)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A translated phrase: its lambda term and the names of its variables.
#[derive(Clone, Debug)]
pub struct LambdaPhrase {
    pub body: Lambda,
    pub names: VarNames,
}

impl LambdaPhrase {
    /// The `--dump-ir lambda` rendering.
    pub fn dump(&self) -> String {
        self.body.to_sexp(&self.names).render(100)
    }
}
