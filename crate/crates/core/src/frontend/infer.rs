//! Hindley-Milner inference with let-polymorphism.
//!
//! Generalization is level based: every type variable records the binding
//! depth at which it was created, and a `let` generalizes the variables whose
//! level is deeper than the `let` itself. Expansive right-hand sides (anything
//! that is not a syntactic value) are never generalized.

use std::collections::{BTreeSet, HashMap};

use super::ast::{Ast, BinOp, Expr, ExprKind, Pattern, UnOp};
use super::types::{format_type, format_types, Ty, TyVar, TypeScheme};
use super::{Span, TypeError, TypeErrorKind};

/// Functions provided by the runtime rather than defined in MiniML.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    PrintInt,
    PrintFloat,
    PrintString,
    PrintNewline,
    ArrayMake,
    ArrayGet,
    ArraySet,
    ArrayLength,
    StringLength,
    FloatOfInt,
    IntOfFloat,
    Sqrt,
    Not,
}

impl Builtin {
    pub const ALL: [Builtin; 13] = [
        Builtin::PrintInt,
        Builtin::PrintFloat,
        Builtin::PrintString,
        Builtin::PrintNewline,
        Builtin::ArrayMake,
        Builtin::ArrayGet,
        Builtin::ArraySet,
        Builtin::ArrayLength,
        Builtin::StringLength,
        Builtin::FloatOfInt,
        Builtin::IntOfFloat,
        Builtin::Sqrt,
        Builtin::Not,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::PrintInt => "print_int",
            Builtin::PrintFloat => "print_float",
            Builtin::PrintString => "print_string",
            Builtin::PrintNewline => "print_newline",
            Builtin::ArrayMake => "array_make",
            Builtin::ArrayGet => "array_get",
            Builtin::ArraySet => "array_set",
            Builtin::ArrayLength => "array_length",
            Builtin::StringLength => "string_length",
            Builtin::FloatOfInt => "float_of_int",
            Builtin::IntOfFloat => "int_of_float",
            Builtin::Sqrt => "sqrt",
            Builtin::Not => "not",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::ArrayMake | Builtin::ArrayGet => 2,
            Builtin::ArraySet => 3,
            _ => 1,
        }
    }

    fn scheme(self) -> TypeScheme {
        let a = Ty::Var(0);
        let poly = |body: Ty| TypeScheme {
            quantified: BTreeSet::from([0]),
            body,
        };
        let mono = TypeScheme::mono;
        match self {
            Builtin::PrintInt => mono(Ty::arrow(Ty::Int, Ty::Unit)),
            Builtin::PrintFloat => mono(Ty::arrow(Ty::Float, Ty::Unit)),
            Builtin::PrintString => mono(Ty::arrow(Ty::String, Ty::Unit)),
            Builtin::PrintNewline => mono(Ty::arrow(Ty::Unit, Ty::Unit)),
            Builtin::ArrayMake => poly(Ty::arrow(Ty::Int, Ty::arrow(a.clone(), Ty::array(a)))),
            Builtin::ArrayGet => poly(Ty::arrow(Ty::array(a.clone()), Ty::arrow(Ty::Int, a))),
            Builtin::ArraySet => poly(Ty::arrow(
                Ty::array(a.clone()),
                Ty::arrow(Ty::Int, Ty::arrow(a, Ty::Unit)),
            )),
            Builtin::ArrayLength => poly(Ty::arrow(Ty::array(a), Ty::Int)),
            Builtin::StringLength => mono(Ty::arrow(Ty::String, Ty::Int)),
            Builtin::FloatOfInt => mono(Ty::arrow(Ty::Int, Ty::Float)),
            Builtin::IntOfFloat => mono(Ty::arrow(Ty::Float, Ty::Int)),
            Builtin::Sqrt => mono(Ty::arrow(Ty::Float, Ty::Float)),
            Builtin::Not => mono(Ty::arrow(Ty::Bool, Ty::Bool)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Binding {
    /// A value defined by an earlier phrase, stored under `symbol`.
    Global {
        scheme: TypeScheme,
        symbol: String,
    },
    Primitive(Builtin),
}

/// Identifier environment carried from phrase to phrase. Rebinding a name
/// shadows the earlier binding; the earlier global keeps its symbol.
#[derive(Clone, Debug)]
pub struct TypeEnv {
    bindings: HashMap<String, Binding>,
    next_var: TyVar,
}

impl Default for TypeEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl TypeEnv {
    pub fn new() -> TypeEnv {
        let bindings = Builtin::ALL
            .iter()
            .map(|b| (b.name().to_string(), Binding::Primitive(*b)))
            .collect();
        TypeEnv {
            bindings,
            next_var: 100,
        }
    }

    pub fn lookup(&self, name: &str) -> Option<&Binding> {
        self.bindings.get(name)
    }

    /// The scheme of `name`, for builtins and globals alike.
    pub fn scheme_of(&self, name: &str) -> Option<TypeScheme> {
        self.bindings.get(name).map(|b| match b {
            Binding::Global { scheme, .. } => scheme.clone(),
            Binding::Primitive(p) => p.scheme(),
        })
    }

    pub fn globals(&self) -> impl Iterator<Item = (&str, &TypeScheme, &str)> {
        self.bindings.iter().filter_map(|(n, b)| match b {
            Binding::Global { scheme, symbol } => Some((n.as_str(), scheme, symbol.as_str())),
            Binding::Primitive(_) => None,
        })
    }
}

/// Symbol naming scheme for root-level bindings.
pub fn global_symbol(phrase: u32, name: &str) -> String {
    format!("nml_phrase{}_{}", phrase, name)
}

// ---------------------------------------------------------------------------
// Typed tree

#[derive(Clone, Debug)]
pub struct TExpr {
    pub kind: TExprKind,
    pub ty: Ty,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum TExprKind {
    Int(i64),
    Float(f64),
    Bool(bool),
    Unit,
    Str(String),
    Local(String),
    Global {
        name: String,
        symbol: String,
    },
    Prim(Builtin),
    Tuple(Vec<TExpr>),
    Array(Vec<TExpr>),
    Fun(Vec<TPattern>, Box<TExpr>),
    App(Box<TExpr>, Vec<TExpr>),
    Let {
        rec: bool,
        pat: TPattern,
        bound: Box<TExpr>,
        body: Box<TExpr>,
    },
    If(Box<TExpr>, Box<TExpr>, Option<Box<TExpr>>),
    While(Box<TExpr>, Box<TExpr>),
    For {
        var: String,
        lo: Box<TExpr>,
        hi: Box<TExpr>,
        body: Box<TExpr>,
    },
    Seq(Box<TExpr>, Box<TExpr>),
    BinOp(BinOp, Box<TExpr>, Box<TExpr>),
    UnOp(UnOp, Box<TExpr>),
    Index(Box<TExpr>, Box<TExpr>),
    Assign(Box<TExpr>, Box<TExpr>, Box<TExpr>),
}

#[derive(Clone, Debug)]
pub struct TPattern {
    pub kind: TPatternKind,
    pub ty: Ty,
}

#[derive(Clone, Debug)]
pub enum TPatternKind {
    Var(String),
    Wildcard,
    Unit,
    Tuple(Vec<TPattern>),
}

/// A root-level binding introduced by a definition phrase.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalDef {
    pub name: String,
    pub scheme: TypeScheme,
    pub symbol: String,
}

#[derive(Clone, Debug)]
pub enum TypedTree {
    Def {
        rec: bool,
        pat: TPattern,
        expr: TExpr,
        defs: Vec<GlobalDef>,
    },
    Expr(TExpr),
}

impl TypedTree {
    /// Type of the phrase's value.
    pub fn ty(&self) -> &Ty {
        match self {
            TypedTree::Def { expr, .. } | TypedTree::Expr(expr) => &expr.ty,
        }
    }
}

// ---------------------------------------------------------------------------
// Inference

pub fn infer_phrase(
    env: &TypeEnv,
    ast: &Ast,
    phrase: u32,
) -> Result<(TypedTree, TypeEnv), TypeError> {
    let mut cx = Infer::new(env);
    let tree = match ast {
        Ast::Expr(e) => {
            let te = cx.expr(e)?;
            TypedTree::Expr(te)
        }
        Ast::Def { rec, pat, expr, .. } => {
            let (tpat, texpr, schemes) = cx.let_binding(*rec, pat, expr)?;
            let defs = schemes
                .into_iter()
                .map(|(name, scheme)| {
                    let symbol = global_symbol(phrase, &name);
                    GlobalDef {
                        name,
                        scheme,
                        symbol,
                    }
                })
                .collect();
            TypedTree::Def {
                rec: *rec,
                pat: tpat,
                expr: texpr,
                defs,
            }
        }
    };
    let tree = cx.zonk_tree(tree);
    let mut next = env.clone();
    for b in next.bindings.values_mut() {
        if let Binding::Global { scheme, .. } = b {
            scheme.body = cx.zonk(&scheme.body);
        }
    }
    if let TypedTree::Def { defs, .. } = &tree {
        for d in defs {
            next.bindings.insert(
                d.name.clone(),
                Binding::Global {
                    scheme: d.scheme.clone(),
                    symbol: d.symbol.clone(),
                },
            );
        }
    }
    next.next_var = cx.next;
    Ok((tree, next))
}

struct Infer<'e> {
    env: &'e TypeEnv,
    subst: HashMap<TyVar, Ty>,
    levels: HashMap<TyVar, u32>,
    next: TyVar,
    level: u32,
    locals: Vec<(String, TypeScheme)>,
}

enum Lookup {
    Local(TypeScheme),
    Global(TypeScheme, String),
    Prim(Builtin),
}

impl<'e> Infer<'e> {
    fn new(env: &'e TypeEnv) -> Self {
        Infer {
            env,
            subst: HashMap::new(),
            levels: HashMap::new(),
            next: env.next_var,
            level: 0,
            locals: Vec::new(),
        }
    }

    fn fresh(&mut self) -> Ty {
        let v = self.next;
        self.next += 1;
        self.levels.insert(v, self.level);
        Ty::Var(v)
    }

    fn var_level(&self, v: TyVar) -> u32 {
        // variables inherited from earlier phrases are never generalized
        self.levels.get(&v).copied().unwrap_or(0)
    }

    fn shallow(&self, t: &Ty) -> Ty {
        let mut t = t.clone();
        while let Ty::Var(v) = t {
            match self.subst.get(&v) {
                Some(b) => t = b.clone(),
                None => break,
            }
        }
        t
    }

    fn zonk(&self, t: &Ty) -> Ty {
        match self.shallow(t) {
            Ty::Array(e) => Ty::Array(Box::new(self.zonk(&e))),
            Ty::Tuple(ts) => Ty::Tuple(ts.iter().map(|t| self.zonk(t)).collect()),
            Ty::Arrow(a, b) => Ty::Arrow(Box::new(self.zonk(&a)), Box::new(self.zonk(&b))),
            t => t,
        }
    }

    fn lookup(&self, name: &str) -> Option<Lookup> {
        if let Some((_, s)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Some(Lookup::Local(s.clone()));
        }
        match self.env.lookup(name)? {
            Binding::Global { scheme, symbol } => {
                Some(Lookup::Global(scheme.clone(), symbol.clone()))
            }
            Binding::Primitive(p) => Some(Lookup::Prim(*p)),
        }
    }

    fn instantiate(&mut self, s: &TypeScheme) -> Ty {
        let map: HashMap<TyVar, Ty> = s.quantified.iter().map(|v| (*v, self.fresh())).collect();
        fn go(t: &Ty, map: &HashMap<TyVar, Ty>) -> Ty {
            match t {
                Ty::Var(v) => map.get(v).cloned().unwrap_or(Ty::Var(*v)),
                Ty::Array(e) => Ty::Array(Box::new(go(e, map))),
                Ty::Tuple(ts) => Ty::Tuple(ts.iter().map(|t| go(t, map)).collect()),
                Ty::Arrow(a, b) => Ty::Arrow(Box::new(go(a, map)), Box::new(go(b, map))),
                t => t.clone(),
            }
        }
        go(&s.body, &map)
    }

    fn generalize(&self, t: &Ty) -> TypeScheme {
        let body = self.zonk(t);
        let quantified = body
            .vars()
            .into_iter()
            .filter(|v| self.var_level(*v) > self.level)
            .collect();
        TypeScheme { quantified, body }
    }

    /// Keeps an expansive binding monomorphic: its variables are pulled out
    /// to the current level so enclosing lets cannot generalize them either.
    fn restrict(&mut self, t: &Ty) -> TypeScheme {
        let body = self.zonk(t);
        for v in body.vars() {
            if self.var_level(v) > self.level {
                self.levels.insert(v, self.level);
            }
        }
        TypeScheme::mono(body)
    }

    fn mismatch(&self, span: Span, found: &Ty, expected: &Ty) -> TypeError {
        let names = format_types(&[&self.zonk(found), &self.zonk(expected)]);
        TypeError {
            span,
            kind: TypeErrorKind::Mismatch {
                found: names[0].clone(),
                expected: names[1].clone(),
            },
        }
    }

    fn unify(&mut self, found: &Ty, expected: &Ty, span: Span) -> Result<(), TypeError> {
        match self.unify_inner(found, expected) {
            Ok(()) => Ok(()),
            Err(UnifyFail::Clash) => Err(self.mismatch(span, found, expected)),
            Err(UnifyFail::Occurs) => {
                let mut e = self.mismatch(span, found, expected);
                if let TypeErrorKind::Mismatch { found, expected } = e.kind {
                    e.kind = TypeErrorKind::Occurs { found, expected };
                }
                Err(e)
            }
        }
    }

    fn unify_inner(&mut self, a: &Ty, b: &Ty) -> Result<(), UnifyFail> {
        let a = self.shallow(a);
        let b = self.shallow(b);
        match (&a, &b) {
            (Ty::Var(x), Ty::Var(y)) if x == y => Ok(()),
            (Ty::Var(v), t) | (t, Ty::Var(v)) => self.bind(*v, t),
            (Ty::Int, Ty::Int)
            | (Ty::Float, Ty::Float)
            | (Ty::Bool, Ty::Bool)
            | (Ty::Unit, Ty::Unit)
            | (Ty::String, Ty::String) => Ok(()),
            (Ty::Array(x), Ty::Array(y)) => self.unify_inner(x, y),
            (Ty::Arrow(a1, r1), Ty::Arrow(a2, r2)) => {
                self.unify_inner(a1, a2)?;
                self.unify_inner(r1, r2)
            }
            (Ty::Tuple(xs), Ty::Tuple(ys)) if xs.len() == ys.len() => {
                for (x, y) in xs.iter().zip(ys) {
                    self.unify_inner(x, y)?;
                }
                Ok(())
            }
            _ => Err(UnifyFail::Clash),
        }
    }

    fn bind(&mut self, v: TyVar, t: &Ty) -> Result<(), UnifyFail> {
        let t = self.zonk(t);
        let vars = t.vars();
        if vars.contains(&v) {
            return Err(UnifyFail::Occurs);
        }
        let lvl = self.var_level(v);
        for u in vars {
            if self.var_level(u) > lvl {
                self.levels.insert(u, lvl);
            }
        }
        self.subst.insert(v, t);
        Ok(())
    }

    fn pattern(
        &mut self,
        p: &Pattern,
        binders: &mut Vec<(String, Ty)>,
    ) -> Result<TPattern, TypeError> {
        Ok(match p {
            Pattern::Var(n, span) => {
                if binders.iter().any(|(b, _)| b == n) {
                    return Err(TypeError {
                        span: *span,
                        kind: TypeErrorKind::Other(format!(
                            "Variable {} is bound several times in this matching",
                            n
                        )),
                    });
                }
                let t = self.fresh();
                binders.push((n.clone(), t.clone()));
                TPattern {
                    kind: TPatternKind::Var(n.clone()),
                    ty: t,
                }
            }
            Pattern::Wildcard(_) => TPattern {
                kind: TPatternKind::Wildcard,
                ty: self.fresh(),
            },
            Pattern::Unit(_) => TPattern {
                kind: TPatternKind::Unit,
                ty: Ty::Unit,
            },
            Pattern::Tuple(ps, _) => {
                let items = ps
                    .iter()
                    .map(|p| self.pattern(p, binders))
                    .collect::<Result<Vec<_>, _>>()?;
                let ty = Ty::Tuple(items.iter().map(|p| p.ty.clone()).collect());
                TPattern {
                    kind: TPatternKind::Tuple(items),
                    ty,
                }
            }
        })
    }

    /// Infers `pat = bound` (recursively if `rec`) and returns the binders'
    /// schemes, generalized when `bound` is a syntactic value.
    fn let_binding(
        &mut self,
        rec: bool,
        pat: &Pattern,
        bound: &Expr,
    ) -> Result<(TPattern, TExpr, Vec<(String, TypeScheme)>), TypeError> {
        self.level += 1;
        let mut binders = Vec::new();
        let tpat = self.pattern(pat, &mut binders)?;
        let tbound = if rec {
            if !matches!(bound.kind, ExprKind::Fun(..)) {
                self.level -= 1;
                return Err(TypeError {
                    span: bound.span,
                    kind: TypeErrorKind::Other(
                        "This kind of expression is not allowed as right-hand side of `let rec'"
                            .into(),
                    ),
                });
            }
            let mark = self.locals.len();
            for (n, t) in &binders {
                self.locals.push((n.clone(), TypeScheme::mono(t.clone())));
            }
            let r = self.expr(bound);
            self.locals.truncate(mark);
            r?
        } else {
            self.expr(bound)?
        };
        let unified = self.unify(&tbound.ty, &tpat.ty, bound.span);
        self.level -= 1;
        unified?;
        let generalize = is_syntactic_value(bound);
        let schemes = binders
            .into_iter()
            .map(|(n, t)| {
                let s = if generalize {
                    self.generalize(&t)
                } else {
                    self.restrict(&t)
                };
                (n, s)
            })
            .collect();
        Ok((tpat, tbound, schemes))
    }

    fn expect_ty(&mut self, e: &Expr, t: &Ty) -> Result<TExpr, TypeError> {
        let te = self.expr(e)?;
        self.unify(&te.ty, t, e.span)?;
        Ok(te)
    }

    fn expr(&mut self, e: &Expr) -> Result<TExpr, TypeError> {
        let span = e.span;
        let (kind, ty) = match &e.kind {
            ExprKind::Int(n) => (TExprKind::Int(*n), Ty::Int),
            ExprKind::Float(f) => (TExprKind::Float(*f), Ty::Float),
            ExprKind::Bool(b) => (TExprKind::Bool(*b), Ty::Bool),
            ExprKind::Unit => (TExprKind::Unit, Ty::Unit),
            ExprKind::Str(s) => (TExprKind::Str(s.clone()), Ty::String),
            ExprKind::Var(n) => match self.lookup(n) {
                Some(Lookup::Local(s)) => (TExprKind::Local(n.clone()), self.instantiate(&s)),
                Some(Lookup::Global(s, symbol)) => (
                    TExprKind::Global {
                        name: n.clone(),
                        symbol,
                    },
                    self.instantiate(&s),
                ),
                Some(Lookup::Prim(p)) => (TExprKind::Prim(p), self.instantiate(&p.scheme())),
                None => {
                    return Err(TypeError {
                        span,
                        kind: TypeErrorKind::Unbound(n.clone()),
                    })
                }
            },
            ExprKind::Tuple(items) => {
                let ts = items
                    .iter()
                    .map(|i| self.expr(i))
                    .collect::<Result<Vec<_>, _>>()?;
                let ty = Ty::Tuple(ts.iter().map(|t| t.ty.clone()).collect());
                (TExprKind::Tuple(ts), ty)
            }
            ExprKind::Array(items) => {
                let elem = self.fresh();
                let ts = items
                    .iter()
                    .map(|i| self.expect_ty(i, &elem))
                    .collect::<Result<Vec<_>, _>>()?;
                (TExprKind::Array(ts), Ty::array(elem))
            }
            ExprKind::Fun(params, body) => {
                let mark = self.locals.len();
                let mut tparams = Vec::new();
                let result = (|| {
                    for p in params {
                        let mut binders = Vec::new();
                        let tp = self.pattern(p, &mut binders)?;
                        for (n, t) in binders {
                            self.locals.push((n, TypeScheme::mono(t)));
                        }
                        tparams.push(tp);
                    }
                    self.expr(body)
                })();
                self.locals.truncate(mark);
                let tbody = result?;
                let ty = tparams
                    .iter()
                    .rev()
                    .fold(tbody.ty.clone(), |acc, p| Ty::arrow(p.ty.clone(), acc));
                (TExprKind::Fun(tparams, Box::new(tbody)), ty)
            }
            ExprKind::App(f, args) => {
                let tf = self.expr(f)?;
                let mut fty = tf.ty.clone();
                let mut targs = Vec::new();
                for a in args {
                    let ta = self.expr(a)?;
                    let (param, result) = match self.shallow(&fty) {
                        Ty::Arrow(p, r) => (*p, *r),
                        Ty::Var(_) => {
                            let p = self.fresh();
                            let r = self.fresh();
                            self.unify(&fty, &Ty::arrow(p.clone(), r.clone()), f.span)?;
                            (p, r)
                        }
                        other => {
                            return Err(TypeError {
                                span: f.span,
                                kind: TypeErrorKind::NotAFunction(format_type(&self.zonk(&other))),
                            })
                        }
                    };
                    self.unify(&ta.ty, &param, a.span)?;
                    targs.push(ta);
                    fty = result;
                }
                (TExprKind::App(Box::new(tf), targs), fty)
            }
            ExprKind::Let {
                rec,
                pat,
                bound,
                body,
            } => {
                let (tpat, tbound, schemes) = self.let_binding(*rec, pat, bound)?;
                let mark = self.locals.len();
                self.locals.extend(schemes);
                let tbody = self.expr(body);
                self.locals.truncate(mark);
                let tbody = tbody?;
                let ty = tbody.ty.clone();
                (
                    TExprKind::Let {
                        rec: *rec,
                        pat: tpat,
                        bound: Box::new(tbound),
                        body: Box::new(tbody),
                    },
                    ty,
                )
            }
            ExprKind::If(c, t, el) => {
                let tc = self.expect_ty(c, &Ty::Bool)?;
                match el {
                    Some(el) => {
                        let tt = self.expr(t)?;
                        let te = self.expect_ty(el, &tt.ty)?;
                        let ty = tt.ty.clone();
                        (
                            TExprKind::If(Box::new(tc), Box::new(tt), Some(Box::new(te))),
                            ty,
                        )
                    }
                    None => {
                        let tt = self.expect_ty(t, &Ty::Unit)?;
                        (TExprKind::If(Box::new(tc), Box::new(tt), None), Ty::Unit)
                    }
                }
            }
            ExprKind::While(c, body) => {
                let tc = self.expect_ty(c, &Ty::Bool)?;
                let tb = self.expr(body)?;
                (TExprKind::While(Box::new(tc), Box::new(tb)), Ty::Unit)
            }
            ExprKind::For { var, lo, hi, body } => {
                let tlo = self.expect_ty(lo, &Ty::Int)?;
                let thi = self.expect_ty(hi, &Ty::Int)?;
                self.locals.push((var.clone(), TypeScheme::mono(Ty::Int)));
                let tb = self.expr(body);
                self.locals.pop();
                let tb = tb?;
                (
                    TExprKind::For {
                        var: var.clone(),
                        lo: Box::new(tlo),
                        hi: Box::new(thi),
                        body: Box::new(tb),
                    },
                    Ty::Unit,
                )
            }
            ExprKind::Seq(a, b) => {
                let ta = self.expr(a)?;
                let tb = self.expr(b)?;
                let ty = tb.ty.clone();
                (TExprKind::Seq(Box::new(ta), Box::new(tb)), ty)
            }
            ExprKind::BinOp(op, a, b) => {
                let (operand, result) = match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                        (Ty::Int, Ty::Int)
                    }
                    BinOp::FAdd | BinOp::FSub | BinOp::FMul | BinOp::FDiv => (Ty::Float, Ty::Float),
                    BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        (Ty::Int, Ty::Bool)
                    }
                    BinOp::And | BinOp::Or => (Ty::Bool, Ty::Bool),
                };
                let ta = self.expect_ty(a, &operand)?;
                let tb = self.expect_ty(b, &operand)?;
                (TExprKind::BinOp(*op, Box::new(ta), Box::new(tb)), result)
            }
            ExprKind::UnOp(op, a) => {
                let t = match op {
                    UnOp::Neg => Ty::Int,
                    UnOp::FNeg => Ty::Float,
                };
                let ta = self.expect_ty(a, &t)?;
                (TExprKind::UnOp(*op, Box::new(ta)), t)
            }
            ExprKind::Index(a, i) => {
                let elem = self.fresh();
                let ta = self.expect_ty(a, &Ty::array(elem.clone()))?;
                let ti = self.expect_ty(i, &Ty::Int)?;
                (TExprKind::Index(Box::new(ta), Box::new(ti)), elem)
            }
            ExprKind::Assign(a, i, v) => {
                let elem = self.fresh();
                let ta = self.expect_ty(a, &Ty::array(elem.clone()))?;
                let ti = self.expect_ty(i, &Ty::Int)?;
                let tv = self.expect_ty(v, &elem)?;
                (
                    TExprKind::Assign(Box::new(ta), Box::new(ti), Box::new(tv)),
                    Ty::Unit,
                )
            }
        };
        Ok(TExpr { kind, ty, span })
    }

    fn zonk_tree(&self, t: TypedTree) -> TypedTree {
        match t {
            TypedTree::Expr(e) => TypedTree::Expr(self.zonk_expr(e)),
            TypedTree::Def {
                rec,
                pat,
                expr,
                defs,
            } => TypedTree::Def {
                rec,
                pat: self.zonk_pat(pat),
                expr: self.zonk_expr(expr),
                defs,
            },
        }
    }

    fn zonk_pat(&self, p: TPattern) -> TPattern {
        let ty = self.zonk(&p.ty);
        let kind = match p.kind {
            TPatternKind::Tuple(ps) => {
                TPatternKind::Tuple(ps.into_iter().map(|p| self.zonk_pat(p)).collect())
            }
            k => k,
        };
        TPattern { kind, ty }
    }

    fn zonk_expr(&self, e: TExpr) -> TExpr {
        let z = |e: Box<TExpr>| Box::new(self.zonk_expr(*e));
        let zs = |es: Vec<TExpr>| {
            es.into_iter()
                .map(|e| self.zonk_expr(e))
                .collect::<Vec<_>>()
        };
        let kind = match e.kind {
            TExprKind::Tuple(es) => TExprKind::Tuple(zs(es)),
            TExprKind::Array(es) => TExprKind::Array(zs(es)),
            TExprKind::Fun(ps, b) => {
                TExprKind::Fun(ps.into_iter().map(|p| self.zonk_pat(p)).collect(), z(b))
            }
            TExprKind::App(f, args) => TExprKind::App(z(f), zs(args)),
            TExprKind::Let {
                rec,
                pat,
                bound,
                body,
            } => TExprKind::Let {
                rec,
                pat: self.zonk_pat(pat),
                bound: z(bound),
                body: z(body),
            },
            TExprKind::If(c, t, e) => TExprKind::If(z(c), z(t), e.map(z)),
            TExprKind::While(c, b) => TExprKind::While(z(c), z(b)),
            TExprKind::For { var, lo, hi, body } => TExprKind::For {
                var,
                lo: z(lo),
                hi: z(hi),
                body: z(body),
            },
            TExprKind::Seq(a, b) => TExprKind::Seq(z(a), z(b)),
            TExprKind::BinOp(op, a, b) => TExprKind::BinOp(op, z(a), z(b)),
            TExprKind::UnOp(op, a) => TExprKind::UnOp(op, z(a)),
            TExprKind::Index(a, i) => TExprKind::Index(z(a), z(i)),
            TExprKind::Assign(a, i, v) => TExprKind::Assign(z(a), z(i), z(v)),
            k => k,
        };
        TExpr {
            kind,
            ty: self.zonk(&e.ty),
            span: e.span,
        }
    }
}

enum UnifyFail {
    Clash,
    Occurs,
}

/// Syntactic values: the only right-hand sides that may be generalized.
pub fn is_syntactic_value(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Int(_)
        | ExprKind::Float(_)
        | ExprKind::Bool(_)
        | ExprKind::Unit
        | ExprKind::Str(_)
        | ExprKind::Var(_)
        | ExprKind::Fun(..) => true,
        ExprKind::Tuple(items) => items.iter().all(is_syntactic_value),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_phrase;
    use crate::frontend::types::format_scheme;

    fn ty_of(env: &TypeEnv, src: &str) -> Result<String, TypeError> {
        let ast = parse_phrase(src).unwrap();
        infer_phrase(env, &ast, 0).map(|(t, _)| format_type(t.ty()))
    }

    #[test]
    fn monomorphic_function() {
        assert_eq!(
            ty_of(&TypeEnv::new(), "fun x -> x + 1;;").unwrap(),
            "int -> int"
        );
    }

    #[test]
    fn let_polymorphism() {
        assert_eq!(
            ty_of(&TypeEnv::new(), "let id = fun x -> x in (id 1, id true);;").unwrap(),
            "int * bool"
        );
    }

    #[test]
    fn self_application_fails_occurs_check() {
        let err = ty_of(&TypeEnv::new(), "fun x -> x x;;").unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::Occurs { .. }), "{err}");
    }

    #[test]
    fn arrays_are_not_generalized() {
        let ast = parse_phrase("let a = array_make 3 [||];;").unwrap();
        let (tree, env) = infer_phrase(&TypeEnv::new(), &ast, 1).unwrap();
        let TypedTree::Def { defs, .. } = tree else {
            panic!()
        };
        assert_eq!(format_scheme(&defs[0].scheme), "'_a array array");
        // using the weak variable fixes it for later phrases
        let ast = parse_phrase("a.(0) <- [|1|];;").unwrap();
        let (_, env) = infer_phrase(&env, &ast, 2).unwrap();
        assert_eq!(
            format_scheme(&env.scheme_of("a").unwrap()),
            "int array array"
        );
        assert!(ty_of(&env, "a.(0) <- [|true|];;").is_err());
    }

    #[test]
    fn definitions_persist_with_symbols() {
        let ast = parse_phrase("let f x = x * 2;;").unwrap();
        let (_, env) = infer_phrase(&TypeEnv::new(), &ast, 7).unwrap();
        match env.lookup("f") {
            Some(Binding::Global { symbol, scheme }) => {
                assert_eq!(symbol, "nml_phrase7_f");
                assert_eq!(format_scheme(scheme), "int -> int");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(ty_of(&env, "f 21;;").unwrap(), "int");
    }

    #[test]
    fn mismatch_names_both_types() {
        let err = ty_of(&TypeEnv::new(), "1 + true;;").unwrap_err();
        assert_eq!(
            err.kind,
            TypeErrorKind::Mismatch {
                found: "bool".into(),
                expected: "int".into()
            }
        );
        assert_eq!(err.span, Span::new(4, 8));
    }

    #[test]
    fn unbound_identifier() {
        let err = ty_of(&TypeEnv::new(), "nope + 1;;").unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::Unbound("nope".into()));
    }

    #[test]
    fn let_rec_needs_a_function() {
        assert!(ty_of(&TypeEnv::new(), "let rec x = 1 in x;;").is_err());
        assert_eq!(
            ty_of(
                &TypeEnv::new(),
                "let rec f n = if n = 0 then 1 else n * f (n - 1) in f;;"
            )
            .unwrap(),
            "int -> int"
        );
    }

    #[test]
    fn inference_is_deterministic() {
        let src = "let compose f g x = f (g x);;";
        let a = ty_of(&TypeEnv::new(), src).unwrap();
        let b = ty_of(&TypeEnv::new(), src).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, "('a -> 'b) -> ('c -> 'a) -> 'c -> 'b");
    }
}
