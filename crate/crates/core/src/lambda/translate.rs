//! Typed tree to lambda: erases types, resolves names to unique ids and
//! expands patterns, operators and builtins.

use crate::frontend::ast::{BinOp, UnOp};
use crate::frontend::infer::{
    Builtin, GlobalDef, TExpr, TExprKind, TPattern, TPatternKind, TypedTree,
};

use super::{Cmp, Const, Lambda, LambdaPhrase, PrimOp, VarId, VarNames};

pub fn translate(tt: &TypedTree) -> LambdaPhrase {
    let mut cx = Translator {
        names: VarNames::default(),
        scope: Vec::new(),
    };
    let body = match tt {
        TypedTree::Expr(e) => cx.expr(e),
        TypedTree::Def {
            rec,
            pat,
            expr,
            defs,
        } => cx.definition(*rec, pat, expr, defs),
    };
    LambdaPhrase {
        body,
        names: cx.names,
    }
}

struct Translator {
    names: VarNames,
    scope: Vec<(String, VarId)>,
}

fn builtin_op(b: Builtin) -> PrimOp {
    match b {
        Builtin::PrintInt => PrimOp::PrintInt,
        Builtin::PrintFloat => PrimOp::PrintFloat,
        Builtin::PrintString => PrimOp::PrintString,
        Builtin::PrintNewline => PrimOp::PrintNewline,
        Builtin::ArrayMake => PrimOp::ArrayMake,
        Builtin::ArrayGet => PrimOp::ArrayGet,
        Builtin::ArraySet => PrimOp::ArraySet,
        Builtin::ArrayLength => PrimOp::ArrayLength,
        Builtin::StringLength => PrimOp::StringLength,
        Builtin::FloatOfInt => PrimOp::FloatOfInt,
        Builtin::IntOfFloat => PrimOp::IntOfFloat,
        Builtin::Sqrt => PrimOp::Sqrt,
        Builtin::Not => PrimOp::Not,
    }
}

impl Translator {
    fn lookup(&self, name: &str) -> VarId {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
            .expect("typed tree locals are bound")
    }

    fn bind(&mut self, name: &str) -> VarId {
        let id = self.names.fresh(name);
        self.scope.push((name.to_string(), id));
        id
    }

    fn definition(
        &mut self,
        rec: bool,
        pat: &TPattern,
        expr: &TExpr,
        defs: &[GlobalDef],
    ) -> Lambda {
        let symbol_of = |name: &str| {
            defs.iter()
                .find(|d| d.name == name)
                .map(|d| d.symbol.clone())
                .expect("every binder has a symbol")
        };
        if rec {
            let TPatternKind::Var(name) = &pat.kind else {
                unreachable!("let rec binds a name")
            };
            let f = self.bind(name);
            let fun = self.expr(expr);
            self.scope.pop();
            let store = Lambda::Prim(PrimOp::SetGlobal(symbol_of(name)), vec![Lambda::Var(f)]);
            return Lambda::LetRec(vec![(f, fun)], Box::new(Lambda::seq(store, Lambda::Var(f))));
        }
        let bound = self.expr(expr);
        let t = self.names.fresh(match &pat.kind {
            TPatternKind::Var(n) => n,
            _ => "def",
        });
        let mark = self.scope.len();
        let mut binders = Vec::new();
        let wrap = self.destructure(t, pat, &mut binders);
        let mut body = Lambda::Var(t);
        for (name, id) in binders.iter().rev() {
            let store = Lambda::Prim(PrimOp::SetGlobal(symbol_of(name)), vec![Lambda::Var(*id)]);
            body = Lambda::seq(store, body);
        }
        self.scope.truncate(mark);
        Lambda::let_(t, bound, wrap(body))
    }

    /// Binds the variables of `pat` from the value held in `src`. Returns a
    /// function that wraps a body in the projections; the binders are pushed
    /// onto the scope and recorded in `out`.
    fn destructure(
        &mut self,
        src: VarId,
        pat: &TPattern,
        out: &mut Vec<(String, VarId)>,
    ) -> Box<dyn FnOnce(Lambda) -> Lambda> {
        match &pat.kind {
            TPatternKind::Var(name) => {
                // the source variable itself takes the name
                self.scope.push((name.clone(), src));
                out.push((name.clone(), src));
                Box::new(|body| body)
            }
            TPatternKind::Wildcard | TPatternKind::Unit => Box::new(|body| body),
            TPatternKind::Tuple(items) => {
                let mut wraps = Vec::new();
                for (i, p) in items.iter().enumerate() {
                    if matches!(p.kind, TPatternKind::Wildcard | TPatternKind::Unit) {
                        continue;
                    }
                    let hint = match &p.kind {
                        TPatternKind::Var(n) => n.as_str(),
                        _ => "tup",
                    };
                    let x = self.names.fresh(hint);
                    let inner = self.destructure(x, p, out);
                    wraps.push((x, i, inner));
                }
                Box::new(move |body| {
                    let mut body = body;
                    for (x, i, inner) in wraps.into_iter().rev() {
                        body = Lambda::let_(
                            x,
                            Lambda::Prim(PrimOp::Field(i), vec![Lambda::Var(src)]),
                            inner(body),
                        );
                    }
                    body
                })
            }
        }
    }

    fn lambda_params(&mut self, params: &[TPattern], body: &TExpr) -> Lambda {
        let Some((first, rest)) = params.split_first() else {
            return self.expr(body);
        };
        let mark = self.scope.len();
        let x = match &first.kind {
            TPatternKind::Var(n) => self.names.fresh(n),
            TPatternKind::Unit => self.names.fresh("unit"),
            TPatternKind::Wildcard => self.names.fresh("_"),
            TPatternKind::Tuple(_) => self.names.fresh("param"),
        };
        let wrap = self.destructure(x, first, &mut Vec::new());
        let inner = self.lambda_params(rest, body);
        self.scope.truncate(mark);
        Lambda::Fun(vec![x], Box::new(wrap(inner)))
    }

    /// A builtin used as a value becomes a curried function.
    fn eta_builtin(&mut self, b: Builtin) -> Lambda {
        let params: Vec<VarId> = (0..b.arity())
            .map(|i| self.names.fresh(&format!("arg{}", i)))
            .collect();
        let mut body = Lambda::Prim(
            builtin_op(b),
            params.iter().map(|p| Lambda::Var(*p)).collect(),
        );
        for p in params.iter().rev() {
            body = Lambda::Fun(vec![*p], Box::new(body));
        }
        body
    }

    fn exprs(&mut self, es: &[TExpr]) -> Vec<Lambda> {
        es.iter().map(|e| self.expr(e)).collect()
    }

    fn expr(&mut self, e: &TExpr) -> Lambda {
        match &e.kind {
            TExprKind::Int(n) => Lambda::int(*n),
            TExprKind::Float(f) => Lambda::Const(Const::Float(*f)),
            TExprKind::Bool(b) => Lambda::boolean(*b),
            TExprKind::Unit => Lambda::unit(),
            TExprKind::Str(s) => Lambda::Const(Const::String(s.clone())),
            TExprKind::Local(n) => Lambda::Var(self.lookup(n)),
            TExprKind::Global { symbol, .. } => Lambda::Global(symbol.clone()),
            TExprKind::Prim(b) => self.eta_builtin(*b),
            TExprKind::Tuple(items) => {
                Lambda::Prim(PrimOp::MakeBlock(items.len()), self.exprs(items))
            }
            TExprKind::Array(items) if items.is_empty() => {
                Lambda::Prim(PrimOp::ArrayMake, vec![Lambda::int(0), Lambda::unit()])
            }
            TExprKind::Array(items) => {
                Lambda::Prim(PrimOp::MakeBlock(items.len()), self.exprs(items))
            }
            TExprKind::Fun(params, body) => self.lambda_params(params, body),
            TExprKind::App(f, args) => self.apply(f, args),
            TExprKind::Let {
                rec: true,
                pat,
                bound,
                body,
            } => {
                let TPatternKind::Var(name) = &pat.kind else {
                    unreachable!("let rec binds a name")
                };
                let f = self.bind(name);
                let fun = self.expr(bound);
                let body = self.expr(body);
                self.scope.pop();
                Lambda::LetRec(vec![(f, fun)], Box::new(body))
            }
            TExprKind::Let {
                rec: false,
                pat,
                bound,
                body,
            } => {
                let bound = self.expr(bound);
                let hint = match &pat.kind {
                    TPatternKind::Var(n) => n.as_str(),
                    _ => "let",
                };
                let x = self.names.fresh(hint);
                let mark = self.scope.len();
                let wrap = self.destructure(x, pat, &mut Vec::new());
                let body = self.expr(body);
                self.scope.truncate(mark);
                Lambda::let_(x, bound, wrap(body))
            }
            TExprKind::If(c, t, el) => {
                let c = self.expr(c);
                let t = self.expr(t);
                let el = match el {
                    Some(el) => self.expr(el),
                    None => Lambda::unit(),
                };
                Lambda::If(Box::new(c), Box::new(t), Box::new(el))
            }
            TExprKind::While(c, b) => Lambda::While(Box::new(self.expr(c)), Box::new(self.expr(b))),
            TExprKind::For { var, lo, hi, body } => {
                let lo = self.expr(lo);
                let hi = self.expr(hi);
                let i = self.bind(var);
                let body = self.expr(body);
                self.scope.pop();
                Lambda::For(i, Box::new(lo), Box::new(hi), Box::new(body))
            }
            TExprKind::Seq(a, b) => Lambda::seq(self.expr(a), self.expr(b)),
            TExprKind::BinOp(op, a, b) => {
                let (a, b) = (self.expr(a), self.expr(b));
                let prim = |p: PrimOp| Lambda::Prim(p, vec![a.clone(), b.clone()]);
                match op {
                    BinOp::Add => prim(PrimOp::AddInt),
                    BinOp::Sub => prim(PrimOp::SubInt),
                    BinOp::Mul => prim(PrimOp::MulInt),
                    BinOp::Div => prim(PrimOp::DivInt),
                    BinOp::Mod => prim(PrimOp::ModInt),
                    BinOp::FAdd => prim(PrimOp::AddFloat),
                    BinOp::FSub => prim(PrimOp::SubFloat),
                    BinOp::FMul => prim(PrimOp::MulFloat),
                    BinOp::FDiv => prim(PrimOp::DivFloat),
                    BinOp::Eq => prim(PrimOp::CmpInt(Cmp::Eq)),
                    BinOp::Ne => prim(PrimOp::CmpInt(Cmp::Ne)),
                    BinOp::Lt => prim(PrimOp::CmpInt(Cmp::Lt)),
                    BinOp::Le => prim(PrimOp::CmpInt(Cmp::Le)),
                    BinOp::Gt => prim(PrimOp::CmpInt(Cmp::Gt)),
                    BinOp::Ge => prim(PrimOp::CmpInt(Cmp::Ge)),
                    BinOp::And => {
                        Lambda::If(Box::new(a), Box::new(b), Box::new(Lambda::boolean(false)))
                    }
                    BinOp::Or => {
                        Lambda::If(Box::new(a), Box::new(Lambda::boolean(true)), Box::new(b))
                    }
                }
            }
            TExprKind::UnOp(op, a) => {
                let a = self.expr(a);
                match op {
                    UnOp::Neg => Lambda::Prim(PrimOp::NegInt, vec![a]),
                    UnOp::FNeg => Lambda::Prim(PrimOp::NegFloat, vec![a]),
                }
            }
            TExprKind::Index(a, i) => {
                Lambda::Prim(PrimOp::ArrayGet, vec![self.expr(a), self.expr(i)])
            }
            TExprKind::Assign(a, i, v) => Lambda::Prim(
                PrimOp::ArraySet,
                vec![self.expr(a), self.expr(i), self.expr(v)],
            ),
        }
    }

    fn apply(&mut self, f: &TExpr, args: &[TExpr]) -> Lambda {
        // flatten `(f a) b` into one application
        let mut head = f;
        let mut all: Vec<&TExpr> = args.iter().collect();
        while let TExprKind::App(g, inner) = &head.kind {
            all.splice(0..0, inner.iter());
            head = g;
        }
        if let TExprKind::Prim(b) = &head.kind {
            let n = b.arity();
            if all.len() >= n {
                let prim_args = all[..n].iter().map(|a| self.expr(a)).collect();
                let call = Lambda::Prim(builtin_op(*b), prim_args);
                if all.len() == n {
                    return call;
                }
                let rest = all[n..].iter().map(|a| self.expr(a)).collect();
                return Lambda::Apply(Box::new(call), rest);
            }
        }
        let f = self.expr(head);
        let args = all.iter().map(|a| self.expr(a)).collect();
        Lambda::Apply(Box::new(f), args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{infer_phrase, parse_phrase, TypeEnv};

    fn lower(src: &str) -> LambdaPhrase {
        let ast = parse_phrase(src).unwrap();
        let (tt, _) = infer_phrase(&TypeEnv::new(), &ast, 1).unwrap();
        translate(&tt)
    }

    #[test]
    fn addition_becomes_a_primitive() {
        assert_eq!(
            lower("1 + 2;;").body,
            Lambda::Prim(PrimOp::AddInt, vec![Lambda::int(1), Lambda::int(2)])
        );
    }

    #[test]
    fn curried_functions_nest() {
        let l = lower("fun x y -> x;;");
        let Lambda::Fun(xs, inner) = &l.body else {
            panic!("{}", l.dump())
        };
        let Lambda::Fun(ys, body) = &**inner else {
            panic!("{}", l.dump())
        };
        assert_eq!((xs.len(), ys.len()), (1, 1));
        assert_eq!(**body, Lambda::Var(xs[0]));
    }

    #[test]
    fn tuple_destructuring_projects_fields() {
        let l = lower("let p = (1, 2) in let (a, b) = p in a;;");
        let text = l.dump();
        assert!(text.contains("(field0 let/"), "{}", text);
        assert!(text.contains("(field1 let/"), "{}", text);
    }

    #[test]
    fn definitions_store_globals() {
        let l = lower("let x = 21 * 2;;");
        assert!(l.dump().contains("setglobal nml_phrase1_x"), "{}", l.dump());
    }

    #[test]
    fn builtins_as_values_are_eta_expanded() {
        let l = lower("let p = print_int in p 3;;");
        let mut funs = 0;
        l.body
            .visit(&mut |n| funs += matches!(n, Lambda::Fun(..)) as usize);
        assert_eq!(funs, 1);
    }

    #[test]
    fn binders_are_unique() {
        let l = lower("let f x = let y = x + 1 in let y = y * 2 in y in f 3 + f 4;;");
        let b = l.body.binders();
        let set: std::collections::BTreeSet<_> = b.iter().collect();
        assert_eq!(set.len(), b.len());
        assert!(l.body.free_vars().is_empty());
    }
}
