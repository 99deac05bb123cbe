//! Closure conversion: lifts every function to top-level code with an
//! explicit environment and distinguishes direct from indirect calls.
//!
//! A `let`-bound chain `fun x1 -> ... -> fun xn -> body` becomes one known
//! function of arity n (at most [`MAX_ARITY`]). Its closure holds a pointer
//! to a unary entry; further unary wrappers collect the remaining arguments
//! in partial-application blocks `[code, closure, a1, ..., ak]` before
//! calling the full entry. Known functions without free variables get a
//! statically allocated closure.

use std::collections::HashMap;

use crate::lambda::sexp::Sexp;
use crate::lambda::{const_text, Const, Lambda, LambdaPhrase, PrimOp, VarId, VarNames};

pub const MAX_ARITY: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub enum Clambda {
    Var(VarId),
    Global(String),
    Const(Const),
    /// Address of a statically allocated closure.
    StaticClosure(String),
    /// The closure (or partial-application block) the function was called with.
    EnvParam,
    /// Captured variable `n`, stored in field `n + 1` of the closure.
    EnvField(usize),
    MakeClosure(String, Vec<Clambda>),
    DirectCall(String, Vec<Clambda>, Box<Clambda>),
    /// Applies a closure to its arguments one at a time.
    IndirectCall(Box<Clambda>, Vec<Clambda>),
    Let(VarId, Box<Clambda>, Box<Clambda>),
    Prim(PrimOp, Vec<Clambda>),
    If(Box<Clambda>, Box<Clambda>, Box<Clambda>),
    While(Box<Clambda>, Box<Clambda>),
    For(VarId, Box<Clambda>, Box<Clambda>, Box<Clambda>),
    Seq(Box<Clambda>, Box<Clambda>),
}

#[derive(Clone, Debug)]
pub struct CFunction {
    pub label: String,
    pub params: Vec<VarId>,
    pub body: Clambda,
}

#[derive(Clone, Debug)]
pub struct CProgram {
    pub phrase: u32,
    pub entry: CFunction,
    pub functions: Vec<CFunction>,
    /// Statically allocated closures: (data symbol, code label).
    pub static_closures: Vec<(String, String)>,
    pub names: VarNames,
}

#[derive(Clone, Debug)]
struct Known {
    full: String,
    arity: usize,
    static_sym: Option<String>,
}

#[derive(Default)]
struct Ctx {
    captures: HashMap<VarId, usize>,
    self_var: Option<VarId>,
}

struct Converter {
    phrase: u32,
    names: VarNames,
    known: HashMap<VarId, Known>,
    functions: Vec<CFunction>,
    static_closures: Vec<(String, String)>,
    counter: usize,
}

pub fn entry_symbol(phrase: u32) -> String {
    format!("nml_phrase{}_entry", phrase)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Splits a chain of nested functions into its parameters and final body.
fn fun_chain(l: &Lambda) -> Option<(Vec<VarId>, Lambda)> {
    let Lambda::Fun(..) = l else { return None };
    let mut params = Vec::new();
    let mut cur = l;
    while let Lambda::Fun(ps, body) = cur {
        if params.len() + ps.len() > MAX_ARITY {
            let room = MAX_ARITY - params.len();
            params.extend_from_slice(&ps[..room]);
            let rest = Lambda::Fun(ps[room..].to_vec(), body.clone());
            return Some((params, rest));
        }
        params.extend_from_slice(ps);
        cur = body;
    }
    Some((params, cur.clone()))
}

pub fn closure_convert(phrase: LambdaPhrase, phrase_id: u32) -> CProgram {
    let mut cv = Converter {
        phrase: phrase_id,
        names: phrase.names,
        known: HashMap::new(),
        functions: Vec::new(),
        static_closures: Vec::new(),
        counter: 0,
    };
    let body = cv.convert(&phrase.body, &Ctx::default());
    CProgram {
        phrase: phrase_id,
        entry: CFunction {
            label: entry_symbol(phrase_id),
            params: Vec::new(),
            body,
        },
        functions: cv.functions,
        static_closures: cv.static_closures,
        names: cv.names,
    }
}

impl Converter {
    fn resolve(&self, x: VarId, ctx: &Ctx) -> Clambda {
        if let Some(Known {
            static_sym: Some(sym),
            ..
        }) = self.known.get(&x)
        {
            return Clambda::StaticClosure(sym.clone());
        }
        if ctx.self_var == Some(x) {
            return Clambda::EnvParam;
        }
        match ctx.captures.get(&x) {
            Some(i) => Clambda::EnvField(*i),
            None => Clambda::Var(x),
        }
    }

    /// Lifts a function with the given parameters and body. Returns the
    /// closure value expression and registers the function as known under
    /// `bound` when given.
    fn lift(
        &mut self,
        params: Vec<VarId>,
        body: &Lambda,
        bound: Option<VarId>,
        recursive: bool,
        ctx: &Ctx,
    ) -> Clambda {
        let self_var = if recursive { bound } else { None };
        let whole = Lambda::Fun(params.clone(), Box::new(body.clone()));
        let captures: Vec<VarId> = whole
            .free_vars()
            .into_iter()
            .filter(|x| Some(*x) != self_var)
            .filter(|x| {
                !matches!(
                    self.known.get(x),
                    Some(Known {
                        static_sym: Some(_),
                        ..
                    })
                )
            })
            .collect();
        self.counter += 1;
        let base = match bound {
            Some(f) => sanitize(self.names.name(f)),
            None => "anon".to_string(),
        };
        let full = format!("nml_phrase{}_fn{}_{}", self.phrase, self.counter, base);
        let static_sym = captures
            .is_empty()
            .then(|| format!("nml_phrase{}_clos{}_{}", self.phrase, self.counter, base));
        let arity = params.len();
        if let Some(f) = bound {
            self.known.insert(
                f,
                Known {
                    full: full.clone(),
                    arity,
                    static_sym: static_sym.clone(),
                },
            );
        }
        let inner_ctx = Ctx {
            captures: captures.iter().enumerate().map(|(i, x)| (*x, i)).collect(),
            self_var,
        };
        let converted = self.convert(body, &inner_ctx);
        self.functions.push(CFunction {
            label: full.clone(),
            params: params.clone(),
            body: converted,
        });
        let code = if arity == 1 {
            full.clone()
        } else {
            self.curry_wrappers(&full, arity)
        };
        match static_sym {
            Some(sym) => {
                self.static_closures.push((sym.clone(), code));
                Clambda::StaticClosure(sym)
            }
            None => Clambda::MakeClosure(
                code,
                captures.iter().map(|x| self.resolve(*x, ctx)).collect(),
            ),
        }
    }

    /// Emits the unary entry points of an n-ary function; returns the first.
    fn curry_wrappers(&mut self, full: &str, arity: usize) -> String {
        let label = |k: usize| format!("{}_c{}", full, k);
        for k in 1..=arity {
            let a = self.names.fresh(&format!("a{}", k));
            let body = if k == arity {
                let mut args: Vec<Clambda> = (1..arity).map(Clambda::EnvField).collect();
                args.push(Clambda::Var(a));
                Clambda::DirectCall(full.to_string(), args, Box::new(Clambda::EnvField(0)))
            } else if k == 1 {
                Clambda::MakeClosure(label(2), vec![Clambda::EnvParam, Clambda::Var(a)])
            } else {
                let mut fields: Vec<Clambda> = (0..k).map(Clambda::EnvField).collect();
                fields.push(Clambda::Var(a));
                Clambda::MakeClosure(label(k + 1), fields)
            };
            self.functions.push(CFunction {
                label: label(k),
                params: vec![a],
                body,
            });
        }
        label(1)
    }

    fn convert_all(&mut self, ls: &[Lambda], ctx: &Ctx) -> Vec<Clambda> {
        ls.iter().map(|l| self.convert(l, ctx)).collect()
    }

    fn convert(&mut self, l: &Lambda, ctx: &Ctx) -> Clambda {
        let b = |c: Clambda| Box::new(c);
        match l {
            Lambda::Var(x) => self.resolve(*x, ctx),
            Lambda::Global(s) => Clambda::Global(s.clone()),
            Lambda::Const(c) => Clambda::Const(c.clone()),
            Lambda::Fun(..) => {
                let (mut params, body) = fun_chain(l).expect("function");
                // anonymous functions stay unary
                let rest = params.split_off(1);
                let body = if rest.is_empty() {
                    body
                } else {
                    Lambda::Fun(rest, Box::new(body))
                };
                self.lift(params, &body, None, false, ctx)
            }
            Lambda::Let(f, bound, body) if matches!(**bound, Lambda::Fun(..)) => {
                let (params, fbody) = fun_chain(bound).expect("function");
                let clos = self.lift(params, &fbody, Some(*f), false, ctx);
                self.bind_closure(*f, clos, body, ctx)
            }
            Lambda::LetRec(bindings, body) => {
                let [(f, fun)] = bindings.as_slice() else {
                    unreachable!("let rec binds one function")
                };
                let (params, fbody) = fun_chain(fun).expect("let rec binds a function");
                let clos = self.lift(params, &fbody, Some(*f), true, ctx);
                self.bind_closure(*f, clos, body, ctx)
            }
            Lambda::Apply(f, args) => {
                if let Lambda::Var(x) = &**f {
                    if let Some(k) = self.known.get(x).cloned() {
                        if args.len() >= k.arity {
                            let direct = self.convert_all(&args[..k.arity], ctx);
                            let call =
                                Clambda::DirectCall(k.full, direct, b(self.resolve(*x, ctx)));
                            if args.len() == k.arity {
                                return call;
                            }
                            let rest = self.convert_all(&args[k.arity..], ctx);
                            return Clambda::IndirectCall(b(call), rest);
                        }
                    }
                }
                let args = self.convert_all(args, ctx);
                Clambda::IndirectCall(b(self.convert(f, ctx)), args)
            }
            Lambda::Let(x, bound, body) => {
                let bound = self.convert(bound, ctx);
                Clambda::Let(*x, b(bound), b(self.convert(body, ctx)))
            }
            Lambda::Prim(op, args) => Clambda::Prim(op.clone(), self.convert_all(args, ctx)),
            Lambda::If(c, t, e) => {
                let c = self.convert(c, ctx);
                let t = self.convert(t, ctx);
                Clambda::If(b(c), b(t), b(self.convert(e, ctx)))
            }
            Lambda::While(c, body) => {
                let c = self.convert(c, ctx);
                Clambda::While(b(c), b(self.convert(body, ctx)))
            }
            Lambda::For(i, lo, hi, body) => {
                let lo = self.convert(lo, ctx);
                let hi = self.convert(hi, ctx);
                Clambda::For(*i, b(lo), b(hi), b(self.convert(body, ctx)))
            }
            Lambda::Seq(x, y) => {
                let x = self.convert(x, ctx);
                Clambda::Seq(b(x), b(self.convert(y, ctx)))
            }
        }
    }

    fn bind_closure(&mut self, f: VarId, clos: Clambda, body: &Lambda, ctx: &Ctx) -> Clambda {
        let body = self.convert(body, ctx);
        match clos {
            // uses of `f` resolve to the static symbol directly
            Clambda::StaticClosure(_) => body,
            clos => Clambda::Let(f, Box::new(clos), Box::new(body)),
        }
    }
}

impl Clambda {
    pub fn to_sexp(&self, names: &VarNames) -> Sexp {
        let s = |c: &Clambda| c.to_sexp(names);
        let v = |x: &VarId| Sexp::atom(names.display(*x));
        match self {
            Clambda::Var(x) => v(x),
            Clambda::Global(g) => Sexp::list("global", [Sexp::atom(g.clone())]),
            Clambda::Const(c) => Sexp::atom(const_text(c)),
            Clambda::StaticClosure(sym) => Sexp::list("static_closure", [Sexp::atom(sym.clone())]),
            Clambda::EnvParam => Sexp::atom("env"),
            Clambda::EnvField(n) => Sexp::list("env_field", [Sexp::atom(n.to_string())]),
            Clambda::MakeClosure(code, caps) => Sexp::list(
                "closure",
                std::iter::once(Sexp::atom(code.clone())).chain(caps.iter().map(s)),
            ),
            Clambda::DirectCall(f, args, env) => Sexp::list(
                "direct_call",
                std::iter::once(Sexp::atom(f.clone()))
                    .chain(args.iter().map(s))
                    .chain([s(env)]),
            ),
            Clambda::IndirectCall(f, args) => Sexp::list(
                "indirect_call",
                std::iter::once(s(f)).chain(args.iter().map(s)),
            ),
            Clambda::Let(x, a, body) => Sexp::list("let", [Sexp::List(vec![v(x), s(a)]), s(body)]),
            Clambda::Prim(op, args) => Sexp::list(&op.name(), args.iter().map(s)),
            Clambda::If(c, t, e) => Sexp::list("if", [s(c), s(t), s(e)]),
            Clambda::While(c, body) => Sexp::list("while", [s(c), s(body)]),
            Clambda::For(i, lo, hi, body) => Sexp::list("for", [v(i), s(lo), s(hi), s(body)]),
            Clambda::Seq(a, b) => Sexp::list("seq", [s(a), s(b)]),
        }
    }
}

impl CProgram {
    /// The `--dump-ir clambda` rendering.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (sym, code) in &self.static_closures {
            out.push_str(&format!("(static_closure {} {})\n", sym, code));
        }
        for f in self.functions.iter().chain(std::iter::once(&self.entry)) {
            let params = Sexp::List(
                f.params
                    .iter()
                    .map(|p| Sexp::atom(self.names.display(*p)))
                    .collect(),
            );
            let sexp = Sexp::list(
                "function",
                [
                    Sexp::atom(f.label.clone()),
                    params,
                    f.body.to_sexp(&self.names),
                ],
            );
            out.push_str(&sexp.render(100));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{infer_phrase, parse_phrase, TypeEnv};
    use crate::lambda::{simplify, translate};

    fn convert(src: &str) -> CProgram {
        let ast = parse_phrase(src).unwrap();
        let (tt, _) = infer_phrase(&TypeEnv::new(), &ast, 1).unwrap();
        let mut l = translate(&tt);
        l.body = simplify(l.body);
        closure_convert(l, 1)
    }

    fn count(c: &Clambda, pred: &dyn Fn(&Clambda) -> bool) -> usize {
        let here = pred(c) as usize;
        let kids: usize = match c {
            Clambda::MakeClosure(_, xs) | Clambda::Prim(_, xs) => {
                xs.iter().map(|x| count(x, pred)).sum()
            }
            Clambda::DirectCall(_, xs, e) => {
                xs.iter().map(|x| count(x, pred)).sum::<usize>() + count(e, pred)
            }
            Clambda::IndirectCall(f, xs) => {
                count(f, pred) + xs.iter().map(|x| count(x, pred)).sum::<usize>()
            }
            Clambda::Let(_, a, b) | Clambda::While(a, b) | Clambda::Seq(a, b) => {
                count(a, pred) + count(b, pred)
            }
            Clambda::If(a, b, c) | Clambda::For(_, a, b, c) => {
                count(a, pred) + count(b, pred) + count(c, pred)
            }
            _ => 0,
        };
        here + kids
    }

    #[test]
    fn known_saturated_call_is_direct() {
        let p = convert("let f x = x in f 1;;");
        assert!(
            matches!(&p.entry.body, Clambda::DirectCall(name, args, _) if name.ends_with("_f") && args.len() == 1)
        );
        // `f` is closed, so its closure is static
        assert_eq!(p.static_closures.len(), 1);
    }

    #[test]
    fn inner_function_reads_capture_from_env() {
        let p = convert("fun x -> fun y -> x;;");
        let inner = p.functions.iter().find(|f| f.body == Clambda::EnvField(0));
        assert!(inner.is_some(), "{}", p.dump());
    }

    #[test]
    fn unknown_callee_is_indirect() {
        let p = convert("fun g -> g 1;;");
        let n: usize = p
            .functions
            .iter()
            .map(|f| count(&f.body, &|c| matches!(c, Clambda::IndirectCall(..))))
            .sum();
        assert_eq!(n, 1, "{}", p.dump());
    }

    #[test]
    fn no_free_variables_in_function_bodies() {
        let p = convert(
            "let k = 3 in let rec f n = if n = 0 then k else f (n - 1) + (fun z -> z + k) n in f 10;;",
        );
        for f in &p.functions {
            let mut ok = true;
            fn walk(c: &Clambda, bound: &mut Vec<VarId>, ok: &mut bool) {
                match c {
                    Clambda::Var(x) => *ok &= bound.contains(x),
                    Clambda::Let(x, a, b) => {
                        walk(a, bound, ok);
                        bound.push(*x);
                        walk(b, bound, ok);
                    }
                    Clambda::For(x, lo, hi, b) => {
                        walk(lo, bound, ok);
                        walk(hi, bound, ok);
                        bound.push(*x);
                        walk(b, bound, ok);
                    }
                    Clambda::MakeClosure(_, xs) | Clambda::Prim(_, xs) => {
                        xs.iter().for_each(|x| walk(x, bound, ok))
                    }
                    Clambda::DirectCall(_, xs, e) => {
                        xs.iter().for_each(|x| walk(x, bound, ok));
                        walk(e, bound, ok)
                    }
                    Clambda::IndirectCall(g, xs) => {
                        walk(g, bound, ok);
                        xs.iter().for_each(|x| walk(x, bound, ok))
                    }
                    Clambda::While(a, b) | Clambda::Seq(a, b) => {
                        walk(a, bound, ok);
                        walk(b, bound, ok)
                    }
                    Clambda::If(a, b, c) => {
                        walk(a, bound, ok);
                        walk(b, bound, ok);
                        walk(c, bound, ok)
                    }
                    _ => {}
                }
            }
            walk(&f.body, &mut f.params.clone(), &mut ok);
            assert!(ok, "free variable in {}\n{}", f.label, p.dump());
        }
    }

    #[test]
    fn two_argument_function_gets_curry_wrappers() {
        let p = convert("let add x y = x + y in add;;");
        let labels: Vec<_> = p.functions.iter().map(|f| f.label.as_str()).collect();
        assert!(labels.iter().any(|l| l.ends_with("_add_c1")));
        assert!(labels.iter().any(|l| l.ends_with("_add_c2")));
    }
}
