//! Cmm: explicit machine words, memory operations and allocations.
//!
//! Operands of a multi-operand node are evaluated right to left. Integers
//! are tagged (`n` is stored as `2n + 1`), floats are boxed in tag-253
//! blocks and only appear unboxed as temporaries.

use std::collections::BTreeSet;

use super::clambda::{CFunction, CProgram, Clambda};
use crate::lambda::sexp::Sexp;
use crate::lambda::{Cmp, Const, PrimOp, VarId, VarNames};
use crate::rt::TrapKind;

pub const TAG_TUPLE: u8 = 0;
pub const TAG_CLOSURE: u8 = 247;
pub const TAG_STRING: u8 = 252;
pub const TAG_FLOAT: u8 = 253;

pub fn header(words: usize, tag: u8) -> i64 {
    ((words as i64) << 10) | tag as i64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MType {
    Int,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chunk {
    Word,
    Float,
    Byte,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntOp {
    Add,
    Sub,
    Mul,
    /// Truncating signed division; the divisor is known to be nonzero.
    Div,
    Mod,
    And,
    Or,
    Xor,
    Shl,
    Sar,
    Shr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FloatOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FloatUn {
    Neg,
    Sqrt,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cmm {
    Int(i64),
    Float(f64),
    Symbol(String),
    Var(VarId),
    Let(VarId, Box<Cmm>, Box<Cmm>),
    Assign(VarId, Box<Cmm>),
    Load(Chunk, Box<Cmm>),
    /// Stores the value (second operand) at the address; yields unit.
    Store(Chunk, Box<Cmm>, Box<Cmm>),
    /// Allocates and initialises a block with one field per operand.
    Alloc(u8, Vec<Cmm>),
    IntOp(IntOp, Box<Cmm>, Box<Cmm>),
    /// Signed comparison producing 0 or 1.
    Cmp(Cmp, Box<Cmm>, Box<Cmm>),
    FloatOp(FloatOp, Box<Cmm>, Box<Cmm>),
    FloatUn(FloatUn, Box<Cmm>),
    IntToFloat(Box<Cmm>),
    FloatToInt(Box<Cmm>),
    CallSymbol {
        name: String,
        args: Vec<Cmm>,
        env: Option<Box<Cmm>>,
    },
    /// Calls the code pointer in field 0 of the closure with one argument.
    CallIndirect {
        closure: Box<Cmm>,
        arg: Box<Cmm>,
    },
    If(Box<Cond>, Box<Cmm>, Box<Cmm>),
    /// Repeats its body until an `Exit`; yields unit.
    Loop(Box<Cmm>),
    Exit,
    Seq(Box<Cmm>, Box<Cmm>),
    Trap(TrapKind),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cond {
    Cmp(Cmp, Cmm, Cmm),
    CmpUnsigned(Cmp, Cmm, Cmm),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataItem {
    /// One word holding a toplevel binding, initially unit.
    GlobalSlot(String),
    BoxedFloat(String, f64),
    Str(String, String),
    /// A closure block whose only field is a code address.
    StaticClosure(String, String),
}

impl DataItem {
    pub fn symbol(&self) -> &str {
        match self {
            DataItem::GlobalSlot(s)
            | DataItem::BoxedFloat(s, _)
            | DataItem::Str(s, _)
            | DataItem::StaticClosure(s, _) => s,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CmmFunction {
    pub name: String,
    pub params: Vec<VarId>,
    pub env: Option<VarId>,
    pub body: Cmm,
}

#[derive(Clone, Debug)]
pub struct CmmProgram {
    pub phrase: u32,
    pub entry: String,
    /// Functions in emission order; the entry comes last.
    pub functions: Vec<CmmFunction>,
    pub data: Vec<DataItem>,
    pub names: VarNames,
}

fn bx(c: Cmm) -> Box<Cmm> {
    Box::new(c)
}

pub fn int_op(op: IntOp, a: Cmm, b: Cmm) -> Cmm {
    match (op, &a, &b) {
        (IntOp::Add, Cmm::Int(x), Cmm::Int(y)) => Cmm::Int(x.wrapping_add(*y)),
        (IntOp::Sub, Cmm::Int(x), Cmm::Int(y)) => Cmm::Int(x.wrapping_sub(*y)),
        (IntOp::Add | IntOp::Sub, _, Cmm::Int(0)) => a,
        (IntOp::Add, Cmm::IntOp(IntOp::Add, inner, k), Cmm::Int(y))
            if matches!(**k, Cmm::Int(_)) =>
        {
            let Cmm::Int(x) = **k else { unreachable!() };
            int_op(IntOp::Add, (**inner).clone(), Cmm::Int(x.wrapping_add(*y)))
        }
        (IntOp::Sub, _, Cmm::Int(y)) if *y != i64::MIN => int_op(IntOp::Add, a, Cmm::Int(-*y)),
        _ => Cmm::IntOp(op, bx(a), bx(b)),
    }
}

fn tag_int(c: Cmm) -> Cmm {
    match c {
        Cmm::Int(n) => Cmm::Int(n.wrapping_mul(2).wrapping_add(1)),
        c => int_op(IntOp::Add, int_op(IntOp::Shl, c, Cmm::Int(1)), Cmm::Int(1)),
    }
}

fn untag_int(c: Cmm) -> Cmm {
    match c {
        Cmm::Int(n) => Cmm::Int(n >> 1),
        c => int_op(IntOp::Sar, c, Cmm::Int(1)),
    }
}

fn box_float(c: Cmm) -> Cmm {
    Cmm::Alloc(TAG_FLOAT, vec![c])
}

fn unbox_float(c: Cmm) -> Cmm {
    match c {
        Cmm::Alloc(TAG_FLOAT, mut fields) if fields.len() == 1 => fields.pop().unwrap(),
        c => Cmm::Load(Chunk::Float, bx(c)),
    }
}

fn field_addr(base: Cmm, offset: i64) -> Cmm {
    int_op(IntOp::Add, base, Cmm::Int(offset))
}

fn seq(a: Cmm, b: Cmm) -> Cmm {
    Cmm::Seq(bx(a), bx(b))
}

fn is_atomic(c: &Cmm) -> bool {
    matches!(c, Cmm::Int(_) | Cmm::Symbol(_) | Cmm::Var(_))
}

struct Gen {
    phrase: u32,
    names: VarNames,
    data: Vec<DataItem>,
    globals: BTreeSet<String>,
    env: Option<VarId>,
}

pub fn generate_cmm(prog: CProgram) -> CmmProgram {
    let mut g = Gen {
        phrase: prog.phrase,
        names: prog.names,
        data: Vec::new(),
        globals: BTreeSet::new(),
        env: None,
    };
    for (sym, code) in &prog.static_closures {
        g.data
            .push(DataItem::StaticClosure(sym.clone(), code.clone()));
    }
    let mut functions: Vec<CmmFunction> =
        prog.functions.iter().map(|f| g.function(f, true)).collect();
    functions.push(g.function(&prog.entry, false));
    let mut data: Vec<DataItem> = g
        .globals
        .iter()
        .map(|s| DataItem::GlobalSlot(s.clone()))
        .collect();
    data.append(&mut g.data);
    CmmProgram {
        phrase: prog.phrase,
        entry: prog.entry.label.clone(),
        functions,
        data,
        names: g.names,
    }
}

impl Gen {
    fn function(&mut self, f: &CFunction, has_env: bool) -> CmmFunction {
        self.env = has_env.then(|| self.names.fresh("env"));
        let body = self.expr(&f.body);
        CmmFunction {
            name: f.label.clone(),
            params: f.params.clone(),
            env: self.env,
            body,
        }
    }

    fn temp(&mut self) -> VarId {
        self.names.fresh("t")
    }

    /// Names `e` for repeated use inside `body`.
    fn bind(&mut self, e: Cmm, body: impl FnOnce(&mut Gen, Cmm) -> Cmm) -> Cmm {
        if is_atomic(&e) {
            return body(self, e);
        }
        let t = self.temp();
        let inner = body(self, Cmm::Var(t));
        Cmm::Let(t, bx(e), bx(inner))
    }

    fn constant(&mut self, c: &Const) -> Cmm {
        match c {
            Const::Int(n) => Cmm::Int(n.wrapping_mul(2).wrapping_add(1)),
            Const::Bool(b) => Cmm::Int(if *b { 3 } else { 1 }),
            Const::Unit => Cmm::Int(1),
            Const::Float(f) => {
                let existing = self.data.iter().find_map(|d| match d {
                    DataItem::BoxedFloat(s, v) if v.to_bits() == f.to_bits() => Some(s.clone()),
                    _ => None,
                });
                let sym = existing.unwrap_or_else(|| {
                    let s = format!("nml_phrase{}_float{}", self.phrase, self.data.len());
                    self.data.push(DataItem::BoxedFloat(s.clone(), *f));
                    s
                });
                Cmm::Symbol(sym)
            }
            Const::String(text) => {
                let s = format!("nml_phrase{}_str{}", self.phrase, self.data.len());
                self.data.push(DataItem::Str(s.clone(), text.clone()));
                Cmm::Symbol(s)
            }
        }
    }

    fn env_var(&self) -> Cmm {
        Cmm::Var(self.env.expect("function has an environment"))
    }

    fn exprs(&mut self, cs: &[Clambda]) -> Vec<Cmm> {
        cs.iter().map(|c| self.expr(c)).collect()
    }

    fn expr(&mut self, c: &Clambda) -> Cmm {
        match c {
            Clambda::Var(x) => Cmm::Var(*x),
            Clambda::Global(s) => Cmm::Load(Chunk::Word, bx(Cmm::Symbol(s.clone()))),
            Clambda::Const(k) => self.constant(k),
            Clambda::StaticClosure(s) => Cmm::Symbol(s.clone()),
            Clambda::EnvParam => self.env_var(),
            Clambda::EnvField(n) => Cmm::Load(
                Chunk::Word,
                bx(field_addr(self.env_var(), 8 * (*n as i64 + 1))),
            ),
            Clambda::MakeClosure(code, caps) => {
                let mut fields = vec![Cmm::Symbol(code.clone())];
                fields.extend(self.exprs(caps));
                Cmm::Alloc(TAG_CLOSURE, fields)
            }
            Clambda::DirectCall(f, args, env) => {
                let args = self.exprs(args);
                let env = self.expr(env);
                Cmm::CallSymbol {
                    name: f.clone(),
                    args,
                    env: Some(bx(env)),
                }
            }
            Clambda::IndirectCall(f, args) => {
                let args = self.exprs(args);
                let f = self.expr(f);
                self.apply(f, args)
            }
            Clambda::Let(x, a, body) => {
                let a = self.expr(a);
                Cmm::Let(*x, bx(a), bx(self.expr(body)))
            }
            Clambda::Prim(op, args) => {
                let args = self.exprs(args);
                self.prim(op, args)
            }
            Clambda::If(c, t, e) => {
                let c = self.cond(c);
                let t = self.expr(t);
                Cmm::If(Box::new(c), bx(t), bx(self.expr(e)))
            }
            Clambda::While(c, body) => {
                let c = self.cond(c);
                let body = self.expr(body);
                seq(
                    Cmm::Loop(bx(Cmm::If(Box::new(c), bx(body), bx(Cmm::Exit)))),
                    Cmm::Int(1),
                )
            }
            Clambda::For(i, lo, hi, body) => {
                let lo = self.expr(lo);
                let hi = self.expr(hi);
                let body = self.expr(body);
                let h = self.temp();
                let cur = self.temp();
                // the counter is compared before the increment so that
                // `hi = max_int` terminates
                let step = Cmm::Let(
                    cur,
                    bx(Cmm::Var(*i)),
                    bx(seq(
                        Cmm::Assign(*i, bx(int_op(IntOp::Add, Cmm::Var(*i), Cmm::Int(2)))),
                        Cmm::If(
                            Box::new(Cond::Cmp(Cmp::Ne, Cmm::Var(cur), Cmm::Var(h))),
                            bx(Cmm::Int(1)),
                            bx(Cmm::Exit),
                        ),
                    )),
                );
                let lp = Cmm::Loop(bx(seq(body, step)));
                let guarded = Cmm::If(
                    Box::new(Cond::Cmp(Cmp::Le, Cmm::Var(*i), Cmm::Var(h))),
                    bx(lp),
                    bx(Cmm::Int(1)),
                );
                Cmm::Let(
                    *i,
                    bx(lo),
                    bx(Cmm::Let(h, bx(hi), bx(seq(guarded, Cmm::Int(1))))),
                )
            }
            Clambda::Seq(a, b) => {
                let a = self.expr(a);
                seq(a, self.expr(b))
            }
        }
    }

    fn apply(&mut self, f: Cmm, mut args: Vec<Cmm>) -> Cmm {
        if args.len() == 1 {
            return Cmm::CallIndirect {
                closure: bx(f),
                arg: bx(args.pop().unwrap()),
            };
        }
        // later arguments are evaluated first, so bind them outermost
        let first = args.remove(0);
        let mut temps = Vec::new();
        let mut binders = Vec::new();
        for a in args.into_iter().rev() {
            if is_atomic(&a) {
                temps.push(a);
            } else {
                let t = self.temp();
                binders.push((t, a));
                temps.push(Cmm::Var(t));
            }
        }
        temps.reverse();
        let mut call = Cmm::CallIndirect {
            closure: bx(f),
            arg: bx(first),
        };
        for t in temps {
            call = Cmm::CallIndirect {
                closure: bx(call),
                arg: bx(t),
            };
        }
        for (t, a) in binders.into_iter().rev() {
            call = Cmm::Let(t, bx(a), bx(call));
        }
        call
    }

    fn cond(&mut self, c: &Clambda) -> Cond {
        match c {
            Clambda::Prim(PrimOp::CmpInt(k), args) => {
                let mut args = self.exprs(args);
                let b = args.pop().unwrap();
                Cond::Cmp(*k, args.pop().unwrap(), b)
            }
            Clambda::Prim(PrimOp::Not, args) => Cond::Not(Box::new(self.cond(&args[0]))),
            Clambda::If(a, b, e) if **e == Clambda::Const(Const::Bool(false)) => {
                let a = self.cond(a);
                Cond::And(Box::new(a), Box::new(self.cond(b)))
            }
            Clambda::If(a, t, b) if **t == Clambda::Const(Const::Bool(true)) => {
                let a = self.cond(a);
                Cond::Or(Box::new(a), Box::new(self.cond(b)))
            }
            other => Cond::Cmp(Cmp::Ne, self.expr(other), Cmm::Int(1)),
        }
    }

    fn division(&mut self, op: IntOp, a: Cmm, b: Cmm) -> Cmm {
        let nonzero = matches!(b, Cmm::Int(k) if k != 1);
        self.bind(b, |g, b| {
            g.bind(a, |_, a| {
                let q = tag_int(int_op(op, untag_int(a), untag_int(b.clone())));
                if nonzero {
                    q
                } else {
                    let check = Cmm::If(
                        Box::new(Cond::Cmp(Cmp::Eq, b, Cmm::Int(1))),
                        bx(Cmm::Trap(TrapKind::DivideByZero)),
                        bx(Cmm::Int(1)),
                    );
                    seq(check, q)
                }
            })
        })
    }

    fn bounds_check(arr: &Cmm, idx: &Cmm) -> Cmm {
        let limit = int_op(
            IntOp::Shr,
            Cmm::Load(Chunk::Word, bx(field_addr(arr.clone(), -8))),
            Cmm::Int(9),
        );
        Cmm::If(
            Box::new(Cond::CmpUnsigned(Cmp::Ge, idx.clone(), limit)),
            bx(Cmm::Trap(TrapKind::Bounds)),
            bx(Cmm::Int(1)),
        )
    }

    fn element_addr(arr: Cmm, idx: Cmm) -> Cmm {
        int_op(
            IntOp::Add,
            int_op(IntOp::Add, arr, int_op(IntOp::Shl, idx, Cmm::Int(2))),
            Cmm::Int(-4),
        )
    }

    fn runtime(name: &str, args: Vec<Cmm>) -> Cmm {
        Cmm::CallSymbol {
            name: format!("nml_rt_{}", name),
            args,
            env: None,
        }
    }

    fn prim(&mut self, op: &PrimOp, mut args: Vec<Cmm>) -> Cmm {
        let mut next = || args.remove(0);
        match op {
            PrimOp::AddInt => {
                let (a, b) = (next(), next());
                match (a, b) {
                    (Cmm::Int(x), Cmm::Int(y)) => Cmm::Int(x.wrapping_add(y).wrapping_sub(1)),
                    (a, Cmm::Int(y)) => int_op(IntOp::Add, a, Cmm::Int(y.wrapping_sub(1))),
                    (Cmm::Int(x), b) if is_atomic(&b) => {
                        int_op(IntOp::Add, b, Cmm::Int(x.wrapping_sub(1)))
                    }
                    (a, b) => int_op(IntOp::Add, int_op(IntOp::Add, a, b), Cmm::Int(-1)),
                }
            }
            PrimOp::SubInt => {
                let (a, b) = (next(), next());
                match (a, b) {
                    (a, Cmm::Int(y)) => int_op(IntOp::Sub, a, Cmm::Int(y.wrapping_sub(1))),
                    (a, b) => int_op(IntOp::Add, int_op(IntOp::Sub, a, b), Cmm::Int(1)),
                }
            }
            PrimOp::MulInt => {
                let (a, b) = (next(), next());
                let prod = int_op(IntOp::Mul, int_op(IntOp::Sub, a, Cmm::Int(1)), untag_int(b));
                int_op(IntOp::Add, prod, Cmm::Int(1))
            }
            PrimOp::DivInt => {
                let (a, b) = (next(), next());
                self.division(IntOp::Div, a, b)
            }
            PrimOp::ModInt => {
                let (a, b) = (next(), next());
                self.division(IntOp::Mod, a, b)
            }
            PrimOp::NegInt => int_op(IntOp::Sub, Cmm::Int(2), next()),
            PrimOp::AddFloat | PrimOp::SubFloat | PrimOp::MulFloat | PrimOp::DivFloat => {
                let fop = match op {
                    PrimOp::AddFloat => FloatOp::Add,
                    PrimOp::SubFloat => FloatOp::Sub,
                    PrimOp::MulFloat => FloatOp::Mul,
                    _ => FloatOp::Div,
                };
                let (a, b) = (next(), next());
                box_float(Cmm::FloatOp(fop, bx(unbox_float(a)), bx(unbox_float(b))))
            }
            PrimOp::NegFloat => box_float(Cmm::FloatUn(FloatUn::Neg, bx(unbox_float(next())))),
            PrimOp::Sqrt => box_float(Cmm::FloatUn(FloatUn::Sqrt, bx(unbox_float(next())))),
            PrimOp::CmpInt(k) => {
                let (a, b) = (next(), next());
                tag_int(Cmm::Cmp(*k, bx(a), bx(b)))
            }
            PrimOp::Not => int_op(IntOp::Xor, next(), Cmm::Int(2)),
            PrimOp::MakeBlock(_) => Cmm::Alloc(TAG_TUPLE, args),
            PrimOp::Field(n) => Cmm::Load(Chunk::Word, bx(field_addr(next(), 8 * *n as i64))),
            PrimOp::ArrayMake => Self::runtime("array_make", args),
            PrimOp::ArrayGet => {
                let (a, i) = (next(), next());
                self.bind(i, |g, i| {
                    g.bind(a, |_, a| {
                        let check = Self::bounds_check(&a, &i);
                        seq(check, Cmm::Load(Chunk::Word, bx(Self::element_addr(a, i))))
                    })
                })
            }
            PrimOp::ArraySet => {
                let (a, i, v) = (next(), next(), next());
                self.bind(v, |g, v| {
                    g.bind(i, |g, i| {
                        g.bind(a, |_, a| {
                            let check = Self::bounds_check(&a, &i);
                            seq(
                                check,
                                Cmm::Store(Chunk::Word, bx(Self::element_addr(a, i)), bx(v)),
                            )
                        })
                    })
                })
            }
            PrimOp::ArrayLength => {
                let hdr = Cmm::Load(Chunk::Word, bx(field_addr(next(), -8)));
                int_op(IntOp::Or, int_op(IntOp::Shr, hdr, Cmm::Int(9)), Cmm::Int(1))
            }
            PrimOp::StringLength => {
                // byte length = 8 * wosize - 1 - (padding byte)
                self.bind(next(), |g, s| {
                    let wosize = int_op(
                        IntOp::Shr,
                        Cmm::Load(Chunk::Word, bx(field_addr(s.clone(), -8))),
                        Cmm::Int(10),
                    );
                    let last = g.temp();
                    let last_offset = int_op(
                        IntOp::Sub,
                        int_op(IntOp::Shl, wosize, Cmm::Int(3)),
                        Cmm::Int(1),
                    );
                    let pad = Cmm::Load(Chunk::Byte, bx(int_op(IntOp::Add, s, Cmm::Var(last))));
                    Cmm::Let(
                        last,
                        bx(last_offset),
                        bx(tag_int(int_op(IntOp::Sub, Cmm::Var(last), pad))),
                    )
                })
            }
            PrimOp::PrintInt => Self::runtime("print_int", args),
            PrimOp::PrintFloat => Self::runtime("print_float", args),
            PrimOp::PrintString => Self::runtime("print_string", args),
            PrimOp::PrintNewline => Self::runtime("print_newline", args),
            PrimOp::FloatOfInt => box_float(Cmm::IntToFloat(bx(untag_int(next())))),
            PrimOp::IntOfFloat => tag_int(Cmm::FloatToInt(bx(unbox_float(next())))),
            PrimOp::SetGlobal(s) => {
                self.globals.insert(s.clone());
                seq(
                    Cmm::Store(Chunk::Word, bx(Cmm::Symbol(s.clone())), bx(next())),
                    Cmm::Int(1),
                )
            }
        }
    }
}

impl Cmm {
    pub fn to_sexp(&self, names: &VarNames) -> Sexp {
        let s = |c: &Cmm| c.to_sexp(names);
        let v = |x: &VarId| Sexp::atom(names.display(*x));
        match self {
            Cmm::Int(n) => Sexp::atom(n.to_string()),
            Cmm::Float(f) => Sexp::atom(crate::rt::format_float(*f)),
            Cmm::Symbol(sym) => Sexp::atom(format!("\"{}\"", sym)),
            Cmm::Var(x) => v(x),
            Cmm::Let(x, a, b) => Sexp::list("let", [Sexp::List(vec![v(x), s(a)]), s(b)]),
            Cmm::Assign(x, a) => Sexp::list("assign", [v(x), s(a)]),
            Cmm::Load(chunk, a) => Sexp::list(&format!("load{}", chunk_suffix(*chunk)), [s(a)]),
            Cmm::Store(chunk, a, b) => {
                Sexp::list(&format!("store{}", chunk_suffix(*chunk)), [s(a), s(b)])
            }
            Cmm::Alloc(tag, fields) => Sexp::list(
                "alloc",
                std::iter::once(Sexp::atom(format!("tag{}", tag))).chain(fields.iter().map(s)),
            ),
            Cmm::IntOp(op, a, b) => Sexp::list(int_op_name(*op), [s(a), s(b)]),
            Cmm::Cmp(c, a, b) => Sexp::list(c.name(), [s(a), s(b)]),
            Cmm::FloatOp(op, a, b) => Sexp::list(
                match op {
                    FloatOp::Add => "+f",
                    FloatOp::Sub => "-f",
                    FloatOp::Mul => "*f",
                    FloatOp::Div => "/f",
                },
                [s(a), s(b)],
            ),
            Cmm::FloatUn(op, a) => Sexp::list(
                match op {
                    FloatUn::Neg => "negf",
                    FloatUn::Sqrt => "sqrtf",
                },
                [s(a)],
            ),
            Cmm::IntToFloat(a) => Sexp::list("floatofint", [s(a)]),
            Cmm::FloatToInt(a) => Sexp::list("intoffloat", [s(a)]),
            Cmm::CallSymbol { name, args, env } => Sexp::list(
                "call",
                std::iter::once(Sexp::atom(format!("\"{}\"", name)))
                    .chain(args.iter().map(s))
                    .chain(env.iter().map(|e| Sexp::list("env", [s(e)]))),
            ),
            Cmm::CallIndirect { closure, arg } => Sexp::list("apply", [s(closure), s(arg)]),
            Cmm::If(c, t, e) => Sexp::list("if", [c.to_sexp(names), s(t), s(e)]),
            Cmm::Loop(body) => Sexp::list("loop", [s(body)]),
            Cmm::Exit => Sexp::atom("exit"),
            Cmm::Seq(a, b) => Sexp::list("seq", [s(a), s(b)]),
            Cmm::Trap(k) => Sexp::list("trap", [Sexp::atom(k.code().to_string())]),
        }
    }

    /// The machine type of the value, given the types of variables in scope.
    pub fn mtype(&self, var_type: &dyn Fn(VarId) -> MType) -> MType {
        match self {
            Cmm::Float(_)
            | Cmm::Load(Chunk::Float, _)
            | Cmm::FloatOp(..)
            | Cmm::FloatUn(..)
            | Cmm::IntToFloat(_) => MType::Float,
            Cmm::Var(x) => var_type(*x),
            Cmm::Let(_, _, body) => body.mtype(var_type),
            Cmm::Seq(_, b) => b.mtype(var_type),
            Cmm::If(_, t, e) => match **t {
                Cmm::Exit | Cmm::Trap(_) => e.mtype(var_type),
                _ => t.mtype(var_type),
            },
            _ => MType::Int,
        }
    }
}

fn chunk_suffix(c: Chunk) -> &'static str {
    match c {
        Chunk::Word => "",
        Chunk::Float => " float64",
        Chunk::Byte => " byte",
    }
}

fn int_op_name(op: IntOp) -> &'static str {
    match op {
        IntOp::Add => "+",
        IntOp::Sub => "-",
        IntOp::Mul => "*",
        IntOp::Div => "/",
        IntOp::Mod => "mod",
        IntOp::And => "and",
        IntOp::Or => "or",
        IntOp::Xor => "xor",
        IntOp::Shl => "<<",
        IntOp::Sar => ">>s",
        IntOp::Shr => ">>u",
    }
}

impl Cond {
    pub fn to_sexp(&self, names: &VarNames) -> Sexp {
        match self {
            Cond::Cmp(c, a, b) => Sexp::list(c.name(), [a.to_sexp(names), b.to_sexp(names)]),
            Cond::CmpUnsigned(c, a, b) => Sexp::list(
                &format!("{}u", c.name()),
                [a.to_sexp(names), b.to_sexp(names)],
            ),
            Cond::Not(c) => Sexp::list("not", [c.to_sexp(names)]),
            Cond::And(a, b) => Sexp::list("&&", [a.to_sexp(names), b.to_sexp(names)]),
            Cond::Or(a, b) => Sexp::list("||", [a.to_sexp(names), b.to_sexp(names)]),
        }
    }
}

impl CmmProgram {
    /// The `--dump-ir cmm` rendering.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for d in &self.data {
            let line = match d {
                DataItem::GlobalSlot(s) => format!("(data \"{}\" (int 1))", s),
                DataItem::BoxedFloat(s, f) => {
                    format!("(data \"{}\" (float {}))", s, crate::rt::format_float(*f))
                }
                DataItem::Str(s, text) => format!("(data \"{}\" (string {:?}))", s, text),
                DataItem::StaticClosure(s, code) => {
                    format!("(data \"{}\" (closure \"{}\"))", s, code)
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
        for f in &self.functions {
            let mut params: Vec<Sexp> = f
                .params
                .iter()
                .map(|p| Sexp::atom(self.names.display(*p)))
                .collect();
            if let Some(e) = f.env {
                params.push(Sexp::atom(self.names.display(e)));
            }
            let sexp = Sexp::list(
                "function",
                [
                    Sexp::atom(format!("\"{}\"", f.name)),
                    Sexp::List(params),
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
    use crate::nativegen::clambda::closure_convert;

    fn cmm(src: &str) -> CmmProgram {
        let ast = parse_phrase(src).unwrap();
        let (tt, _) = infer_phrase(&TypeEnv::new(), &ast, 1).unwrap();
        let mut l = translate(&tt);
        l.body = simplify(l.body);
        generate_cmm(closure_convert(l, 1))
    }

    #[test]
    fn tagged_addition_of_a_variable_and_a_constant() {
        let p = cmm("fun x -> x + 1;;");
        let f = &p.functions[0];
        assert_eq!(
            f.body,
            Cmm::IntOp(IntOp::Add, bx(Cmm::Var(f.params[0])), bx(Cmm::Int(2)))
        );
    }

    #[test]
    fn float_literal_becomes_static_boxed_data() {
        let p = cmm("1.5;;");
        assert!(p
            .data
            .iter()
            .any(|d| matches!(d, DataItem::BoxedFloat(_, f) if *f == 1.5)));
        assert!(matches!(p.functions.last().unwrap().body, Cmm::Symbol(_)));
    }

    #[test]
    fn array_access_is_bounds_checked() {
        let p = cmm("fun a -> a.(1);;");
        let text = p.dump();
        assert!(text.contains(">=u"), "{}", text);
        assert!(text.contains("(trap 2)"), "{}", text);
    }

    #[test]
    fn division_by_a_nonzero_constant_has_no_check() {
        assert!(!cmm("fun x -> x / 3;;").dump().contains("trap"));
        assert!(cmm("fun x -> 3 / x;;").dump().contains("(trap 1)"));
    }

    #[test]
    fn definitions_get_global_slots() {
        let p = cmm("let x = 5;;");
        assert_eq!(p.data, vec![DataItem::GlobalSlot("nml_phrase1_x".into())]);
    }

    #[test]
    fn nested_float_arithmetic_stays_unboxed() {
        let p = cmm("fun x -> x *. x +. 1.0;;");
        let text = p.dump();
        assert_eq!(text.matches("alloc").count(), 1, "{}", text);
    }
}
