//! Mach: machine-level instructions over virtual registers, organised as a
//! control-flow graph of basic blocks.
//!
//! Instructions are generic over their register operand so that the same
//! shapes serve before allocation (`VReg`) and after it (`Loc`).

use std::collections::{HashMap, HashSet};
use std::fmt;

use super::cmm::{
    header, Chunk, Cmm, CmmFunction, CmmProgram, Cond, FloatOp, FloatUn, IntOp, MType,
};
use crate::lambda::{Cmp, VarId};
use crate::rt::TrapKind;

pub type VReg = u32;
pub type BlockId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand<R> {
    Reg(R),
    Imm(i32),
}

/// `base + index * scale + disp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Addr<R> {
    pub base: R,
    pub index: Option<(R, u8)>,
    pub disp: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CallTarget {
    Symbol(String),
    /// Through the code pointer at offset 0 of the environment register.
    Indirect,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instr<R> {
    /// Defines the parameters (then the environment) from the calling convention.
    EntryArgs(Vec<R>),
    Move {
        dst: R,
        src: R,
    },
    Const {
        dst: R,
        value: i64,
    },
    ConstFloat {
        dst: R,
        bits: u64,
    },
    Symbol {
        dst: R,
        name: String,
    },
    Load {
        dst: R,
        chunk: Chunk,
        addr: Addr<R>,
    },
    Store {
        src: R,
        chunk: Chunk,
        addr: Addr<R>,
    },
    Lea {
        dst: R,
        addr: Addr<R>,
    },
    IntOp {
        op: IntOp,
        dst: R,
        a: R,
        b: Operand<R>,
    },
    /// Signed comparison producing 0 or 1.
    Cmp {
        cmp: Cmp,
        dst: R,
        a: R,
        b: Operand<R>,
    },
    FloatOp {
        op: FloatOp,
        dst: R,
        a: R,
        b: R,
    },
    FloatUn {
        op: FloatUn,
        dst: R,
        a: R,
    },
    IntToFloat {
        dst: R,
        src: R,
    },
    FloatToInt {
        dst: R,
        src: R,
    },
    /// Reserves `words` words; `dst` points just past the first header.
    /// Each header is given by its word offset within the reservation.
    Alloc {
        dst: R,
        words: usize,
        headers: Vec<(usize, i64)>,
    },
    Call {
        target: CallTarget,
        args: Vec<R>,
        env: Option<R>,
        dst: R,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term<R> {
    Jump(BlockId),
    Branch {
        cmp: Cmp,
        unsigned: bool,
        a: R,
        b: Operand<R>,
        ifso: BlockId,
        ifnot: BlockId,
    },
    Return(R),
    Trap(TrapKind),
}

#[derive(Clone, Debug)]
pub struct Block<R> {
    pub instrs: Vec<Instr<R>>,
    pub term: Term<R>,
}

#[derive(Clone, Debug)]
pub struct MachFn {
    pub name: String,
    pub blocks: Vec<Block<VReg>>,
    pub entry: BlockId,
    pub vreg_types: Vec<MType>,
    /// The last entry argument is the closure environment.
    pub has_env: bool,
}

/// Registers clobbered by an instruction beyond its own destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clobber {
    None,
    /// Everything allocatable.
    All,
    /// The accumulator only (allocation).
    Rax,
    /// The accumulator and rdx (division).
    RaxRdx,
}

impl<R: Copy> Addr<R> {
    pub fn map<S>(&self, f: &mut impl FnMut(R) -> S) -> Addr<S> {
        Addr {
            base: f(self.base),
            index: self.index.map(|(r, s)| (f(r), s)),
            disp: self.disp,
        }
    }

    fn regs(&self) -> Vec<R> {
        let mut v = vec![self.base];
        v.extend(self.index.map(|(r, _)| r));
        v
    }
}

impl<R: Copy> Operand<R> {
    pub fn map<S>(&self, f: &mut impl FnMut(R) -> S) -> Operand<S> {
        match self {
            Operand::Reg(r) => Operand::Reg(f(*r)),
            Operand::Imm(i) => Operand::Imm(*i),
        }
    }

    fn regs(&self) -> Vec<R> {
        match self {
            Operand::Reg(r) => vec![*r],
            Operand::Imm(_) => vec![],
        }
    }
}

impl<R: Copy> Instr<R> {
    pub fn map<S>(&self, mut f: impl FnMut(R) -> S) -> Instr<S> {
        match self {
            Instr::EntryArgs(rs) => Instr::EntryArgs(rs.iter().map(|r| f(*r)).collect()),
            Instr::Move { dst, src } => Instr::Move {
                dst: f(*dst),
                src: f(*src),
            },
            Instr::Const { dst, value } => Instr::Const {
                dst: f(*dst),
                value: *value,
            },
            Instr::ConstFloat { dst, bits } => Instr::ConstFloat {
                dst: f(*dst),
                bits: *bits,
            },
            Instr::Symbol { dst, name } => Instr::Symbol {
                dst: f(*dst),
                name: name.clone(),
            },
            Instr::Load { dst, chunk, addr } => Instr::Load {
                dst: f(*dst),
                chunk: *chunk,
                addr: addr.map(&mut f),
            },
            Instr::Store { src, chunk, addr } => Instr::Store {
                src: f(*src),
                chunk: *chunk,
                addr: addr.map(&mut f),
            },
            Instr::Lea { dst, addr } => Instr::Lea {
                dst: f(*dst),
                addr: addr.map(&mut f),
            },
            Instr::IntOp { op, dst, a, b } => Instr::IntOp {
                op: *op,
                dst: f(*dst),
                a: f(*a),
                b: b.map(&mut f),
            },
            Instr::Cmp { cmp, dst, a, b } => Instr::Cmp {
                cmp: *cmp,
                dst: f(*dst),
                a: f(*a),
                b: b.map(&mut f),
            },
            Instr::FloatOp { op, dst, a, b } => Instr::FloatOp {
                op: *op,
                dst: f(*dst),
                a: f(*a),
                b: f(*b),
            },
            Instr::FloatUn { op, dst, a } => Instr::FloatUn {
                op: *op,
                dst: f(*dst),
                a: f(*a),
            },
            Instr::IntToFloat { dst, src } => Instr::IntToFloat {
                dst: f(*dst),
                src: f(*src),
            },
            Instr::FloatToInt { dst, src } => Instr::FloatToInt {
                dst: f(*dst),
                src: f(*src),
            },
            Instr::Alloc {
                dst,
                words,
                headers,
            } => Instr::Alloc {
                dst: f(*dst),
                words: *words,
                headers: headers.clone(),
            },
            Instr::Call {
                target,
                args,
                env,
                dst,
            } => Instr::Call {
                target: target.clone(),
                args: args.iter().map(|r| f(*r)).collect(),
                env: env.map(&mut f),
                dst: f(*dst),
            },
        }
    }

    pub fn defs(&self) -> Vec<R> {
        match self {
            Instr::EntryArgs(rs) => rs.clone(),
            Instr::Store { .. } => vec![],
            Instr::Move { dst, .. }
            | Instr::Const { dst, .. }
            | Instr::ConstFloat { dst, .. }
            | Instr::Symbol { dst, .. }
            | Instr::Load { dst, .. }
            | Instr::Lea { dst, .. }
            | Instr::IntOp { dst, .. }
            | Instr::Cmp { dst, .. }
            | Instr::FloatOp { dst, .. }
            | Instr::FloatUn { dst, .. }
            | Instr::IntToFloat { dst, .. }
            | Instr::FloatToInt { dst, .. }
            | Instr::Alloc { dst, .. }
            | Instr::Call { dst, .. } => vec![*dst],
        }
    }

    pub fn uses(&self) -> Vec<R> {
        match self {
            Instr::EntryArgs(_)
            | Instr::Const { .. }
            | Instr::ConstFloat { .. }
            | Instr::Symbol { .. }
            | Instr::Alloc { .. } => vec![],
            Instr::Move { src, .. }
            | Instr::IntToFloat { src, .. }
            | Instr::FloatToInt { src, .. } => vec![*src],
            Instr::Load { addr, .. } | Instr::Lea { addr, .. } => addr.regs(),
            Instr::Store { src, addr, .. } => {
                let mut v = addr.regs();
                v.push(*src);
                v
            }
            Instr::IntOp { a, b, .. } | Instr::Cmp { a, b, .. } => {
                let mut v = vec![*a];
                v.extend(b.regs());
                v
            }
            Instr::FloatOp { a, b, .. } => vec![*a, *b],
            Instr::FloatUn { a, .. } => vec![*a],
            Instr::Call { args, env, .. } => {
                let mut v = args.clone();
                v.extend(*env);
                v
            }
        }
    }

    pub fn clobber(&self) -> Clobber {
        match self {
            Instr::Call { .. } => Clobber::All,
            Instr::Alloc { .. } => Clobber::Rax,
            Instr::IntOp {
                op: IntOp::Div | IntOp::Mod,
                ..
            } => Clobber::RaxRdx,
            _ => Clobber::None,
        }
    }

    /// Removable when its result is unused.
    fn is_pure(&self) -> bool {
        !matches!(
            self,
            Instr::EntryArgs(_)
                | Instr::Store { .. }
                | Instr::Call { .. }
                | Instr::Alloc { .. }
                | Instr::IntOp {
                    op: IntOp::Div | IntOp::Mod,
                    ..
                }
        )
    }
}

impl<R: Copy> Term<R> {
    pub fn map<S>(&self, mut f: impl FnMut(R) -> S) -> Term<S> {
        match self {
            Term::Jump(b) => Term::Jump(*b),
            Term::Branch {
                cmp,
                unsigned,
                a,
                b,
                ifso,
                ifnot,
            } => Term::Branch {
                cmp: *cmp,
                unsigned: *unsigned,
                a: f(*a),
                b: b.map(&mut f),
                ifso: *ifso,
                ifnot: *ifnot,
            },
            Term::Return(r) => Term::Return(f(*r)),
            Term::Trap(k) => Term::Trap(*k),
        }
    }

    pub fn uses(&self) -> Vec<R> {
        match self {
            Term::Branch { a, b, .. } => {
                let mut v = vec![*a];
                v.extend(b.regs());
                v
            }
            Term::Return(r) => vec![*r],
            Term::Jump(_) | Term::Trap(_) => vec![],
        }
    }

    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Term::Jump(b) => vec![*b],
            Term::Branch { ifso, ifnot, .. } => vec![*ifso, *ifnot],
            Term::Return(_) | Term::Trap(_) => vec![],
        }
    }
}

impl MachFn {
    /// Blocks reachable from the entry in reverse postorder. The not-taken
    /// successor of a branch is visited last so that it tends to follow.
    pub fn reverse_postorder(&self) -> Vec<BlockId> {
        let mut seen = vec![false; self.blocks.len()];
        let mut post = Vec::new();
        let mut stack = vec![(self.entry, 0usize)];
        seen[self.entry] = true;
        while let Some((b, i)) = stack.pop() {
            let mut succs = self.blocks[b].term.successors();
            succs.reverse();
            if i < succs.len() {
                stack.push((b, i + 1));
                let s = succs[i];
                if !seen[s] {
                    seen[s] = true;
                    stack.push((s, 0));
                }
            } else {
                post.push(b);
            }
        }
        post.reverse();
        post
    }

    pub fn is_leaf(&self) -> bool {
        !self
            .blocks
            .iter()
            .flat_map(|b| &b.instrs)
            .any(|i| matches!(i, Instr::Call { .. }))
    }

    pub fn alloc_count(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| &b.instrs)
            .filter(|i| matches!(i, Instr::Alloc { .. }))
            .count()
    }

    /// Removes pure instructions whose results are never read.
    pub fn eliminate_dead_code(&mut self) {
        loop {
            let mut used = HashSet::new();
            for b in &self.blocks {
                for i in &b.instrs {
                    used.extend(i.uses());
                }
                used.extend(b.term.uses());
            }
            let mut changed = false;
            for b in &mut self.blocks {
                let before = b.instrs.len();
                b.instrs
                    .retain(|i| !i.is_pure() || i.defs().iter().any(|d| used.contains(d)));
                changed |= b.instrs.len() != before;
            }
            if !changed {
                break;
            }
        }
    }

    pub fn dump(&self) -> String {
        let mut out = format!("{}:\n", self.name);
        for b in self.reverse_postorder() {
            out.push_str(&format!("  block{}:\n", b));
            for i in &self.blocks[b].instrs {
                out.push_str(&format!("    {}\n", i));
            }
            out.push_str(&format!("    {}\n", self.blocks[b].term));
        }
        out
    }
}

impl fmt::Display for Addr<VReg> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[v{}", self.base)?;
        if let Some((r, s)) = self.index {
            write!(f, " + v{}*{}", r, s)?;
        }
        if self.disp != 0 {
            write!(
                f,
                " {} {}",
                if self.disp < 0 { '-' } else { '+' },
                self.disp.unsigned_abs()
            )?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for Operand<VReg> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "v{}", r),
            Operand::Imm(i) => write!(f, "{}", i),
        }
    }
}

fn regs(rs: &[VReg]) -> String {
    rs.iter()
        .map(|r| format!("v{}", r))
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for Instr<VReg> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::EntryArgs(rs) => write!(f, "args {}", regs(rs)),
            Instr::Move { dst, src } => write!(f, "v{} := v{}", dst, src),
            Instr::Const { dst, value } => write!(f, "v{} := {}", dst, value),
            Instr::ConstFloat { dst, bits } => {
                write!(f, "v{} := float {}", dst, f64::from_bits(*bits))
            }
            Instr::Symbol { dst, name } => write!(f, "v{} := \"{}\"", dst, name),
            Instr::Load { dst, chunk, addr } => {
                write!(f, "v{} := load{} {}", dst, chunk_name(*chunk), addr)
            }
            Instr::Store { src, chunk, addr } => {
                write!(f, "store{} {} := v{}", chunk_name(*chunk), addr, src)
            }
            Instr::Lea { dst, addr } => write!(f, "v{} := lea {}", dst, addr),
            Instr::IntOp { op, dst, a, b } => write!(f, "v{} := {:?} v{}, {}", dst, op, a, b),
            Instr::Cmp { cmp, dst, a, b } => write!(f, "v{} := v{} {} {}", dst, a, cmp.name(), b),
            Instr::FloatOp { op, dst, a, b } => write!(f, "v{} := {:?}f v{}, v{}", dst, op, a, b),
            Instr::FloatUn { op, dst, a } => write!(f, "v{} := {:?}f v{}", dst, op, a),
            Instr::IntToFloat { dst, src } => write!(f, "v{} := float_of_int v{}", dst, src),
            Instr::FloatToInt { dst, src } => write!(f, "v{} := int_of_float v{}", dst, src),
            Instr::Alloc {
                dst,
                words,
                headers,
            } => {
                let hs: Vec<String> = headers
                    .iter()
                    .map(|(o, h)| format!("{}:{:#x}", o, h))
                    .collect();
                write!(f, "v{} := alloc {} [{}]", dst, words, hs.join(" "))
            }
            Instr::Call {
                target,
                args,
                env,
                dst,
            } => {
                let t = match target {
                    CallTarget::Symbol(s) => format!("\"{}\"", s),
                    CallTarget::Indirect => "[env]".into(),
                };
                write!(f, "v{} := call {}({})", dst, t, regs(args))?;
                if let Some(e) = env {
                    write!(f, " env v{}", e)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term<VReg> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Jump(b) => write!(f, "goto block{}", b),
            Term::Branch {
                cmp,
                unsigned,
                a,
                b,
                ifso,
                ifnot,
            } => write!(
                f,
                "if v{} {}{} {} goto block{} else block{}",
                a,
                cmp.name(),
                if *unsigned { "u" } else { "" },
                b,
                ifso,
                ifnot
            ),
            Term::Return(r) => write!(f, "return v{}", r),
            Term::Trap(k) => write!(f, "trap {}", k.code()),
        }
    }
}

pub fn chunk_name(c: Chunk) -> &'static str {
    match c {
        Chunk::Word => "",
        Chunk::Float => "f",
        Chunk::Byte => "b",
    }
}

struct Selector {
    blocks: Vec<Block<VReg>>,
    cur: BlockId,
    vreg_types: Vec<MType>,
    vars: HashMap<VarId, VReg>,
    var_regs: HashSet<VReg>,
    exits: Vec<BlockId>,
}

const OPEN: Term<VReg> = Term::Trap(TrapKind::Exhaustion);

fn imm32(c: &Cmm) -> Option<i32> {
    match c {
        Cmm::Int(n) => i32::try_from(*n).ok(),
        _ => None,
    }
}

pub fn select_instructions(prog: &CmmProgram) -> Vec<MachFn> {
    prog.functions.iter().map(select_function).collect()
}

pub fn select_function(f: &CmmFunction) -> MachFn {
    let mut s = Selector {
        blocks: Vec::new(),
        cur: 0,
        vreg_types: Vec::new(),
        vars: HashMap::new(),
        var_regs: HashSet::new(),
        exits: Vec::new(),
    };
    let entry = s.new_block();
    s.cur = entry;
    let mut args = Vec::new();
    for p in f.params.iter().chain(f.env.iter()) {
        let r = s.fresh(MType::Int);
        s.vars.insert(*p, r);
        s.var_regs.insert(r);
        args.push(r);
    }
    s.emit(Instr::EntryArgs(args));
    if let Some(r) = s.expr(&f.body) {
        s.terminate(Term::Return(r));
    }
    let mut m = MachFn {
        name: f.name.clone(),
        blocks: s.blocks,
        entry,
        vreg_types: s.vreg_types,
        has_env: f.env.is_some(),
    };
    m.eliminate_dead_code();
    m
}

impl Selector {
    fn new_block(&mut self) -> BlockId {
        self.blocks.push(Block {
            instrs: Vec::new(),
            term: OPEN,
        });
        self.blocks.len() - 1
    }

    fn fresh(&mut self, t: MType) -> VReg {
        self.vreg_types.push(t);
        (self.vreg_types.len() - 1) as VReg
    }

    fn emit(&mut self, i: Instr<VReg>) {
        self.blocks[self.cur].instrs.push(i);
    }

    fn terminate(&mut self, t: Term<VReg>) {
        self.blocks[self.cur].term = t;
    }

    /// Starts a block nothing jumps to, for code after a non-returning node.
    fn dead(&mut self) {
        let b = self.new_block();
        self.cur = b;
    }

    fn mtype(&self, e: &Cmm) -> MType {
        e.mtype(&|x| {
            self.vars
                .get(&x)
                .map(|r| self.vreg_types[*r as usize])
                .unwrap_or(MType::Int)
        })
    }

    fn constant(&mut self, value: i64) -> VReg {
        let dst = self.fresh(MType::Int);
        self.emit(Instr::Const { dst, value });
        dst
    }

    fn operand(&mut self, e: &Cmm) -> Option<Operand<VReg>> {
        match imm32(e) {
            Some(i) => Some(Operand::Imm(i)),
            None => Some(Operand::Reg(self.expr(e)?)),
        }
    }

    fn addr(&mut self, e: &Cmm) -> Option<Addr<VReg>> {
        if let Cmm::IntOp(IntOp::Add, x, d) = e {
            if let Some(disp) = imm32(d) {
                if let Cmm::IntOp(IntOp::Add, base, scaled) = &**x {
                    if let Cmm::IntOp(IntOp::Shl, idx, sh) = &**scaled {
                        if let Some(sh @ 0..=3) = imm32(sh) {
                            let i = self.expr(idx)?;
                            let b = self.expr(base)?;
                            return Some(Addr {
                                base: b,
                                index: Some((i, 1 << sh)),
                                disp,
                            });
                        }
                    }
                }
                let b = self.expr(x)?;
                return Some(Addr {
                    base: b,
                    index: None,
                    disp,
                });
            }
        }
        Some(Addr {
            base: self.expr(e)?,
            index: None,
            disp: 0,
        })
    }

    /// Selects code for `e`; `None` when control never reaches its end.
    fn expr(&mut self, e: &Cmm) -> Option<VReg> {
        match e {
            Cmm::Int(n) => Some(self.constant(*n)),
            Cmm::Float(x) => {
                let dst = self.fresh(MType::Float);
                self.emit(Instr::ConstFloat {
                    dst,
                    bits: x.to_bits(),
                });
                Some(dst)
            }
            Cmm::Symbol(name) => {
                let dst = self.fresh(MType::Int);
                self.emit(Instr::Symbol {
                    dst,
                    name: name.clone(),
                });
                Some(dst)
            }
            Cmm::Var(x) => Some(*self.vars.get(x).expect("bound Cmm variable")),
            Cmm::Let(x, a, body) => {
                let t = self.mtype(a);
                let mut v = self.expr(a)?;
                if self.var_regs.contains(&v) {
                    let copy = self.fresh(t);
                    self.emit(Instr::Move { dst: copy, src: v });
                    v = copy;
                }
                self.vars.insert(*x, v);
                self.var_regs.insert(v);
                self.expr(body)
            }
            Cmm::Assign(x, a) => {
                let v = self.expr(a)?;
                let dst = self.vars[x];
                self.emit(Instr::Move { dst, src: v });
                Some(self.constant(1))
            }
            Cmm::Load(chunk, a) => {
                let addr = self.addr(a)?;
                let dst = self.fresh(if *chunk == Chunk::Float {
                    MType::Float
                } else {
                    MType::Int
                });
                self.emit(Instr::Load {
                    dst,
                    chunk: *chunk,
                    addr,
                });
                Some(dst)
            }
            Cmm::Store(chunk, a, v) => {
                let src = self.expr(v)?;
                let addr = self.addr(a)?;
                self.emit(Instr::Store {
                    src,
                    chunk: *chunk,
                    addr,
                });
                Some(self.constant(1))
            }
            Cmm::Alloc(tag, fields) => {
                let mut vals = Vec::with_capacity(fields.len());
                for f in fields.iter().rev() {
                    vals.push(self.expr(f)?);
                }
                vals.reverse();
                let dst = self.fresh(MType::Int);
                let words = fields.len() + 1;
                self.emit(Instr::Alloc {
                    dst,
                    words,
                    headers: vec![(0, header(fields.len(), *tag))],
                });
                for (i, v) in vals.into_iter().enumerate() {
                    let chunk = if self.vreg_types[v as usize] == MType::Float {
                        Chunk::Float
                    } else {
                        Chunk::Word
                    };
                    let addr = Addr {
                        base: dst,
                        index: None,
                        disp: 8 * i as i32,
                    };
                    self.emit(Instr::Store {
                        src: v,
                        chunk,
                        addr,
                    });
                }
                Some(dst)
            }
            Cmm::IntOp(IntOp::Add, x, one) if imm32(one).is_some() && self.is_tagging(x) => {
                // 2x + k as a single lea
                let Cmm::IntOp(IntOp::Shl, inner, _) = &**x else {
                    unreachable!()
                };
                let v = self.expr(inner)?;
                let dst = self.fresh(MType::Int);
                let disp = imm32(one).unwrap();
                self.emit(Instr::Lea {
                    dst,
                    addr: Addr {
                        base: v,
                        index: Some((v, 1)),
                        disp,
                    },
                });
                Some(dst)
            }
            Cmm::IntOp(IntOp::Add, x, k)
                if imm32(k).is_some() && matches!(**x, Cmm::IntOp(IntOp::Add, ..)) =>
            {
                let Cmm::IntOp(IntOp::Add, a, b) = &**x else {
                    unreachable!()
                };
                let vb = self.expr(b)?;
                let va = self.expr(a)?;
                let dst = self.fresh(MType::Int);
                let disp = imm32(k).unwrap();
                self.emit(Instr::Lea {
                    dst,
                    addr: Addr {
                        base: va,
                        index: Some((vb, 1)),
                        disp,
                    },
                });
                Some(dst)
            }
            Cmm::IntOp(op, a, b) => {
                let b = match op {
                    IntOp::Div | IntOp::Mod | IntOp::Mul => Operand::Reg(self.expr(b)?),
                    _ => self.operand(b)?,
                };
                let a = self.expr(a)?;
                let dst = self.fresh(MType::Int);
                self.emit(Instr::IntOp { op: *op, dst, a, b });
                Some(dst)
            }
            Cmm::Cmp(cmp, a, b) => {
                let b = self.operand(b)?;
                let a = self.expr(a)?;
                let dst = self.fresh(MType::Int);
                self.emit(Instr::Cmp {
                    cmp: *cmp,
                    dst,
                    a,
                    b,
                });
                Some(dst)
            }
            Cmm::FloatOp(op, a, b) => {
                let b = self.expr(b)?;
                let a = self.expr(a)?;
                let dst = self.fresh(MType::Float);
                self.emit(Instr::FloatOp { op: *op, dst, a, b });
                Some(dst)
            }
            Cmm::FloatUn(op, a) => {
                let a = self.expr(a)?;
                let dst = self.fresh(MType::Float);
                self.emit(Instr::FloatUn { op: *op, dst, a });
                Some(dst)
            }
            Cmm::IntToFloat(a) => {
                let src = self.expr(a)?;
                let dst = self.fresh(MType::Float);
                self.emit(Instr::IntToFloat { dst, src });
                Some(dst)
            }
            Cmm::FloatToInt(a) => {
                let src = self.expr(a)?;
                let dst = self.fresh(MType::Int);
                self.emit(Instr::FloatToInt { dst, src });
                Some(dst)
            }
            Cmm::CallSymbol { name, args, env } => {
                let env = match env {
                    Some(e) => Some(self.expr(e)?),
                    None => None,
                };
                let mut vals = Vec::with_capacity(args.len());
                for a in args.iter().rev() {
                    vals.push(self.expr(a)?);
                }
                vals.reverse();
                let dst = self.fresh(MType::Int);
                self.emit(Instr::Call {
                    target: CallTarget::Symbol(name.clone()),
                    args: vals,
                    env,
                    dst,
                });
                Some(dst)
            }
            Cmm::CallIndirect { closure, arg } => {
                let a = self.expr(arg)?;
                let c = self.expr(closure)?;
                let dst = self.fresh(MType::Int);
                self.emit(Instr::Call {
                    target: CallTarget::Indirect,
                    args: vec![a],
                    env: Some(c),
                    dst,
                });
                Some(dst)
            }
            Cmm::If(c, t, el) => {
                let ty = self.mtype(e);
                let ifso = self.new_block();
                let ifnot = self.new_block();
                let join = self.new_block();
                self.cond(c, ifso, ifnot)?;
                let result = self.fresh(ty);
                let mut reached = false;
                for (block, arm) in [(ifso, t), (ifnot, el)] {
                    self.cur = block;
                    if let Some(v) = self.expr(arm) {
                        self.emit(Instr::Move {
                            dst: result,
                            src: v,
                        });
                        self.terminate(Term::Jump(join));
                        reached = true;
                    }
                }
                self.cur = join;
                reached.then_some(result)
            }
            Cmm::Loop(body) => {
                let head = self.new_block();
                let exit = self.new_block();
                self.terminate(Term::Jump(head));
                self.cur = head;
                self.exits.push(exit);
                if self.expr(body).is_some() {
                    self.terminate(Term::Jump(head));
                }
                self.exits.pop();
                self.cur = exit;
                Some(self.constant(1))
            }
            Cmm::Exit => {
                let target = *self.exits.last().expect("exit inside a loop");
                self.terminate(Term::Jump(target));
                self.dead();
                None
            }
            Cmm::Seq(a, b) => {
                self.expr(a)?;
                self.expr(b)
            }
            Cmm::Trap(k) => {
                self.terminate(Term::Trap(*k));
                self.dead();
                None
            }
        }
    }

    fn is_tagging(&self, x: &Cmm) -> bool {
        matches!(x, Cmm::IntOp(IntOp::Shl, _, k) if **k == Cmm::Int(1))
    }

    fn cond(&mut self, c: &Cond, ifso: BlockId, ifnot: BlockId) -> Option<()> {
        match c {
            Cond::Cmp(cmp, a, b) | Cond::CmpUnsigned(cmp, a, b) => {
                let unsigned = matches!(c, Cond::CmpUnsigned(..));
                let b = self.operand(b)?;
                let a = self.expr(a)?;
                self.terminate(Term::Branch {
                    cmp: *cmp,
                    unsigned,
                    a,
                    b,
                    ifso,
                    ifnot,
                });
            }
            Cond::Not(c) => self.cond(c, ifnot, ifso)?,
            Cond::And(a, b) => {
                let mid = self.new_block();
                self.cond(a, mid, ifnot)?;
                self.cur = mid;
                self.cond(b, ifso, ifnot)?;
            }
            Cond::Or(a, b) => {
                let mid = self.new_block();
                self.cond(a, ifso, mid)?;
                self.cur = mid;
                self.cond(b, ifso, ifnot)?;
            }
        }
        Some(())
    }
}

/// Merges the allocations of each straight-line run (no intervening call)
/// into one reservation; later blocks become offsets from the first.
pub fn combine_allocations(f: &mut MachFn) {
    for block in &mut f.blocks {
        let mut out: Vec<Instr<VReg>> = Vec::with_capacity(block.instrs.len());
        let mut open: Option<usize> = None;
        for instr in block.instrs.drain(..) {
            match instr {
                Instr::Alloc {
                    dst,
                    words,
                    headers,
                } => match open {
                    Some(at) => {
                        let Instr::Alloc {
                            dst: first,
                            words: total,
                            headers: hs,
                        } = &mut out[at]
                        else {
                            unreachable!()
                        };
                        let base = *total;
                        hs.extend(headers.iter().map(|(o, h)| (o + base, *h)));
                        *total += words;
                        let first = *first;
                        out.push(Instr::Lea {
                            dst,
                            addr: Addr {
                                base: first,
                                index: None,
                                disp: 8 * base as i32,
                            },
                        });
                    }
                    None => {
                        open = Some(out.len());
                        out.push(Instr::Alloc {
                            dst,
                            words,
                            headers,
                        });
                    }
                },
                Instr::Call { .. } => {
                    open = None;
                    out.push(instr);
                }
                other => out.push(other),
            }
        }
        block.instrs = out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{infer_phrase, parse_phrase, TypeEnv};
    use crate::lambda::{simplify, translate};
    use crate::nativegen::{clambda::closure_convert, cmm::generate_cmm};

    fn mach(src: &str) -> Vec<MachFn> {
        let ast = parse_phrase(src).unwrap();
        let (tt, _) = infer_phrase(&TypeEnv::new(), &ast, 1).unwrap();
        let mut l = translate(&tt);
        l.body = simplify(l.body);
        select_instructions(&generate_cmm(closure_convert(l, 1)))
    }

    #[test]
    fn unit_phrase_returns_constant_one() {
        let fs = mach("();;");
        let f = fs.last().unwrap();
        let b = &f.blocks[f.entry];
        assert_eq!(b.instrs.len(), 2, "{}", f.dump());
        assert!(matches!(b.instrs[1], Instr::Const { value: 1, .. }));
    }

    #[test]
    fn tuple_of_floats_allocates_three_blocks_then_combines() {
        let mut fs = mach("fun x -> (x +. 1.0, x *. 2.0);;");
        let f = &mut fs[0];
        assert_eq!(f.alloc_count(), 3);
        combine_allocations(f);
        assert_eq!(f.alloc_count(), 1, "{}", f.dump());
        let Some(Instr::Alloc { words, headers, .. }) = f
            .blocks
            .iter()
            .flat_map(|b| &b.instrs)
            .find(|i| matches!(i, Instr::Alloc { .. }))
        else {
            panic!()
        };
        assert_eq!(*words, 7);
        assert_eq!(headers.len(), 3);
    }

    #[test]
    fn rpo_starts_at_entry_and_covers_reachable_blocks() {
        let fs = mach("fun n -> if n > 0 then n else 0 - n;;");
        let f = &fs[0];
        let rpo = f.reverse_postorder();
        assert_eq!(rpo[0], f.entry);
        assert_eq!(rpo.len(), 4, "{}", f.dump());
    }
}
