//! Lowers allocated linear code to x86-64 instructions.
//!
//! Frame slots are addressed from rsp. r14 and r15 hold spilled operands
//! and intermediate results; xmm15 does the same for floats.

use std::collections::HashMap;

use super::x86::{AluOp, Cond, Label, Mem, Rm, ShiftOp, SseOp, X86Inst, XRm};
use super::JitError;
use crate::lambda::Cmp;
use crate::nativegen::arch::{Gpr, PReg, Xmm, ARG_REGS, ENV_REG, FLOAT_SCRATCH, SCRATCH, SCRATCH2};
use crate::nativegen::cmm::{Chunk, FloatOp, FloatUn, IntOp};
use crate::nativegen::linearize::{LInstr, LinearFn};
use crate::nativegen::mach::{Addr, BlockId, CallTarget, Instr, Operand};
use crate::nativegen::regalloc::Loc;

pub const RT_ALLOC: &str = "nml_rt_alloc";
pub const RT_TRAP: &str = "nml_rt_trap";
pub const RT_STACK_OVERFLOW: &str = "nml_rt_stack_overflow";

const SIGN_MASK: i64 = i64::MIN;

pub fn cond_code(cmp: Cmp, unsigned: bool) -> Cond {
    match (cmp, unsigned) {
        (Cmp::Eq, _) => Cond::E,
        (Cmp::Ne, _) => Cond::Ne,
        (Cmp::Lt, false) => Cond::L,
        (Cmp::Le, false) => Cond::Le,
        (Cmp::Gt, false) => Cond::G,
        (Cmp::Ge, false) => Cond::Ge,
        (Cmp::Lt, true) => Cond::B,
        (Cmp::Le, true) => Cond::Be,
        (Cmp::Gt, true) => Cond::A,
        (Cmp::Ge, true) => Cond::Ae,
    }
}

struct Lower<'a> {
    out: Vec<X86Inst>,
    frame: i32,
    labels: &'a mut HashMap<(usize, BlockId), Label>,
    next_label: &'a mut Label,
    fn_index: usize,
    has_env: bool,
}

fn slot(s: u32) -> Mem {
    Mem::base(Gpr::Rsp, 8 * s as i32)
}

fn gpr(l: Loc) -> Option<Gpr> {
    match l {
        Loc::Reg(PReg::Gpr(g)) => Some(g),
        _ => None,
    }
}

fn xmm(l: Loc) -> Option<Xmm> {
    match l {
        Loc::Reg(PReg::Xmm(x)) => Some(x),
        _ => None,
    }
}

fn rm(l: Loc) -> Rm {
    match l {
        Loc::Reg(PReg::Gpr(g)) => Rm::Reg(g),
        Loc::Stack(s) => Rm::Mem(slot(s)),
        Loc::Reg(PReg::Xmm(x)) => unreachable!("integer operand in {}", x),
    }
}

fn xrm(l: Loc) -> XRm {
    match l {
        Loc::Reg(PReg::Xmm(x)) => XRm::Reg(x),
        Loc::Stack(s) => XRm::Mem(slot(s)),
        Loc::Reg(PReg::Gpr(g)) => unreachable!("float operand in {}", g),
    }
}

/// Lowers one function. Block labels are numbered across the whole object
/// through `labels` and `next_label`.
pub fn lower_function(
    f: &LinearFn,
    fn_index: usize,
    labels: &mut HashMap<(usize, BlockId), Label>,
    next_label: &mut Label,
) -> Result<Vec<X86Inst>, JitError> {
    let mut l = Lower {
        out: Vec::new(),
        frame: f.frame_size() as i32,
        labels,
        next_label,
        fn_index,
        has_env: f.has_env,
    };
    if l.frame > 0 {
        l.out
            .push(X86Inst::AluImm(AluOp::Sub, Rm::Reg(Gpr::Rsp), l.frame));
    }
    if !f.leaf {
        l.out
            .push(X86Inst::Alu(AluOp::Cmp, Rm::Reg(Gpr::Rsp), Gpr::Rbp));
        l.out
            .push(X86Inst::JccSym(Cond::B, RT_STACK_OVERFLOW.into()));
    }
    let mut k = 0;
    while k < f.instrs.len() {
        // a constant returned at once goes straight to rax
        if let (LInstr::Op(Instr::Const { dst, value }), Some(LInstr::Return(r))) =
            (&f.instrs[k], f.instrs.get(k + 1))
        {
            if dst == r {
                l.instr(&LInstr::Op(Instr::Const {
                    dst: Loc::Reg(PReg::Gpr(Gpr::Rax)),
                    value: *value,
                }))?;
                l.instr(&LInstr::Return(Loc::Reg(PReg::Gpr(Gpr::Rax))))?;
                k += 2;
                continue;
            }
        }
        l.instr(&f.instrs[k])?;
        k += 1;
    }
    Ok(l.out)
}

impl Lower<'_> {
    fn label(&mut self, b: BlockId) -> Label {
        let key = (self.fn_index, b);
        if let Some(l) = self.labels.get(&key) {
            return *l;
        }
        let l = *self.next_label;
        *self.next_label += 1;
        self.labels.insert(key, l);
        l
    }

    fn emit(&mut self, i: X86Inst) {
        self.out.push(i);
    }

    /// The register holding an integer operand, loading spilled ones into `scratch`.
    fn int_reg(&mut self, l: Loc, scratch: Gpr) -> Gpr {
        match l {
            Loc::Reg(PReg::Gpr(g)) => g,
            Loc::Stack(s) => {
                self.emit(X86Inst::MovRM(scratch, slot(s)));
                scratch
            }
            Loc::Reg(PReg::Xmm(x)) => unreachable!("integer operand in {}", x),
        }
    }

    fn set_int(&mut self, dst: Loc, src: Gpr) {
        match dst {
            Loc::Reg(PReg::Gpr(g)) if g == src => {}
            Loc::Reg(PReg::Gpr(g)) => self.emit(X86Inst::MovRR(g, src)),
            Loc::Stack(s) => self.emit(X86Inst::MovMR(slot(s), src)),
            Loc::Reg(PReg::Xmm(x)) => unreachable!("integer result in {}", x),
        }
    }

    fn set_float(&mut self, dst: Loc, src: Xmm) {
        match dst {
            Loc::Reg(PReg::Xmm(x)) if x == src => {}
            Loc::Reg(PReg::Xmm(x)) => self.emit(X86Inst::Movapd(x, src)),
            Loc::Stack(s) => self.emit(X86Inst::MovsdStore(slot(s), src)),
            Loc::Reg(PReg::Gpr(g)) => unreachable!("float result in {}", g),
        }
    }

    fn load_float(&mut self, dst: Xmm, src: Loc) {
        match src {
            Loc::Reg(PReg::Xmm(x)) if x == dst => {}
            Loc::Reg(PReg::Xmm(x)) => self.emit(X86Inst::Movapd(dst, x)),
            Loc::Stack(s) => self.emit(X86Inst::MovsdLoad(dst, slot(s))),
            Loc::Reg(PReg::Gpr(g)) => unreachable!("float operand in {}", g),
        }
    }

    fn mov(&mut self, dst: Loc, src: Loc) {
        if dst == src {
            return;
        }
        match (dst, src) {
            (Loc::Reg(PReg::Gpr(_)) | Loc::Stack(_), Loc::Reg(PReg::Gpr(s))) => {
                self.set_int(dst, s)
            }
            (Loc::Reg(PReg::Gpr(d)), Loc::Stack(s)) => self.emit(X86Inst::MovRM(d, slot(s))),
            (Loc::Stack(d), Loc::Stack(s)) => {
                self.emit(X86Inst::MovRM(SCRATCH, slot(s)));
                self.emit(X86Inst::MovMR(slot(d), SCRATCH));
            }
            (_, Loc::Reg(PReg::Xmm(s))) => self.set_float(dst, s),
            (Loc::Reg(PReg::Xmm(d)), _) => self.load_float(d, src),
        }
    }

    /// Performs simultaneous moves; cycles are broken through r14.
    fn parallel_move(&mut self, moves: Vec<(Loc, Loc)>) {
        let mut pending: Vec<(Loc, Loc)> = moves.into_iter().filter(|(d, s)| d != s).collect();
        while !pending.is_empty() {
            let ready = pending
                .iter()
                .position(|(d, _)| !pending.iter().any(|(_, s)| s == d));
            match ready {
                Some(k) => {
                    let (d, s) = pending.remove(k);
                    self.mov(d, s);
                }
                None => {
                    let (_, s) = pending[0];
                    let tmp = match s {
                        Loc::Reg(PReg::Xmm(_)) => Loc::Reg(PReg::Xmm(FLOAT_SCRATCH)),
                        _ => Loc::Reg(PReg::Gpr(SCRATCH)),
                    };
                    self.mov(tmp, s);
                    for m in pending.iter_mut() {
                        if m.1 == s {
                            m.1 = tmp;
                        }
                    }
                }
            }
        }
    }

    /// A memory operand; spilled base and index go through r14 and r15.
    fn mem(&mut self, a: &Addr<Loc>) -> Mem {
        let base = self.int_reg(a.base, SCRATCH);
        let index = a.index.map(|(i, s)| (self.int_reg(i, SCRATCH2), s));
        Mem {
            base,
            index,
            disp: a.disp,
        }
    }

    fn compare(&mut self, a: Loc, b: &Operand<Loc>) {
        match b {
            Operand::Imm(i) => self.emit(X86Inst::AluImm(AluOp::Cmp, rm(a), *i)),
            Operand::Reg(b) => match (a, *b) {
                (_, Loc::Reg(PReg::Gpr(rb))) => self.emit(X86Inst::Alu(AluOp::Cmp, rm(a), rb)),
                (Loc::Reg(PReg::Gpr(ra)), Loc::Stack(s)) => {
                    self.emit(X86Inst::AluRM(AluOp::Cmp, ra, slot(s)))
                }
                (_, b) => {
                    let rb = self.int_reg(b, SCRATCH);
                    self.emit(X86Inst::Alu(AluOp::Cmp, rm(a), rb));
                }
            },
        }
    }

    fn instr(&mut self, i: &LInstr) -> Result<(), JitError> {
        match i {
            LInstr::Label(b) => {
                let l = self.label(*b);
                self.emit(X86Inst::Label(l));
            }
            LInstr::Op(op) => self.op(op)?,
            LInstr::Save(r, s) => match r {
                PReg::Gpr(g) => self.emit(X86Inst::MovMR(slot(*s), *g)),
                PReg::Xmm(x) => self.emit(X86Inst::MovsdStore(slot(*s), *x)),
            },
            LInstr::Restore(r, s) => match r {
                PReg::Gpr(g) => self.emit(X86Inst::MovRM(*g, slot(*s))),
                PReg::Xmm(x) => self.emit(X86Inst::MovsdLoad(*x, slot(*s))),
            },
            LInstr::Jump(b) => {
                let l = self.label(*b);
                self.emit(X86Inst::Jmp(l));
            }
            LInstr::CondJump {
                cmp,
                unsigned,
                a,
                b,
                target,
            } => {
                self.compare(*a, b);
                let l = self.label(*target);
                self.emit(X86Inst::Jcc(cond_code(*cmp, *unsigned), l));
            }
            LInstr::Return(r) => {
                self.mov(Loc::Reg(PReg::Gpr(Gpr::Rax)), *r);
                if self.frame > 0 {
                    self.emit(X86Inst::AluImm(AluOp::Add, Rm::Reg(Gpr::Rsp), self.frame));
                }
                self.emit(X86Inst::Ret);
            }
            LInstr::Trap(k) => {
                self.emit(X86Inst::MovRI(Gpr::Rdi, k.code() as i64));
                self.emit(X86Inst::JmpSym(RT_TRAP.into()));
            }
        }
        Ok(())
    }

    fn op(&mut self, op: &Instr<Loc>) -> Result<(), JitError> {
        match op {
            Instr::EntryArgs(locs) => {
                let mut moves = Vec::new();
                for (k, dst) in locs.iter().enumerate() {
                    let src = if self.has_env && k + 1 == locs.len() {
                        ENV_REG
                    } else {
                        ARG_REGS[k]
                    };
                    moves.push((*dst, Loc::Reg(PReg::Gpr(src))));
                }
                self.parallel_move(moves);
            }
            Instr::Move { dst, src } => self.mov(*dst, *src),
            Instr::Const { dst, value } => match (*dst, i32::try_from(*value)) {
                (Loc::Stack(s), Ok(v)) => self.emit(X86Inst::MovMI(slot(s), v)),
                (d, _) => {
                    let t = gpr(d).unwrap_or(SCRATCH);
                    self.emit(X86Inst::MovRI(t, *value));
                    self.set_int(d, t);
                }
            },
            Instr::ConstFloat { dst, bits } => {
                self.emit(X86Inst::MovRI(SCRATCH, *bits as i64));
                match *dst {
                    Loc::Reg(PReg::Xmm(x)) => self.emit(X86Inst::MovqXR(x, SCRATCH)),
                    d => self.set_int(d, SCRATCH),
                }
            }
            Instr::Symbol { dst, name } => {
                let t = gpr(*dst).unwrap_or(SCRATCH);
                self.emit(X86Inst::MovAbsSym(t, name.clone(), 0));
                self.set_int(*dst, t);
            }
            Instr::Load { dst, chunk, addr } => {
                let m = self.mem(addr);
                match chunk {
                    Chunk::Float if xmm(*dst).is_some() => {
                        self.emit(X86Inst::MovsdLoad(xmm(*dst).unwrap(), m))
                    }
                    Chunk::Word | Chunk::Float => {
                        let t = gpr(*dst).unwrap_or(SCRATCH);
                        self.emit(X86Inst::MovRM(t, m));
                        self.set_int(*dst, t);
                    }
                    Chunk::Byte => {
                        let t = gpr(*dst).unwrap_or(SCRATCH);
                        self.emit(X86Inst::MovzxRM8(t, m));
                        self.set_int(*dst, t);
                    }
                }
            }
            Instr::Store { src, chunk, addr } => {
                let m = self.mem(addr);
                match (*src, chunk) {
                    (Loc::Reg(PReg::Gpr(g)), Chunk::Word | Chunk::Float) => {
                        self.emit(X86Inst::MovMR(m, g))
                    }
                    (Loc::Reg(PReg::Xmm(x)), _) => self.emit(X86Inst::MovsdStore(m, x)),
                    (Loc::Stack(s), Chunk::Word | Chunk::Float) => {
                        // both integer scratch registers may be taken by the address
                        self.emit(X86Inst::MovsdLoad(FLOAT_SCRATCH, slot(s)));
                        self.emit(X86Inst::MovsdStore(m, FLOAT_SCRATCH));
                    }
                    (_, Chunk::Byte) => return Err(JitError::Unencodable("byte store".into())),
                }
            }
            Instr::Lea { dst, addr } => {
                let m = self.mem(addr);
                let t = gpr(*dst).unwrap_or(SCRATCH);
                self.emit(X86Inst::Lea(t, m));
                self.set_int(*dst, t);
            }
            Instr::IntOp {
                op: op @ (IntOp::Div | IntOp::Mod),
                dst,
                a,
                b,
            } => {
                let Operand::Reg(b) = b else {
                    return Err(JitError::Unencodable("divide by immediate".into()));
                };
                let divisor = self.int_reg(*b, SCRATCH);
                if divisor != SCRATCH {
                    self.emit(X86Inst::MovRR(SCRATCH, divisor));
                }
                let dividend = self.int_reg(*a, SCRATCH2);
                if dividend != Gpr::Rax {
                    self.emit(X86Inst::MovRR(Gpr::Rax, dividend));
                }
                self.emit(X86Inst::Cqo);
                self.emit(X86Inst::Idiv(Rm::Reg(SCRATCH)));
                self.set_int(
                    *dst,
                    if *op == IntOp::Div {
                        Gpr::Rax
                    } else {
                        Gpr::Rdx
                    },
                );
            }
            Instr::IntOp { op, dst, a, b } => self.int_op(*op, *dst, *a, b)?,
            Instr::Cmp { cmp, dst, a, b } => {
                self.compare(*a, b);
                let t = gpr(*dst).unwrap_or(SCRATCH);
                self.emit(X86Inst::Setcc(cond_code(*cmp, false), t));
                self.emit(X86Inst::MovzxRR8(t, t));
                self.set_int(*dst, t);
            }
            Instr::FloatOp { op, dst, a, b } => {
                let t = xmm(*dst).unwrap_or(FLOAT_SCRATCH);
                self.load_float(t, *a);
                let sse = match op {
                    FloatOp::Add => SseOp::Add,
                    FloatOp::Sub => SseOp::Sub,
                    FloatOp::Mul => SseOp::Mul,
                    FloatOp::Div => SseOp::Div,
                };
                self.emit(X86Inst::Sse(sse, t, xrm(*b)));
                self.set_float(*dst, t);
            }
            Instr::FloatUn {
                op: FloatUn::Sqrt,
                dst,
                a,
            } => {
                let t = xmm(*dst).unwrap_or(FLOAT_SCRATCH);
                self.emit(X86Inst::Sse(SseOp::Sqrt, t, xrm(*a)));
                self.set_float(*dst, t);
            }
            Instr::FloatUn {
                op: FloatUn::Neg,
                dst,
                a,
            } => {
                match *a {
                    Loc::Reg(PReg::Xmm(x)) => self.emit(X86Inst::MovqRX(SCRATCH, x)),
                    Loc::Stack(s) => self.emit(X86Inst::MovRM(SCRATCH, slot(s))),
                    other => unreachable!("float operand in {}", other),
                }
                self.emit(X86Inst::MovRI(SCRATCH2, SIGN_MASK));
                self.emit(X86Inst::Alu(AluOp::Xor, Rm::Reg(SCRATCH), SCRATCH2));
                match *dst {
                    Loc::Reg(PReg::Xmm(x)) => self.emit(X86Inst::MovqXR(x, SCRATCH)),
                    d => self.set_int(d, SCRATCH),
                }
            }
            Instr::IntToFloat { dst, src } => {
                let t = xmm(*dst).unwrap_or(FLOAT_SCRATCH);
                self.emit(X86Inst::Cvtsi2sd(t, rm(*src)));
                self.set_float(*dst, t);
            }
            Instr::FloatToInt { dst, src } => {
                let t = gpr(*dst).unwrap_or(SCRATCH);
                self.emit(X86Inst::Cvttsd2si(t, xrm(*src)));
                self.set_int(*dst, t);
            }
            Instr::Alloc {
                dst,
                words,
                headers,
            } => {
                self.emit(X86Inst::MovRI(SCRATCH2, 8 * *words as i64));
                self.emit(X86Inst::CallSym(RT_ALLOC.into()));
                for (offset, h) in headers {
                    let at = Mem::base(Gpr::Rax, 8 * *offset as i32 - 8);
                    match i32::try_from(*h) {
                        Ok(h) => self.emit(X86Inst::MovMI(at, h)),
                        Err(_) => {
                            self.emit(X86Inst::MovRI(SCRATCH, *h));
                            self.emit(X86Inst::MovMR(at, SCRATCH));
                        }
                    }
                }
                self.set_int(*dst, Gpr::Rax);
            }
            Instr::Call {
                target,
                args,
                env,
                dst,
            } => {
                if args.len() > ARG_REGS.len() {
                    return Err(JitError::Unencodable(format!(
                        "call with {} arguments",
                        args.len()
                    )));
                }
                let mut moves: Vec<(Loc, Loc)> = args
                    .iter()
                    .zip(ARG_REGS)
                    .map(|(a, r)| (Loc::Reg(PReg::Gpr(r)), *a))
                    .collect();
                if let Some(e) = env {
                    moves.push((Loc::Reg(PReg::Gpr(ENV_REG)), *e));
                }
                self.parallel_move(moves);
                match target {
                    CallTarget::Symbol(s) => self.emit(X86Inst::CallSym(s.clone())),
                    CallTarget::Indirect => self.emit(X86Inst::CallMem(Mem::base(ENV_REG, 0))),
                }
                self.set_int(*dst, Gpr::Rax);
            }
        }
        Ok(())
    }

    fn int_op(&mut self, op: IntOp, dst: Loc, a: Loc, b: &Operand<Loc>) -> Result<(), JitError> {
        if let (IntOp::Add, Some(d), Some(ra), Operand::Imm(k)) = (op, gpr(dst), gpr(a), b) {
            self.emit(X86Inst::Lea(d, Mem::base(ra, *k)));
            return Ok(());
        }
        let t = gpr(dst).unwrap_or(SCRATCH);
        match a {
            Loc::Reg(PReg::Gpr(ra)) if ra == t => {}
            Loc::Reg(PReg::Gpr(ra)) => self.emit(X86Inst::MovRR(t, ra)),
            Loc::Stack(s) => self.emit(X86Inst::MovRM(t, slot(s))),
            other => unreachable!("integer operand in {}", other),
        }
        let alu = match op {
            IntOp::Add => Some(AluOp::Add),
            IntOp::Sub => Some(AluOp::Sub),
            IntOp::And => Some(AluOp::And),
            IntOp::Or => Some(AluOp::Or),
            IntOp::Xor => Some(AluOp::Xor),
            _ => None,
        };
        match (op, b) {
            (_, Operand::Imm(k)) if alu.is_some() => {
                self.emit(X86Inst::AluImm(alu.unwrap(), Rm::Reg(t), *k))
            }
            (_, Operand::Reg(l)) if alu.is_some() => {
                let rb = self.int_reg(*l, SCRATCH2);
                self.emit(X86Inst::Alu(alu.unwrap(), Rm::Reg(t), rb));
            }
            (IntOp::Mul, Operand::Imm(k)) => self.emit(X86Inst::ImulImm(t, Rm::Reg(t), *k)),
            (IntOp::Mul, Operand::Reg(l)) => self.emit(X86Inst::Imul(t, rm(*l))),
            (IntOp::Shl | IntOp::Sar | IntOp::Shr, Operand::Imm(k)) => {
                let sh = match op {
                    IntOp::Shl => ShiftOp::Shl,
                    IntOp::Sar => ShiftOp::Sar,
                    _ => ShiftOp::Shr,
                };
                self.emit(X86Inst::Shift(sh, Rm::Reg(t), (*k & 63) as u8));
            }
            _ => {
                return Err(JitError::Unencodable(format!(
                    "{:?} with operand {:?}",
                    op, b
                )))
            }
        }
        self.set_int(dst, t);
        Ok(())
    }
}
