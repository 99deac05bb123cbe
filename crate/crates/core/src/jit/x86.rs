//! x86-64 instructions, their binary encoding and their GAS Intel-syntax
//! text. Where several encodings exist the one GNU `as` picks is used.

use std::collections::HashMap;
use std::fmt;

use crate::nativegen::arch::{Gpr, Xmm};

use super::JitError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mem {
    pub base: Gpr,
    /// Never rsp.
    pub index: Option<(Gpr, u8)>,
    pub disp: i32,
}

impl Mem {
    pub fn base(base: Gpr, disp: i32) -> Mem {
        Mem {
            base,
            index: None,
            disp,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rm {
    Reg(Gpr),
    Mem(Mem),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum XRm {
    Reg(Xmm),
    Mem(Mem),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AluOp {
    Add = 0,
    Or = 1,
    And = 4,
    Sub = 5,
    Xor = 6,
    Cmp = 7,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShiftOp {
    Shl = 4,
    Shr = 5,
    Sar = 7,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cond {
    B = 2,
    Ae = 3,
    E = 4,
    Ne = 5,
    Be = 6,
    A = 7,
    L = 12,
    Ge = 13,
    Le = 14,
    G = 15,
}

impl Cond {
    pub fn negate(self) -> Cond {
        match self {
            Cond::B => Cond::Ae,
            Cond::Ae => Cond::B,
            Cond::E => Cond::Ne,
            Cond::Ne => Cond::E,
            Cond::Be => Cond::A,
            Cond::A => Cond::Be,
            Cond::L => Cond::Ge,
            Cond::Ge => Cond::L,
            Cond::Le => Cond::G,
            Cond::G => Cond::Le,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Cond::B => "b",
            Cond::Ae => "ae",
            Cond::E => "e",
            Cond::Ne => "ne",
            Cond::Be => "be",
            Cond::A => "a",
            Cond::L => "l",
            Cond::Ge => "ge",
            Cond::Le => "le",
            Cond::G => "g",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SseOp {
    Add = 0x58,
    Mul = 0x59,
    Sub = 0x5C,
    Div = 0x5E,
    Sqrt = 0x51,
}

pub type Label = u32;

#[derive(Clone, Debug, PartialEq)]
pub enum X86Inst {
    /// Defines a local label at this point.
    Label(Label),
    MovRR(Gpr, Gpr),
    MovRM(Gpr, Mem),
    MovMR(Mem, Gpr),
    MovMI(Mem, i32),
    /// Sign-extended imm32 when it fits, `movabs` otherwise.
    MovRI(Gpr, i64),
    /// `movabs` of a symbol address plus addend, patched at link time.
    MovAbsSym(Gpr, String, i64),
    MovzxRR8(Gpr, Gpr),
    MovzxRM8(Gpr, Mem),
    Alu(AluOp, Rm, Gpr),
    AluRM(AluOp, Gpr, Mem),
    AluImm(AluOp, Rm, i32),
    Imul(Gpr, Rm),
    ImulImm(Gpr, Rm, i32),
    Shift(ShiftOp, Rm, u8),
    Lea(Gpr, Mem),
    Cqo,
    Idiv(Rm),
    Test(Gpr, Gpr),
    Setcc(Cond, Gpr),
    Jmp(Label),
    Jcc(Cond, Label),
    JmpSym(String),
    JccSym(Cond, String),
    CallSym(String),
    CallMem(Mem),
    CallReg(Gpr),
    Ret,
    Push(Gpr),
    Pop(Gpr),
    Int3,
    MovsdLoad(Xmm, Mem),
    MovsdStore(Mem, Xmm),
    Movapd(Xmm, Xmm),
    Sse(SseOp, Xmm, XRm),
    Xorpd(Xmm, Xmm),
    Cvtsi2sd(Xmm, Rm),
    Cvttsd2si(Gpr, XRm),
    MovqXR(Xmm, Gpr),
    MovqRX(Gpr, Xmm),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelocKind {
    /// 32-bit PC-relative displacement.
    Rel32,
    /// 64-bit absolute address.
    Abs64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixup {
    pub offset: usize,
    pub kind: RelocKind,
    pub symbol: String,
    pub addend: i64,
}

#[derive(Clone, Debug, Default)]
pub struct Assembled {
    pub bytes: Vec<u8>,
    pub fixups: Vec<Fixup>,
    pub labels: HashMap<Label, usize>,
}

fn fits_i8(x: i64) -> bool {
    (-128..=127).contains(&x)
}

struct Enc<'a> {
    out: &'a mut Vec<u8>,
}

impl Enc<'_> {
    fn byte(&mut self, b: u8) {
        self.out.push(b);
    }

    fn bytes(&mut self, bs: &[u8]) {
        self.out.extend_from_slice(bs);
    }

    fn i32(&mut self, x: i32) {
        self.bytes(&x.to_le_bytes());
    }

    /// Optional REX prefix; `force` for byte registers spl..dil.
    fn rex(&mut self, w: bool, reg: u8, rm: &RmBits, force: bool) {
        let (x, b) = match rm {
            RmBits::Reg(r) => (0, r >> 3),
            RmBits::Mem(m) => (
                m.index.map(|(i, _)| i.code() >> 3).unwrap_or(0),
                m.base.code() >> 3,
            ),
        };
        let v = 0x40 | (w as u8) << 3 | (reg >> 3) << 2 | x << 1 | b;
        if v != 0x40 || force {
            self.byte(v);
        }
    }

    fn modrm(&mut self, reg: u8, rm: &RmBits) {
        let reg = (reg & 7) << 3;
        match rm {
            RmBits::Reg(r) => self.byte(0xC0 | reg | (r & 7)),
            RmBits::Mem(m) => {
                let base = m.base.code() & 7;
                let md = if m.disp == 0 && base != 5 {
                    0
                } else if fits_i8(m.disp as i64) {
                    1
                } else {
                    2
                };
                if m.index.is_some() || base == 4 {
                    self.byte(md << 6 | reg | 4);
                    let (idx, scale) = match m.index {
                        Some((i, s)) => (i.code() & 7, s.trailing_zeros() as u8),
                        None => (4, 0),
                    };
                    self.byte(scale << 6 | idx << 3 | base);
                } else {
                    self.byte(md << 6 | reg | base);
                }
                match md {
                    1 => self.byte(m.disp as i8 as u8),
                    2 => self.i32(m.disp),
                    _ => {}
                }
            }
        }
    }

    /// prefix? REX opcode modrm.
    fn op(&mut self, prefix: Option<u8>, w: bool, opcode: &[u8], reg: u8, rm: RmBits, force: bool) {
        if let Some(p) = prefix {
            self.byte(p);
        }
        self.rex(w, reg, &rm, force);
        self.bytes(opcode);
        self.modrm(reg, &rm);
    }
}

enum RmBits {
    Reg(u8),
    Mem(Mem),
}

fn rm_bits(rm: &Rm) -> RmBits {
    match rm {
        Rm::Reg(r) => RmBits::Reg(r.code()),
        Rm::Mem(m) => RmBits::Mem(*m),
    }
}

fn xrm_bits(rm: &XRm) -> RmBits {
    match rm {
        XRm::Reg(x) => RmBits::Reg(x.0),
        XRm::Mem(m) => RmBits::Mem(*m),
    }
}

fn byte_reg_needs_rex(r: Gpr) -> bool {
    (4..8).contains(&r.code())
}

/// How a branch is currently encoded during relaxation.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Width {
    Short,
    Near,
}

impl X86Inst {
    fn is_branch(&self) -> bool {
        matches!(self, X86Inst::Jmp(_) | X86Inst::Jcc(..))
    }

    /// Encodes everything but local branches, which need layout.
    fn encode_plain(&self, out: &mut Vec<u8>, fixups: &mut Vec<Fixup>) {
        let mut e = Enc { out };
        let reloc =
            |e: &mut Enc, fixups: &mut Vec<Fixup>, sym: &str, kind: RelocKind, addend: i64| {
                fixups.push(Fixup {
                    offset: e.out.len(),
                    kind,
                    symbol: sym.to_string(),
                    addend,
                });
                match kind {
                    RelocKind::Rel32 => e.bytes(&[0; 4]),
                    RelocKind::Abs64 => e.bytes(&[0; 8]),
                }
            };
        match self {
            X86Inst::Label(_) | X86Inst::Jmp(_) | X86Inst::Jcc(..) => {
                unreachable!("handled by layout")
            }
            X86Inst::MovRR(d, s) => {
                e.op(None, true, &[0x89], s.code(), RmBits::Reg(d.code()), false)
            }
            X86Inst::MovRM(d, m) => e.op(None, true, &[0x8B], d.code(), RmBits::Mem(*m), false),
            X86Inst::MovMR(m, s) => e.op(None, true, &[0x89], s.code(), RmBits::Mem(*m), false),
            X86Inst::MovMI(m, imm) => {
                e.op(None, true, &[0xC7], 0, RmBits::Mem(*m), false);
                e.i32(*imm);
            }
            X86Inst::MovRI(d, imm) => match i32::try_from(*imm) {
                Ok(i) => {
                    e.op(None, true, &[0xC7], 0, RmBits::Reg(d.code()), false);
                    e.i32(i);
                }
                Err(_) => {
                    e.rex(true, 0, &RmBits::Reg(d.code()), false);
                    e.byte(0xB8 + (d.code() & 7));
                    e.bytes(&imm.to_le_bytes());
                }
            },
            X86Inst::MovAbsSym(d, sym, addend) => {
                e.rex(true, 0, &RmBits::Reg(d.code()), false);
                e.byte(0xB8 + (d.code() & 7));
                reloc(&mut e, fixups, sym, RelocKind::Abs64, *addend);
            }
            X86Inst::MovzxRR8(d, s) => e.op(
                None,
                false,
                &[0x0F, 0xB6],
                d.code(),
                RmBits::Reg(s.code()),
                byte_reg_needs_rex(*s),
            ),
            X86Inst::MovzxRM8(d, m) => {
                e.op(None, false, &[0x0F, 0xB6], d.code(), RmBits::Mem(*m), false)
            }
            X86Inst::Alu(op, rm, r) => e.op(
                None,
                true,
                &[(*op as u8) << 3 | 1],
                r.code(),
                rm_bits(rm),
                false,
            ),
            X86Inst::AluRM(op, r, m) => e.op(
                None,
                true,
                &[(*op as u8) << 3 | 3],
                r.code(),
                RmBits::Mem(*m),
                false,
            ),
            X86Inst::AluImm(op, rm, imm) => {
                if fits_i8(*imm as i64) {
                    e.op(None, true, &[0x83], *op as u8, rm_bits(rm), false);
                    e.byte(*imm as i8 as u8);
                } else if *rm == Rm::Reg(Gpr::Rax) {
                    e.byte(0x48);
                    e.byte((*op as u8) << 3 | 5);
                    e.i32(*imm);
                } else {
                    e.op(None, true, &[0x81], *op as u8, rm_bits(rm), false);
                    e.i32(*imm);
                }
            }
            X86Inst::Imul(d, rm) => e.op(None, true, &[0x0F, 0xAF], d.code(), rm_bits(rm), false),
            X86Inst::ImulImm(d, rm, imm) => {
                if fits_i8(*imm as i64) {
                    e.op(None, true, &[0x6B], d.code(), rm_bits(rm), false);
                    e.byte(*imm as i8 as u8);
                } else {
                    e.op(None, true, &[0x69], d.code(), rm_bits(rm), false);
                    e.i32(*imm);
                }
            }
            X86Inst::Shift(op, rm, n) => {
                if *n == 1 {
                    e.op(None, true, &[0xD1], *op as u8, rm_bits(rm), false);
                } else {
                    e.op(None, true, &[0xC1], *op as u8, rm_bits(rm), false);
                    e.byte(*n);
                }
            }
            X86Inst::Lea(d, m) => e.op(None, true, &[0x8D], d.code(), RmBits::Mem(*m), false),
            X86Inst::Cqo => e.bytes(&[0x48, 0x99]),
            X86Inst::Idiv(rm) => e.op(None, true, &[0xF7], 7, rm_bits(rm), false),
            X86Inst::Test(a, b) => {
                e.op(None, true, &[0x85], b.code(), RmBits::Reg(a.code()), false)
            }
            X86Inst::Setcc(c, r) => e.op(
                None,
                false,
                &[0x0F, 0x90 | *c as u8],
                0,
                RmBits::Reg(r.code()),
                byte_reg_needs_rex(*r),
            ),
            X86Inst::JmpSym(sym) => {
                e.byte(0xE9);
                reloc(&mut e, fixups, sym, RelocKind::Rel32, -4);
            }
            X86Inst::JccSym(c, sym) => {
                e.bytes(&[0x0F, 0x80 | *c as u8]);
                reloc(&mut e, fixups, sym, RelocKind::Rel32, -4);
            }
            X86Inst::CallSym(sym) => {
                e.byte(0xE8);
                reloc(&mut e, fixups, sym, RelocKind::Rel32, -4);
            }
            X86Inst::CallMem(m) => e.op(None, false, &[0xFF], 2, RmBits::Mem(*m), false),
            X86Inst::CallReg(r) => e.op(None, false, &[0xFF], 2, RmBits::Reg(r.code()), false),
            X86Inst::Ret => e.byte(0xC3),
            X86Inst::Push(r) => {
                e.rex(false, 0, &RmBits::Reg(r.code()), false);
                e.byte(0x50 + (r.code() & 7));
            }
            X86Inst::Pop(r) => {
                e.rex(false, 0, &RmBits::Reg(r.code()), false);
                e.byte(0x58 + (r.code() & 7));
            }
            X86Inst::Int3 => e.byte(0xCC),
            X86Inst::MovsdLoad(x, m) => e.op(
                Some(0xF2),
                false,
                &[0x0F, 0x10],
                x.0,
                RmBits::Mem(*m),
                false,
            ),
            X86Inst::MovsdStore(m, x) => e.op(
                Some(0xF2),
                false,
                &[0x0F, 0x11],
                x.0,
                RmBits::Mem(*m),
                false,
            ),
            X86Inst::Movapd(d, s) => e.op(
                Some(0x66),
                false,
                &[0x0F, 0x28],
                d.0,
                RmBits::Reg(s.0),
                false,
            ),
            X86Inst::Sse(op, d, rm) => e.op(
                Some(0xF2),
                false,
                &[0x0F, *op as u8],
                d.0,
                xrm_bits(rm),
                false,
            ),
            X86Inst::Xorpd(d, s) => e.op(
                Some(0x66),
                false,
                &[0x0F, 0x57],
                d.0,
                RmBits::Reg(s.0),
                false,
            ),
            X86Inst::Cvtsi2sd(d, rm) => {
                e.op(Some(0xF2), true, &[0x0F, 0x2A], d.0, rm_bits(rm), false)
            }
            X86Inst::Cvttsd2si(d, rm) => e.op(
                Some(0xF2),
                true,
                &[0x0F, 0x2C],
                d.code(),
                xrm_bits(rm),
                false,
            ),
            X86Inst::MovqXR(x, r) => e.op(
                Some(0x66),
                true,
                &[0x0F, 0x6E],
                x.0,
                RmBits::Reg(r.code()),
                false,
            ),
            X86Inst::MovqRX(r, x) => e.op(
                Some(0x66),
                true,
                &[0x0F, 0x7E],
                x.0,
                RmBits::Reg(r.code()),
                false,
            ),
        }
    }

    /// Encodes a single instruction without local branches.
    pub fn encode(&self) -> (Vec<u8>, Vec<Fixup>) {
        let mut out = Vec::new();
        let mut fixups = Vec::new();
        self.encode_plain(&mut out, &mut fixups);
        (out, fixups)
    }
}

fn branch_size(i: &X86Inst, w: Width) -> usize {
    match (i, w) {
        (_, Width::Short) => 2,
        (X86Inst::Jmp(_), Width::Near) => 5,
        (_, Width::Near) => 6,
    }
}

/// Encodes a sequence, choosing the shortest branch forms that reach.
pub fn assemble(insts: &[X86Inst]) -> Result<Assembled, JitError> {
    let mut sizes = Vec::with_capacity(insts.len());
    let mut scratch = Vec::new();
    let mut widths = vec![Width::Short; insts.len()];
    for i in insts {
        sizes.push(match i {
            X86Inst::Label(_) => 0,
            i if i.is_branch() => 2,
            i => {
                scratch.clear();
                i.encode_plain(&mut scratch, &mut Vec::new());
                scratch.len()
            }
        });
    }
    let layout = |sizes: &[usize]| -> (Vec<usize>, HashMap<Label, usize>) {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut labels = HashMap::new();
        let mut at = 0;
        for (i, s) in insts.iter().zip(sizes) {
            offsets.push(at);
            if let X86Inst::Label(l) = i {
                labels.insert(*l, at);
            }
            at += s;
        }
        (offsets, labels)
    };
    let (mut offsets, mut labels) = layout(&sizes);
    loop {
        let mut changed = false;
        for (k, i) in insts.iter().enumerate() {
            if let X86Inst::Jmp(l) | X86Inst::Jcc(_, l) = i {
                let target = *labels.get(l).ok_or(JitError::UndefinedLabel(*l))?;
                let disp = target as i64 - (offsets[k] + sizes[k]) as i64;
                if widths[k] == Width::Short && !fits_i8(disp) {
                    widths[k] = Width::Near;
                    sizes[k] = branch_size(i, Width::Near);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        (offsets, labels) = layout(&sizes);
    }
    let mut out = Assembled {
        labels: labels.clone(),
        ..Default::default()
    };
    for (k, i) in insts.iter().enumerate() {
        match i {
            X86Inst::Label(_) => {}
            X86Inst::Jmp(l) | X86Inst::Jcc(_, l) => {
                let target = labels[l] as i64;
                let end = (offsets[k] + sizes[k]) as i64;
                let disp = target - end;
                match (i, widths[k]) {
                    (X86Inst::Jmp(_), Width::Short) => out.bytes.extend([0xEB, disp as i8 as u8]),
                    (X86Inst::Jcc(c, _), Width::Short) => {
                        out.bytes.extend([0x70 | *c as u8, disp as i8 as u8])
                    }
                    (X86Inst::Jmp(_), Width::Near) => {
                        out.bytes.push(0xE9);
                        out.bytes.extend((disp as i32).to_le_bytes());
                    }
                    (X86Inst::Jcc(c, _), Width::Near) => {
                        out.bytes.extend([0x0F, 0x80 | *c as u8]);
                        out.bytes.extend((disp as i32).to_le_bytes());
                    }
                    _ => unreachable!(),
                }
            }
            i => i.encode_plain(&mut out.bytes, &mut out.fixups),
        }
        debug_assert_eq!(out.bytes.len(), offsets[k] + sizes[k]);
    }
    Ok(out)
}

impl fmt::Display for Mem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}", self.base)?;
        if let Some((i, s)) = self.index {
            write!(f, "+{}*{}", i, s)?;
        }
        if self.disp > 0 {
            write!(f, "+{}", self.disp)?;
        } else if self.disp < 0 {
            write!(f, "{}", self.disp)?;
        }
        write!(f, "]")
    }
}

struct Q<'a>(&'a Rm);

impl fmt::Display for Q<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Rm::Reg(r) => write!(f, "{}", r),
            Rm::Mem(m) => write!(f, "QWORD PTR {}", m),
        }
    }
}

struct XQ<'a>(&'a XRm);

impl fmt::Display for XQ<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            XRm::Reg(x) => write!(f, "{}", x),
            XRm::Mem(m) => write!(f, "QWORD PTR {}", m),
        }
    }
}

fn alu_name(op: AluOp) -> &'static str {
    match op {
        AluOp::Add => "add",
        AluOp::Or => "or",
        AluOp::And => "and",
        AluOp::Sub => "sub",
        AluOp::Xor => "xor",
        AluOp::Cmp => "cmp",
    }
}

pub fn label_name(l: Label) -> String {
    format!(".L{}", l)
}

impl fmt::Display for X86Inst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            X86Inst::Label(l) => write!(f, "{}:", label_name(*l)),
            X86Inst::MovRR(d, s) => write!(f, "mov {}, {}", d, s),
            X86Inst::MovRM(d, m) => write!(f, "mov {}, QWORD PTR {}", d, m),
            X86Inst::MovMR(m, s) => write!(f, "mov QWORD PTR {}, {}", m, s),
            X86Inst::MovMI(m, i) => write!(f, "mov QWORD PTR {}, {}", m, i),
            X86Inst::MovRI(d, i) => {
                if i32::try_from(*i).is_ok() {
                    write!(f, "mov {}, {}", d, i)
                } else {
                    write!(f, "movabs {}, {}", d, i)
                }
            }
            X86Inst::MovAbsSym(d, s, 0) => write!(f, "movabs {}, OFFSET {}", d, s),
            X86Inst::MovAbsSym(d, s, a) => write!(f, "movabs {}, OFFSET {}{:+}", d, s, a),
            X86Inst::MovzxRR8(d, s) => write!(f, "movzx {}, {}", d.name32(), s.name8()),
            X86Inst::MovzxRM8(d, m) => write!(f, "movzx {}, BYTE PTR {}", d.name32(), m),
            X86Inst::Alu(op, rm, r) => write!(f, "{} {}, {}", alu_name(*op), Q(rm), r),
            X86Inst::AluRM(op, r, m) => write!(f, "{} {}, QWORD PTR {}", alu_name(*op), r, m),
            X86Inst::AluImm(op, rm, i) => write!(f, "{} {}, {}", alu_name(*op), Q(rm), i),
            X86Inst::Imul(d, rm) => write!(f, "imul {}, {}", d, Q(rm)),
            X86Inst::ImulImm(d, rm, i) => write!(f, "imul {}, {}, {}", d, Q(rm), i),
            X86Inst::Shift(op, rm, n) => {
                let name = match op {
                    ShiftOp::Shl => "shl",
                    ShiftOp::Shr => "shr",
                    ShiftOp::Sar => "sar",
                };
                write!(f, "{} {}, {}", name, Q(rm), n)
            }
            X86Inst::Lea(d, m) => write!(f, "lea {}, {}", d, m),
            X86Inst::Cqo => write!(f, "cqo"),
            X86Inst::Idiv(rm) => write!(f, "idiv {}", Q(rm)),
            X86Inst::Test(a, b) => write!(f, "test {}, {}", a, b),
            X86Inst::Setcc(c, r) => write!(f, "set{} {}", c.suffix(), r.name8()),
            X86Inst::Jmp(l) => write!(f, "jmp {}", label_name(*l)),
            X86Inst::Jcc(c, l) => write!(f, "j{} {}", c.suffix(), label_name(*l)),
            X86Inst::JmpSym(s) => write!(f, "jmp {}", s),
            X86Inst::JccSym(c, s) => write!(f, "j{} {}", c.suffix(), s),
            X86Inst::CallSym(s) => write!(f, "call {}", s),
            X86Inst::CallMem(m) => write!(f, "call QWORD PTR {}", m),
            X86Inst::CallReg(r) => write!(f, "call {}", r),
            X86Inst::Ret => write!(f, "ret"),
            X86Inst::Push(r) => write!(f, "push {}", r),
            X86Inst::Pop(r) => write!(f, "pop {}", r),
            X86Inst::Int3 => write!(f, "int3"),
            X86Inst::MovsdLoad(x, m) => write!(f, "movsd {}, QWORD PTR {}", x, m),
            X86Inst::MovsdStore(m, x) => write!(f, "movsd QWORD PTR {}, {}", m, x),
            X86Inst::Movapd(d, s) => write!(f, "movapd {}, {}", d, s),
            X86Inst::Sse(op, d, rm) => {
                let name = match op {
                    SseOp::Add => "addsd",
                    SseOp::Sub => "subsd",
                    SseOp::Mul => "mulsd",
                    SseOp::Div => "divsd",
                    SseOp::Sqrt => "sqrtsd",
                };
                write!(f, "{} {}, {}", name, d, XQ(rm))
            }
            X86Inst::Xorpd(d, s) => write!(f, "xorpd {}, {}", d, s),
            X86Inst::Cvtsi2sd(d, rm) => write!(f, "cvtsi2sd {}, {}", d, Q(rm)),
            X86Inst::Cvttsd2si(d, rm) => write!(f, "cvttsd2si {}, {}", d, XQ(rm)),
            X86Inst::MovqXR(x, r) => write!(f, "movq {}, {}", x, r),
            X86Inst::MovqRX(r, x) => write!(f, "movq {}, {}", r, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex(i: X86Inst) -> String {
        i.encode()
            .0
            .iter()
            .map(|b| format!("{:02X}", b))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn reference_encodings() {
        assert_eq!(hex(X86Inst::Ret), "C3");
        assert_eq!(hex(X86Inst::MovRR(Gpr::Rax, Gpr::Rbx)), "48 89 D8");
        assert_eq!(hex(X86Inst::MovRI(Gpr::Rax, 42)), "48 C7 C0 2A 00 00 00");
    }

    #[test]
    fn short_branch_grows_when_out_of_reach() {
        let mut code = vec![X86Inst::Jmp(1)];
        code.extend(std::iter::repeat_n(X86Inst::Int3, 200));
        code.push(X86Inst::Label(1));
        let a = assemble(&code).unwrap();
        assert_eq!(a.bytes[0], 0xE9);
        assert_eq!(&a.bytes[1..5], &200i32.to_le_bytes());

        let a = assemble(&[X86Inst::Label(0), X86Inst::Int3, X86Inst::Jcc(Cond::Ne, 0)]).unwrap();
        assert_eq!(a.bytes, vec![0xCC, 0x75, 0xFD]);
    }

    #[test]
    fn call_to_symbol_records_rel32() {
        let (bytes, fixups) = X86Inst::CallSym("f".into()).encode();
        assert_eq!(bytes, vec![0xE8, 0, 0, 0, 0]);
        assert_eq!(
            fixups,
            vec![Fixup {
                offset: 1,
                kind: RelocKind::Rel32,
                symbol: "f".into(),
                addend: -4
            }]
        );
    }
}
