//! Lays out allocated blocks as a linear instruction list with labels and
//! explicit jumps, threading jumps through empty blocks and falling through
//! wherever the successor comes next.

use std::collections::HashSet;
use std::fmt;

use super::arch::PReg;
use super::mach::{Addr, BlockId, Instr, MachFn, Operand, Term};
use super::regalloc::{Allocation, Loc};
use crate::lambda::Cmp;
use crate::rt::TrapKind;

#[derive(Clone, Debug, PartialEq)]
pub enum LInstr {
    Label(BlockId),
    Op(Instr<Loc>),
    Save(PReg, u32),
    Restore(PReg, u32),
    Jump(BlockId),
    /// Jumps when the comparison holds, falls through otherwise.
    CondJump {
        cmp: Cmp,
        unsigned: bool,
        a: Loc,
        b: Operand<Loc>,
        target: BlockId,
    },
    Return(Loc),
    Trap(TrapKind),
}

#[derive(Clone, Debug)]
pub struct LinearFn {
    pub name: String,
    pub instrs: Vec<LInstr>,
    pub frame_slots: u32,
    /// True when the function makes no calls.
    pub leaf: bool,
    pub has_env: bool,
}

impl LinearFn {
    /// Frame size in bytes. A function that calls keeps the stack 16-byte
    /// aligned at its call sites.
    pub fn frame_size(&self) -> u32 {
        let bytes = 8 * self.frame_slots;
        if self.leaf || bytes % 16 == 8 {
            bytes
        } else {
            bytes + 8
        }
    }

    pub fn jump_count(&self) -> usize {
        self.instrs
            .iter()
            .filter(|i| matches!(i, LInstr::Jump(_)))
            .count()
    }
}

fn thread(f: &MachFn, mut b: BlockId) -> BlockId {
    let mut seen = HashSet::new();
    while f.blocks[b].instrs.is_empty() && seen.insert(b) {
        match f.blocks[b].term {
            Term::Jump(next) => b = next,
            _ => break,
        }
    }
    b
}

pub fn linearize(f: &MachFn, alloc: &Allocation) -> LinearFn {
    let target = |b: BlockId| thread(f, b);
    let mut live: HashSet<BlockId> = HashSet::new();
    live.insert(f.entry);
    for &b in &alloc.numbering.order {
        for s in f.blocks[b].term.successors() {
            live.insert(target(s));
        }
    }
    let order: Vec<BlockId> = alloc
        .numbering
        .order
        .iter()
        .copied()
        .filter(|b| *b == f.entry || (live.contains(b) && target(*b) == *b))
        .collect();
    let loc = |r| alloc.loc(r);
    let mut instrs = Vec::new();
    let mut leaf = true;
    for (n, &b) in order.iter().enumerate() {
        let next = order.get(n + 1).copied();
        instrs.push(LInstr::Label(b));
        let block = &f.blocks[b];
        for (k, i) in block.instrs.iter().enumerate() {
            leaf &= !matches!(i, Instr::Call { .. });
            let saves = alloc.saves.get(&(b, k));
            for (r, slot) in saves.into_iter().flatten() {
                instrs.push(LInstr::Save(*r, *slot));
            }
            instrs.push(LInstr::Op(i.map(loc)));
            for (r, slot) in saves.into_iter().flatten() {
                instrs.push(LInstr::Restore(*r, *slot));
            }
        }
        match block.term.map(loc) {
            Term::Jump(t) => {
                let t = target(t);
                if Some(t) != next {
                    instrs.push(LInstr::Jump(t));
                }
            }
            Term::Branch {
                cmp,
                unsigned,
                a,
                b: rhs,
                ifso,
                ifnot,
            } => {
                let (ifso, ifnot) = (target(ifso), target(ifnot));
                if Some(ifnot) == next {
                    instrs.push(LInstr::CondJump {
                        cmp,
                        unsigned,
                        a,
                        b: rhs,
                        target: ifso,
                    });
                } else if Some(ifso) == next {
                    instrs.push(LInstr::CondJump {
                        cmp: cmp.negate(),
                        unsigned,
                        a,
                        b: rhs,
                        target: ifnot,
                    });
                } else {
                    instrs.push(LInstr::CondJump {
                        cmp,
                        unsigned,
                        a,
                        b: rhs,
                        target: ifso,
                    });
                    instrs.push(LInstr::Jump(ifnot));
                }
            }
            Term::Return(r) => instrs.push(LInstr::Return(r)),
            Term::Trap(k) => instrs.push(LInstr::Trap(k)),
        }
    }
    // drop labels nothing jumps to
    let targets: HashSet<BlockId> = instrs
        .iter()
        .filter_map(|i| match i {
            LInstr::Jump(t) | LInstr::CondJump { target: t, .. } => Some(*t),
            _ => None,
        })
        .collect();
    instrs.retain(|i| !matches!(i, LInstr::Label(b) if !targets.contains(b)));
    LinearFn {
        name: f.name.clone(),
        instrs,
        frame_slots: alloc.frame_slots,
        leaf,
        has_env: f.has_env,
    }
}

/// The identity instruction schedule; the slot where a list scheduler
/// would go.
pub fn schedule(f: LinearFn) -> LinearFn {
    f
}

fn addr_text(a: &Addr<Loc>) -> String {
    let mut s = format!("[{}", a.base);
    if let Some((r, sc)) = a.index {
        s.push_str(&format!(" + {}*{}", r, sc));
    }
    if a.disp != 0 {
        s.push_str(&format!(
            " {} {}",
            if a.disp < 0 { '-' } else { '+' },
            a.disp.unsigned_abs()
        ));
    }
    s.push(']');
    s
}

fn operand_text(o: &Operand<Loc>) -> String {
    match o {
        Operand::Reg(r) => r.to_string(),
        Operand::Imm(i) => i.to_string(),
    }
}

pub fn instr_text(i: &Instr<Loc>) -> String {
    use super::mach::{chunk_name, CallTarget};
    let list = |rs: &[Loc]| {
        rs.iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    match i {
        Instr::EntryArgs(rs) => format!("args {}", list(rs)),
        Instr::Move { dst, src } => format!("{} := {}", dst, src),
        Instr::Const { dst, value } => format!("{} := {}", dst, value),
        Instr::ConstFloat { dst, bits } => format!("{} := float {}", dst, f64::from_bits(*bits)),
        Instr::Symbol { dst, name } => format!("{} := \"{}\"", dst, name),
        Instr::Load { dst, chunk, addr } => {
            format!("{} := load{} {}", dst, chunk_name(*chunk), addr_text(addr))
        }
        Instr::Store { src, chunk, addr } => {
            format!("store{} {} := {}", chunk_name(*chunk), addr_text(addr), src)
        }
        Instr::Lea { dst, addr } => format!("{} := lea {}", dst, addr_text(addr)),
        Instr::IntOp { op, dst, a, b } => format!("{} := {:?} {}, {}", dst, op, a, operand_text(b)),
        Instr::Cmp { cmp, dst, a, b } => {
            format!("{} := {} {} {}", dst, a, cmp.name(), operand_text(b))
        }
        Instr::FloatOp { op, dst, a, b } => format!("{} := {:?}f {}, {}", dst, op, a, b),
        Instr::FloatUn { op, dst, a } => format!("{} := {:?}f {}", dst, op, a),
        Instr::IntToFloat { dst, src } => format!("{} := float_of_int {}", dst, src),
        Instr::FloatToInt { dst, src } => format!("{} := int_of_float {}", dst, src),
        Instr::Alloc {
            dst,
            words,
            headers,
        } => {
            let hs: Vec<String> = headers
                .iter()
                .map(|(o, h)| format!("{}:{:#x}", o, h))
                .collect();
            format!("{} := alloc {} [{}]", dst, words, hs.join(" "))
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
            let env = env.map(|e| format!(" env {}", e)).unwrap_or_default();
            format!("{} := call {}({}){}", dst, t, list(args), env)
        }
    }
}

impl fmt::Display for LinearFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: frame {}{}",
            self.name,
            self.frame_size(),
            if self.leaf { " leaf" } else { "" }
        )?;
        for i in &self.instrs {
            match i {
                LInstr::Label(b) => writeln!(f, "L{}:", b)?,
                LInstr::Op(op) => writeln!(f, "    {}", instr_text(op))?,
                LInstr::Save(r, s) => writeln!(f, "    save {} -> [rsp+{}]", r, 8 * s)?,
                LInstr::Restore(r, s) => writeln!(f, "    restore {} <- [rsp+{}]", r, 8 * s)?,
                LInstr::Jump(t) => writeln!(f, "    jump L{}", t)?,
                LInstr::CondJump {
                    cmp,
                    unsigned,
                    a,
                    b,
                    target,
                } => writeln!(
                    f,
                    "    if {} {}{} {} jump L{}",
                    a,
                    cmp.name(),
                    if *unsigned { "u" } else { "" },
                    operand_text(b),
                    target
                )?,
                LInstr::Return(r) => writeln!(f, "    return {}", r)?,
                LInstr::Trap(k) => writeln!(f, "    trap {}", k.code())?,
            }
        }
        Ok(())
    }
}
