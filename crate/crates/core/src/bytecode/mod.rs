//! Bytecode backend: an accumulator/stack machine in the style of ZINC.
//!
//! The accumulator holds the most recent result. `Push` copies it onto the
//! stack; n-ary primitives take their first operand from the accumulator and
//! pop the rest, so arguments are evaluated right to left.

mod compile;
mod vm;

use std::fmt::Write;
use std::rc::Rc;

pub use compile::compile_bytecode;
pub use vm::{run_bytecode, Vm, VmClosure, VmConfig, VmValue};

use crate::lambda::{const_text, Const, PrimOp};

pub type Label = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum BcInstr {
    /// Loads constant-pool entry `k` into the accumulator.
    Const(usize),
    Push,
    /// Loads the stack slot `n` positions below the top.
    Acc(usize),
    /// Stores the accumulator into the stack slot `n` positions below the top.
    Assign(usize),
    EnvAcc(usize),
    /// Loads the closure of the running function.
    SelfClosure,
    /// Pops `captures` values (the first one on top) into a new closure
    /// whose code starts at the label.
    Closure(Label, usize),
    /// Calls the accumulator with `argc` arguments popped from the stack,
    /// first argument on top.
    Apply(usize),
    Return,
    Branch(Label),
    BranchIf(Label),
    BranchIfNot(Label),
    Prim(PrimOp),
    MakeBlock(usize, u8),
    GetField(usize),
    GetGlobal(String),
    SetGlobal(String),
    Pop(usize),
    Stop,
}

#[derive(Clone, Debug)]
pub struct BcProgram {
    pub code: Vec<BcInstr>,
    pub constants: Vec<Const>,
    pub entry: usize,
    /// Code labels of compiled function bodies, for listings.
    pub functions: Vec<(Label, String)>,
}

impl BcProgram {
    /// Numbered listing for `--dump-ir bytecode`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, ins) in self.code.iter().enumerate() {
            for (_, name) in self.functions.iter().filter(|(l, _)| *l == i) {
                let _ = writeln!(out, "{}:", name);
            }
            let _ = writeln!(out, "{:5}  {}", i, self.render(ins));
        }
        out
    }

    fn render(&self, ins: &BcInstr) -> String {
        match ins {
            BcInstr::Const(k) => format!("const {}", const_text(&self.constants[*k])),
            BcInstr::Push => "push".into(),
            BcInstr::Acc(n) => format!("acc {}", n),
            BcInstr::Assign(n) => format!("assign {}", n),
            BcInstr::EnvAcc(n) => format!("envacc {}", n),
            BcInstr::SelfClosure => "selfclosure".into(),
            BcInstr::Closure(l, n) => format!("closure L{}, {}", l, n),
            BcInstr::Apply(n) => format!("apply {}", n),
            BcInstr::Return => "return".into(),
            BcInstr::Branch(l) => format!("branch L{}", l),
            BcInstr::BranchIf(l) => format!("branchif L{}", l),
            BcInstr::BranchIfNot(l) => format!("branchifnot L{}", l),
            BcInstr::Prim(op) => format!("prim {}", op.name()),
            BcInstr::MakeBlock(n, tag) => format!("makeblock {}, {}", n, tag),
            BcInstr::GetField(n) => format!("getfield {}", n),
            BcInstr::GetGlobal(s) => format!("getglobal {}", s),
            BcInstr::SetGlobal(s) => format!("setglobal {}", s),
            BcInstr::Pop(n) => format!("pop {}", n),
            BcInstr::Stop => "stop".into(),
        }
    }

    /// Every branch and closure label lies within the code.
    pub fn labels_in_range(&self) -> bool {
        self.entry < self.code.len()
            && self.code.iter().all(|i| match i {
                BcInstr::Branch(l)
                | BcInstr::BranchIf(l)
                | BcInstr::BranchIfNot(l)
                | BcInstr::Closure(l, _) => *l < self.code.len(),
                _ => true,
            })
    }
}

/// Shared handle to a program; closures keep their defining program alive.
pub type BcHandle = Rc<BcProgram>;
