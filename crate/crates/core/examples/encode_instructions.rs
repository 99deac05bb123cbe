//! Encodes a handful of instructions and prints their bytes.

use nml::jit::x86::{AluOp, Mem, Rm};
use nml::jit::X86Inst;
use nml::nativegen::arch::Gpr;

fn main() {
    let program = [
        X86Inst::MovRI(Gpr::Rax, 1),
        X86Inst::MovRI(Gpr::R11, 1 << 40),
        X86Inst::Alu(AluOp::Add, Rm::Reg(Gpr::Rax), Gpr::Rbx),
        X86Inst::AluImm(AluOp::Sub, Rm::Reg(Gpr::Rsp), 24),
        X86Inst::MovRM(Gpr::Rcx, Mem::base(Gpr::R14, -8)),
        X86Inst::Lea(Gpr::Rax, Mem::base(Gpr::Rax, 2)),
        X86Inst::Cqo,
        X86Inst::Ret,
    ];
    for inst in &program {
        let (bytes, _) = inst.encode();
        let hex: Vec<String> = bytes.iter().map(|b| format!("{:02x}", b)).collect();
        println!("{:<32} {}", inst.to_string(), hex.join(" "));
    }
}
