//! Reference-assembler goldens. Regenerate with:
//!
//!   NML_DUMP_GOLDEN_INPUTS=1 cargo test --test encoding
//!   python3 tests/golden/assemble.py
//!
//! Relocated fields are compared only after masking, since the two sides
//! fill them differently before linking.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nml::jit::x86::{AluOp, Cond, Mem, Rm, ShiftOp, SseOp, XRm};
use nml::jit::{emit_assembly_text, emit_object, RelocKind, Section, X86Inst};
use nml::lambda::{simplify, translate};
use nml::nativegen::arch::{Gpr, Xmm};
use nml::nativegen::{closure_convert, compile_functions, generate_cmm, BackendOptions};

use Gpr::*;

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn dumping() -> bool {
    std::env::var_os("NML_DUMP_GOLDEN_INPUTS").is_some()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{:02X}", b))
        .collect::<Vec<_>>()
        .join(" ")
}

fn m(base: Gpr, disp: i32) -> Mem {
    Mem::base(base, disp)
}

fn mi(base: Gpr, index: Gpr, scale: u8, disp: i32) -> Mem {
    Mem {
        base,
        index: Some((index, scale)),
        disp,
    }
}

pub fn single_cases() -> Vec<X86Inst> {
    use X86Inst::*;
    vec![
        MovRR(Rax, Rbx),
        MovRR(R8, Rdi),
        MovRR(Rcx, R15),
        MovRR(R14, R13),
        MovRM(Rax, m(Rsp, 8)),
        MovRM(Rbx, m(Rbp, 0)),
        MovRM(R12, m(R13, 0)),
        MovRM(Rdx, m(R12, -16)),
        MovRM(Rsi, m(Rax, 4096)),
        MovRM(Rdx, mi(Rcx, Rbx, 4, -4)),
        MovRM(R9, mi(R10, R11, 8, 1000)),
        MovMR(m(Rsp, 0), Rdi),
        MovMR(m(Rax, -8), R14),
        MovMR(mi(Rbp, Rsi, 1, 0), Rax),
        MovMI(m(Rax, -8), 2048),
        MovMI(m(Rsp, 16), -1),
        MovRI(Rax, 1),
        MovRI(R11, -5),
        MovRI(Rcx, 0x1_0000_0000),
        MovRI(R15, i64::MIN),
        MovzxRR8(Rax, Rax),
        MovzxRR8(Rsi, Rdi),
        MovzxRR8(R9, R10),
        MovzxRM8(Rcx, m(Rdx, 3)),
        Alu(AluOp::Add, Rm::Reg(Rax), Rbx),
        Alu(AluOp::Sub, Rm::Reg(R8), R9),
        Alu(AluOp::Xor, Rm::Reg(R15), R14),
        Alu(AluOp::Cmp, Rm::Reg(Rsp), Rbp),
        Alu(AluOp::And, Rm::Mem(m(Rsp, 24)), Rcx),
        Alu(AluOp::Or, Rm::Reg(Rdx), Rsi),
        AluRM(AluOp::Add, Rax, m(R14, 8)),
        AluRM(AluOp::Cmp, R15, m(R14, 16)),
        AluImm(AluOp::Sub, Rm::Reg(Rsp), 8),
        AluImm(AluOp::Add, Rm::Reg(Rsp), 1032),
        AluImm(AluOp::Cmp, Rm::Reg(Rax), -128),
        AluImm(AluOp::And, Rm::Reg(R12), -2),
        AluImm(AluOp::Xor, Rm::Mem(m(Rbx, 0)), 1),
        Imul(Rax, Rm::Reg(Rcx)),
        Imul(R13, Rm::Mem(m(Rsp, 8))),
        ImulImm(Rdx, Rm::Reg(Rdx), 10),
        ImulImm(Rbx, Rm::Reg(R8), 100000),
        Shift(ShiftOp::Sar, Rm::Reg(Rcx), 1),
        Shift(ShiftOp::Shl, Rm::Reg(R10), 3),
        Shift(ShiftOp::Shr, Rm::Reg(Rdx), 9),
        Lea(Rbx, m(Rcx, 2)),
        Lea(Rcx, mi(Rdx, Rdx, 1, 1)),
        Lea(R15, mi(Rsp, Rax, 8, -7)),
        Lea(Rax, m(R13, 0)),
        Cqo,
        Idiv(Rm::Reg(R14)),
        Idiv(Rm::Mem(m(Rsp, 0))),
        Test(Rax, Rax),
        Test(R11, Rbx),
        Setcc(Cond::E, Rax),
        Setcc(Cond::L, Rsi),
        Setcc(Cond::A, R8),
        CallMem(m(R10, 0)),
        CallReg(R11),
        Ret,
        Push(Rbx),
        Push(R15),
        Pop(Rbp),
        Pop(R12),
        Int3,
        MovsdLoad(Xmm(0), m(Rax, 0)),
        MovsdLoad(Xmm(15), m(Rsp, 40)),
        MovsdStore(m(Rax, 8), Xmm(3)),
        MovsdStore(m(R12, 0), Xmm(9)),
        Movapd(Xmm(1), Xmm(14)),
        Sse(SseOp::Add, Xmm(0), XRm::Reg(Xmm(1))),
        Sse(SseOp::Sub, Xmm(8), XRm::Reg(Xmm(2))),
        Sse(SseOp::Mul, Xmm(3), XRm::Mem(m(Rsp, 8))),
        Sse(SseOp::Div, Xmm(10), XRm::Reg(Xmm(11))),
        Sse(SseOp::Sqrt, Xmm(4), XRm::Reg(Xmm(4))),
        Xorpd(Xmm(7), Xmm(7)),
        Cvtsi2sd(Xmm(2), Rm::Reg(Rcx)),
        Cvtsi2sd(Xmm(12), Rm::Reg(R9)),
        Cvttsd2si(Rax, XRm::Reg(Xmm(5))),
        Cvttsd2si(R13, XRm::Reg(Xmm(13))),
        MovqXR(Xmm(0), R14),
        MovqXR(Xmm(15), Rax),
        MovqRX(Rbx, Xmm(6)),
        MovqRX(R15, Xmm(12)),
        CallSym("nml_rt_alloc".into()),
        JmpSym("nml_rt_trap".into()),
        JccSym(Cond::B, "nml_rt_stack_overflow".into()),
        MovAbsSym(Rbx, "nml_phrase1_f".into(), 0),
        MovAbsSym(R11, "nml_phrase1_g".into(), 8),
    ]
}

fn read_golden(name: &str) -> Result<HashMap<String, String>, String> {
    let path = golden_dir().join(name);
    let text = std::fs::read_to_string(&path).map_err(|_| format!("missing {}", path.display()))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(asm, bytes)| (asm.to_string(), bytes.to_string()))
        .collect())
}

/// Bytes with every byte that a fixup will overwrite replaced by `__`.
pub fn masked(bytes: &[u8], holes: &[(usize, usize)]) -> String {
    bytes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if holes.iter().any(|&(o, w)| i >= o && i < o + w) {
                "__".to_string()
            } else {
                format!("{:02X}", b)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn mask_hex(hex: &str, holes: &[(usize, usize)]) -> String {
    let bytes: Vec<u8> = hex
        .split_whitespace()
        .map(|h| u8::from_str_radix(h, 16).unwrap())
        .collect();
    masked(&bytes, holes)
}

pub const FUNCTIONS: &[(&str, &str)] = &[
    ("pair", "let f x = (x, x + 1);;"),
    (
        "fib",
        "let rec fib n = if n < 2 then n else fib (n - 1) + fib (n - 2);;",
    ),
    ("bounds_div", "let g a = a.(0) / 3;;"),
    (
        "floats",
        "let h x y = sqrt (x *. y +. 1.5) -. float_of_int (int_of_float x);;",
    ),
    (
        "loop",
        "let squares n = let s = [| 0 |] in for i = 1 to n do s.(0) <- s.(0) + i * i done; s.(0);;",
    ),
    ("closure", "let adder n = fun x -> x + n + 1;;"),
    ("string", "print_string \"hi\\n\";;"),
    (
        "compare",
        "let c a b = if a < b && b <> 7 then a mod b else -a;;",
    ),
];

fn compile(src: &str) -> (String, nml::jit::ObjectCode) {
    let ast = nml::frontend::parse_phrase(src).unwrap();
    let (tree, _) = nml::frontend::infer_phrase(&nml::frontend::TypeEnv::new(), &ast, 1).unwrap();
    let mut l = translate(&tree);
    l.body = simplify(l.body);
    let cmm = generate_cmm(closure_convert(l, 1));
    let fns = compile_functions(&cmm, BackendOptions::default());
    (
        emit_assembly_text(&fns, &cmm.data),
        emit_object(&fns, &cmm.data, 1).unwrap(),
    )
}

/// Checks every single-instruction case; returns how many were compared.
pub fn check_single() -> Result<usize, String> {
    let cases = single_cases();
    if dumping() {
        let lines: Vec<String> = cases.iter().map(|i| i.to_string()).collect();
        std::fs::write(
            golden_dir().join("encoding_input.s"),
            lines.join("\n") + "\n",
        )
        .unwrap();
        return Ok(0);
    }
    let golden = read_golden("encoding.golden")?;
    for inst in &cases {
        let text = inst.to_string();
        let want = golden
            .get(&text)
            .ok_or_else(|| format!("no golden for `{}`", text))?;
        let (bytes, fixups) = inst.encode();
        let holes: Vec<(usize, usize)> = fixups
            .iter()
            .map(|f| (f.offset, if f.kind == RelocKind::Rel32 { 4 } else { 8 }))
            .collect();
        let (got, want) = (masked(&bytes, &holes), mask_hex(want, &holes));
        if got != want {
            return Err(format!("`{}`: {} vs reference {}", text, got, want));
        }
    }
    Ok(cases.len())
}

/// Checks every whole-function case; returns how many were compared.
pub fn check_functions() -> Result<usize, String> {
    let dir = golden_dir().join("functions");
    for (name, src) in FUNCTIONS {
        let (listing, obj) = compile(src);
        let listing_path = dir.join(format!("{}.s", name));
        if dumping() {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&listing_path, &listing).unwrap();
            continue;
        }
        let committed = std::fs::read_to_string(&listing_path).map_err(|e| e.to_string())?;
        if listing != committed {
            return Err(format!("{}: listing changed; regenerate the goldens", name));
        }
        let golden = read_golden(&format!("functions/{}.golden", name))?;
        for section in [Section::Text, Section::Data] {
            let holes: Vec<(usize, usize)> = obj
                .relocs
                .iter()
                .filter(|r| r.section == section)
                .map(|r| (r.offset, r.width()))
                .collect();
            let ours = match section {
                Section::Text => &obj.text,
                Section::Data => &obj.data,
            };
            let want = golden.get(section.name()).map(String::as_str).unwrap_or("");
            let want_len = want.split_whitespace().count();
            // our text ends on a 16-byte boundary, padded with int3
            let (body, pad) = ours.split_at(want_len.min(ours.len()));
            let padded = match section {
                Section::Text => {
                    ours.len() == want_len.next_multiple_of(16) && pad.iter().all(|&b| b == 0xCC)
                }
                Section::Data => pad.is_empty(),
            };
            if !padded {
                return Err(format!(
                    "{} {}: {} bytes vs reference {}",
                    name,
                    section.name(),
                    ours.len(),
                    want_len
                ));
            }
            let (got, want) = (masked(body, &holes), mask_hex(want, &holes));
            if got != want {
                return Err(format!(
                    "{} {}:\n  ours {}\n  ref  {}",
                    name,
                    section.name(),
                    got,
                    want
                ));
            }
        }
    }
    Ok(FUNCTIONS.len())
}
