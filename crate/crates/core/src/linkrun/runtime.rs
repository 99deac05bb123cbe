//! The native runtime: stubs generated at session start, host primitives,
//! the allocation arena and the call boundary that contains traps.
//!
//! Generated code runs on its own stack. `nml_rt_enter` saves the host
//! callee-saved registers and stack pointer in the state block, switches
//! stacks and calls the entry; `nml_rt_trap` records the trap kind and
//! returns straight to the host from `nml_rt_enter`. rbp holds the stack
//! limit that non-leaf prologues compare against.

use std::cell::Cell;
use std::ptr;

use super::mem::{page_size, round_up, Mapping};
use super::{ExecutableImage, LinkError, Linker};
use crate::jit::x86::{AluOp, Cond, Mem, Rm, X86Inst};
use crate::jit::{ObjectCode, RT_ALLOC, RT_STACK_OVERFLOW, RT_TRAP};
use crate::nativegen::arch::Gpr;
use crate::nativegen::cmm::{header, TAG_TUPLE};
use crate::rt::{format_float, Trap, TrapKind};

pub const RT_ENTER: &str = "nml_rt_enter";

/// Bump allocator over a fixed range. Blocks are never freed.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeapArena {
    pub base: u64,
    pub next: u64,
    pub limit: u64,
}

impl HeapArena {
    /// Allocates a block of `words` fields after a header with `tag`;
    /// returns the address of the first field.
    pub fn alloc(&mut self, words: u64, tag: u8) -> Result<u64, TrapKind> {
        let bytes = words
            .checked_add(1)
            .and_then(|w| w.checked_mul(8))
            .ok_or(TrapKind::Exhaustion)?;
        if bytes > self.limit - self.next {
            return Err(TrapKind::Exhaustion);
        }
        let hdr = self.next;
        self.next += bytes;
        // SAFETY: `hdr` lies inside the arena mapping, below `limit`.
        unsafe { ptr::write(hdr as *mut u64, header(words as usize, tag) as u64) };
        Ok(hdr + 8)
    }

    pub fn remaining_words(&self) -> u64 {
        (self.limit - self.next) / 8
    }
}

/// Shared between the stubs and the host; field offsets are baked into
/// the stubs.
#[repr(C)]
struct RtState {
    saved_rsp: u64,
    trap_kind: u64,
    stack_top: u64,
    stack_limit: u64,
    arena: HeapArena,
    out: String,
}

const SAVED_RSP: i32 = 0;
const TRAP_KIND: i32 = 8;
const STACK_TOP: i32 = 16;
const STACK_LIMIT: i32 = 24;
const ARENA: i64 = 32;

thread_local! {
    static ACTIVE: Cell<*mut RtState> = const { Cell::new(ptr::null_mut()) };
}

fn with_state<R>(f: impl FnOnce(&mut RtState) -> R) -> R {
    let p = ACTIVE.with(|a| a.get());
    assert!(
        !p.is_null(),
        "runtime primitive called outside execute_entry"
    );
    // SAFETY: ACTIVE is set only for the duration of execute_entry, which
    // holds the unique borrow of the state.
    f(unsafe { &mut *p })
}

fn untag(v: u64) -> i64 {
    (v as i64) >> 1
}

extern "sysv64" fn host_print_int(v: u64) -> u64 {
    with_state(|s| s.out.push_str(&untag(v).to_string()));
    1
}

extern "sysv64" fn host_print_float(p: u64) -> u64 {
    // SAFETY: generated code passes a boxed float.
    let x = f64::from_bits(unsafe { ptr::read(p as *const u64) });
    with_state(|s| s.out.push_str(&format_float(x)));
    1
}

extern "sysv64" fn host_print_string(p: u64) -> u64 {
    // SAFETY: generated code passes a string block.
    let text = unsafe { read_string(p) };
    with_state(|s| s.out.push_str(&String::from_utf8_lossy(&text)));
    1
}

extern "sysv64" fn host_print_newline(_: u64) -> u64 {
    with_state(|s| s.out.push('\n'));
    1
}

/// Returns the array, or a trap code below 8.
extern "sysv64" fn host_array_make(n: u64, init: u64) -> u64 {
    let n = untag(n);
    if n < 0 {
        return TrapKind::InvalidArgument.code();
    }
    with_state(|s| match s.arena.alloc(n as u64, TAG_TUPLE) {
        Ok(a) => {
            for k in 0..n as u64 {
                // SAFETY: the block has n fields.
                unsafe { ptr::write((a + 8 * k) as *mut u64, init) };
            }
            a
        }
        Err(k) => k.code(),
    })
}

/// Bytes of a string block.
///
/// # Safety
/// `p` must point at the first field of a well-formed string block.
pub unsafe fn read_string(p: u64) -> Vec<u8> {
    let words = ptr::read((p - 8) as *const u64) >> 10;
    let total = 8 * words as usize;
    if total == 0 {
        return Vec::new();
    }
    let bytes = std::slice::from_raw_parts(p as *const u8, total);
    let pad = bytes[total - 1] as usize;
    bytes[..total - 1 - pad.min(total - 1)].to_vec()
}

type HostFn = (&'static str, u64, bool);
type Unary = extern "sysv64" fn(u64) -> u64;
type Binary = extern "sysv64" fn(u64, u64) -> u64;

fn host_functions() -> Vec<HostFn> {
    vec![
        ("print_int", host_print_int as Unary as usize as u64, false),
        (
            "print_float",
            host_print_float as Unary as usize as u64,
            false,
        ),
        (
            "print_string",
            host_print_string as Unary as usize as u64,
            false,
        ),
        (
            "print_newline",
            host_print_newline as Unary as usize as u64,
            false,
        ),
        (
            "array_make",
            host_array_make as Binary as usize as u64,
            true,
        ),
    ]
}

const CALLEE_SAVED: [Gpr; 6] = [Gpr::Rbx, Gpr::Rbp, Gpr::R12, Gpr::R13, Gpr::R14, Gpr::R15];

fn restore_host() -> Vec<X86Inst> {
    let mut v = vec![X86Inst::MovRM(Gpr::Rsp, Mem::base(Gpr::R14, SAVED_RSP))];
    v.extend(CALLEE_SAVED.iter().rev().map(|r| X86Inst::Pop(*r)));
    v
}

/// The runtime stubs for a state block at `state`.
fn runtime_object(state: u64) -> Result<ObjectCode, LinkError> {
    use X86Inst::*;
    let st = |r: Gpr| MovRI(r, state as i64);
    let mut obj = ObjectCode::default();
    let mut push = |name: &str, insts: Vec<X86Inst>| {
        obj.push_function(name, &insts, true)
            .map_err(|e| LinkError::Memory(e.to_string()))
    };

    let mut enter: Vec<X86Inst> = CALLEE_SAVED.iter().map(|r| Push(*r)).collect();
    enter.extend([
        st(Gpr::R14),
        MovMR(Mem::base(Gpr::R14, SAVED_RSP), Gpr::Rsp),
        MovRM(Gpr::Rbp, Mem::base(Gpr::R14, STACK_LIMIT)),
        MovRM(Gpr::Rsp, Mem::base(Gpr::R14, STACK_TOP)),
        CallReg(Gpr::Rdi),
        st(Gpr::R14),
    ]);
    enter.extend(restore_host());
    enter.push(Ret);
    push(RT_ENTER, enter)?;

    let mut trap = vec![
        st(Gpr::R14),
        MovMR(Mem::base(Gpr::R14, TRAP_KIND), Gpr::Rdi),
    ];
    trap.extend(restore_host());
    trap.extend([MovRI(Gpr::Rax, 0), Ret]);
    push(RT_TRAP, trap)?;

    push(
        RT_STACK_OVERFLOW,
        vec![
            MovRI(Gpr::Rdi, TrapKind::StackOverflow.code() as i64),
            JmpSym(RT_TRAP.into()),
        ],
    )?;

    // r15 holds the byte size including headers; returns the first field
    push(
        RT_ALLOC,
        vec![
            MovRI(Gpr::R14, state as i64 + ARENA),
            MovRM(Gpr::Rax, Mem::base(Gpr::R14, 8)),
            Alu(AluOp::Add, Rm::Reg(Gpr::R15), Gpr::Rax),
            AluRM(AluOp::Cmp, Gpr::R15, Mem::base(Gpr::R14, 16)),
            Jcc(Cond::A, 0),
            MovMR(Mem::base(Gpr::R14, 8), Gpr::R15),
            AluImm(AluOp::Add, Rm::Reg(Gpr::Rax), 8),
            Ret,
            Label(0),
            MovRI(Gpr::Rdi, TrapKind::Exhaustion.code() as i64),
            JmpSym(RT_TRAP.into()),
        ],
    )?;

    for (name, _, checked) in host_functions() {
        let mut body = vec![
            AluImm(AluOp::Sub, Rm::Reg(Gpr::Rsp), 8),
            MovAbsSym(Gpr::R11, format!("nml_host_{}", name), 0),
            CallReg(Gpr::R11),
            AluImm(AluOp::Add, Rm::Reg(Gpr::Rsp), 8),
        ];
        if checked {
            body.extend([
                AluImm(AluOp::Cmp, Rm::Reg(Gpr::Rax), 8),
                Jcc(Cond::B, 0),
                Ret,
                Label(0),
                MovRR(Gpr::Rdi, Gpr::Rax),
                JmpSym(RT_TRAP.into()),
            ]);
        } else {
            body.push(Ret);
        }
        push(&format!("nml_rt_{}", name), body)?;
    }
    obj.finish().map_err(|e| LinkError::Memory(e.to_string()))?;
    Ok(obj)
}

#[derive(Clone, Copy, Debug)]
pub struct MachineConfig {
    pub arena_bytes: usize,
    pub stack_bytes: usize,
    pub code_bytes: usize,
    pub data_bytes: usize,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            arena_bytes: 64 << 20,
            stack_bytes: 64 << 20,
            code_bytes: 1 << 30,
            data_bytes: 1 << 30,
        }
    }
}

/// Headroom kept below the stack limit for host primitives and for the
/// frame of a function that has just crossed the limit.
const STACK_MARGIN: usize = 1 << 20;

/// A native execution session: linker, runtime stubs, arena and stack.
pub struct Machine {
    pub linker: Linker,
    state: Box<RtState>,
    arena: Mapping,
    _stack: Mapping,
    enter: u64,
    runtime: ExecutableImage,
}

impl Machine {
    pub fn new(config: MachineConfig) -> Result<Machine, LinkError> {
        let mut linker = Linker::new(config.code_bytes, config.data_bytes)?;
        let arena = Mapping::new(
            config.arena_bytes.max(8),
            libc::PROT_READ | libc::PROT_WRITE,
        )?;
        let stack_len = round_up(config.stack_bytes.max(4 * STACK_MARGIN), page_size());
        let stack = Mapping::new(stack_len + page_size(), libc::PROT_READ | libc::PROT_WRITE)?;
        // the lowest page is a guard
        stack.protect(stack.base(), page_size(), libc::PROT_NONE)?;
        let top = (stack.base() + stack.len() as u64) & !15;
        let arena_limit = arena.base() + (config.arena_bytes as u64 & !7);
        let mut state = Box::new(RtState {
            saved_rsp: 0,
            trap_kind: 0,
            stack_top: top,
            stack_limit: stack.base() + page_size() as u64 + STACK_MARGIN as u64,
            arena: HeapArena {
                base: arena.base(),
                next: arena.base(),
                limit: arena_limit,
            },
            out: String::new(),
        });
        for (name, addr, _) in host_functions() {
            linker.table.insert(&format!("nml_host_{}", name), addr)?;
        }
        let obj = runtime_object(&mut *state as *mut RtState as u64)?;
        let runtime = linker.link_object(&obj)?;
        let enter = linker
            .table
            .get(RT_ENTER)
            .expect("runtime defines its entry");
        Ok(Machine {
            linker,
            state,
            arena,
            _stack: stack,
            enter,
            runtime,
        })
    }

    /// The image holding the runtime stubs.
    pub fn runtime_image(&self) -> &ExecutableImage {
        &self.runtime
    }

    pub fn link(&mut self, obj: &ObjectCode) -> Result<ExecutableImage, LinkError> {
        self.linker.link_object(obj)
    }

    pub fn arena(&self) -> HeapArena {
        self.state.arena
    }

    /// Runs `f` against the arena, as host primitives do.
    pub fn with_arena<R>(&mut self, f: impl FnOnce(&mut HeapArena) -> R) -> R {
        f(&mut self.state.arena)
    }

    /// Output produced by primitives since the last call.
    pub fn take_output(&mut self) -> String {
        std::mem::take(&mut self.state.out)
    }

    /// Calls a zero-argument entry and returns its result word, or the
    /// trap it raised.
    pub fn execute_entry(&mut self, img: &ExecutableImage, entry: &str) -> Result<u64, Trap> {
        assert!(img.sealed(), "executing an unsealed image");
        let addr = img
            .symbols
            .get(entry)
            .copied()
            .or_else(|| self.linker.table.get(entry))
            .unwrap_or_else(|| panic!("entry {} is not linked", entry));
        self.call(addr)
    }

    /// Calls the code at `addr` through the runtime boundary.
    pub fn call(&mut self, addr: u64) -> Result<u64, Trap> {
        assert!(
            self.linker.text_contains(addr, 1),
            "call target outside linked text"
        );
        self.state.trap_kind = 0;
        let state: *mut RtState = &mut *self.state;
        let prev = ACTIVE.with(|a| a.replace(state));
        // SAFETY: `enter` is the runtime stub with the host C calling
        // convention; it preserves host callee-saved registers and returns
        // on every path, including traps.
        let result = unsafe {
            let enter: extern "sysv64" fn(u64) -> u64 = std::mem::transmute(self.enter as usize);
            enter(addr)
        };
        ACTIVE.with(|a| a.set(prev));
        match TrapKind::from_code(self.state.trap_kind) {
            Some(kind) => Err(Trap { kind }),
            None => Ok(result),
        }
    }

    fn readable(&self, addr: u64, bytes: usize) -> bool {
        let arena = &self.state.arena;
        let in_arena = addr >= arena.base
            && addr
                .checked_add(bytes as u64)
                .is_some_and(|e| e <= arena.next);
        addr % 8 == 0 && (in_arena || self.linker.data_contains(addr, bytes))
    }

    /// A word of the heap or of linked data; None outside those.
    pub fn read_word(&self, addr: u64) -> Option<u64> {
        if !self.readable(addr, 8) {
            return None;
        }
        // SAFETY: checked to lie in mapped, readable memory.
        Some(unsafe { ptr::read(addr as *const u64) })
    }

    /// The header word of the block whose first field is at `addr`.
    pub fn block_header(&self, addr: u64) -> Option<u64> {
        self.read_word(addr.checked_sub(8)?)
    }

    pub fn read_string(&self, addr: u64) -> Option<Vec<u8>> {
        let words = self.block_header(addr)? >> 10;
        if !self.readable(addr, 8 * words as usize) {
            return None;
        }
        // SAFETY: the whole block is readable and headed as a string.
        Some(unsafe { read_string(addr) })
    }

    pub fn arena_mapping(&self) -> &Mapping {
        &self.arena
    }
}
