//! The in-process linker and the native runtime.
//!
//! All text lives in one reserved region so every Rel32 reaches every
//! function, the runtime stubs included. Data lives in a second region.
//! Text chunks are written while read-write and sealed read-execute before
//! anything runs; they never become writable again.

pub mod mem;
pub mod runtime;

use std::collections::BTreeMap;
use std::collections::HashMap;

use thiserror::Error;

use crate::jit::{ObjectCode, Reloc, RelocKind, Section};
use mem::Region;
pub use runtime::{HeapArena, Machine, MachineConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("unresolved symbol {0}")]
    Unresolved(String),
    #[error("relocation to {target} out of 32-bit range (displacement {displacement:#x})")]
    Rel32Overflow { target: String, displacement: i64 },
    #[error("symbol {0} is already defined")]
    Redefined(String),
    #[error("memory: {0}")]
    Memory(String),
    #[error("code or data region exhausted")]
    RegionFull,
}

/// Session-wide map from symbol names to absolute addresses. Entries are
/// only ever added.
#[derive(Clone, Debug, Default)]
pub struct GlobalSymbolTable {
    map: BTreeMap<String, u64>,
}

impl GlobalSymbolTable {
    pub fn get(&self, name: &str) -> Option<u64> {
        self.map.get(name).copied()
    }

    pub fn insert(&mut self, name: &str, addr: u64) -> Result<(), LinkError> {
        if self.map.contains_key(name) {
            return Err(LinkError::Redefined(name.to_string()));
        }
        self.map.insert(name.to_string(), addr);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageState {
    Writable,
    Sealed,
}

/// A linked object in memory.
#[derive(Clone, Debug)]
pub struct ExecutableImage {
    pub text_base: u64,
    pub text_len: usize,
    pub data_base: u64,
    pub data_len: usize,
    pub state: ImageState,
    /// Every symbol the object defined, at its absolute address.
    pub symbols: HashMap<String, u64>,
}

impl ExecutableImage {
    pub fn sealed(&self) -> bool {
        self.state == ImageState::Sealed
    }

    pub fn section_base(&self, s: Section) -> u64 {
        match s {
            Section::Text => self.text_base,
            Section::Data => self.data_base,
        }
    }
}

/// Patches one relocation field inside `section`, whose first byte will
/// live at `section_base`.
pub fn apply_relocation(
    section: &mut [u8],
    r: &Reloc,
    section_base: u64,
    target: u64,
) -> Result<(), LinkError> {
    let value = target.wrapping_add(r.addend as u64);
    match r.kind {
        RelocKind::Abs64 => section[r.offset..r.offset + 8].copy_from_slice(&value.to_le_bytes()),
        RelocKind::Rel32 => {
            let place = section_base.wrapping_add(r.offset as u64);
            let disp = value.wrapping_sub(place) as i64;
            let field = i32::try_from(disp).map_err(|_| LinkError::Rel32Overflow {
                target: r.target.clone(),
                displacement: disp,
            })?;
            section[r.offset..r.offset + 4].copy_from_slice(&field.to_le_bytes());
        }
    }
    Ok(())
}

/// Owns the code and data regions for a session.
#[derive(Debug)]
pub struct Linker {
    text: Region,
    data: Region,
    pub table: GlobalSymbolTable,
}

impl Linker {
    pub fn new(text_bytes: usize, data_bytes: usize) -> Result<Linker, LinkError> {
        Ok(Linker {
            text: Region::reserve(text_bytes)?,
            data: Region::reserve(data_bytes)?,
            table: GlobalSymbolTable::default(),
        })
    }

    /// True when `[addr, addr + bytes)` is inside data handed out so far.
    pub fn data_contains(&self, addr: u64, bytes: usize) -> bool {
        self.data.contains(addr, bytes)
    }

    pub fn text_contains(&self, addr: u64, bytes: usize) -> bool {
        self.text.contains(addr, bytes)
    }

    /// Copies the sections into fresh pages, patches every relocation,
    /// registers global symbols and seals the text.
    pub fn link_object(&mut self, obj: &ObjectCode) -> Result<ExecutableImage, LinkError> {
        for r in &obj.relocs {
            if obj.symbol(&r.target).is_none() && self.table.get(&r.target).is_none() {
                return Err(LinkError::Unresolved(r.target.clone()));
            }
        }
        for d in obj.defined.iter().filter(|d| d.global) {
            if self.table.get(&d.name).is_some() {
                return Err(LinkError::Redefined(d.name.clone()));
            }
        }
        let text_base = self.text.take(obj.text.len())?;
        let data_base = if obj.data.is_empty() {
            0
        } else {
            self.data.take(obj.data.len())?
        };
        let mut img = ExecutableImage {
            text_base,
            text_len: obj.text.len(),
            data_base,
            data_len: obj.data.len(),
            state: ImageState::Writable,
            symbols: HashMap::new(),
        };
        for d in &obj.defined {
            img.symbols.insert(
                d.name.clone(),
                img.section_base(d.section) + d.offset as u64,
            );
        }
        let mut text = obj.text.clone();
        let mut data = obj.data.clone();
        for r in &obj.relocs {
            let target = match img.symbols.get(&r.target) {
                Some(a) => *a,
                None => self
                    .table
                    .get(&r.target)
                    .ok_or_else(|| LinkError::Unresolved(r.target.clone()))?,
            };
            let buf = match r.section {
                Section::Text => &mut text,
                Section::Data => &mut data,
            };
            apply_relocation(buf, r, img.section_base(r.section), target)?;
        }
        // SAFETY: both chunks were just made writable and are at least as
        // long as the copied sections.
        unsafe {
            std::ptr::copy_nonoverlapping(text.as_ptr(), text_base as *mut u8, text.len());
            if !data.is_empty() {
                std::ptr::copy_nonoverlapping(data.as_ptr(), data_base as *mut u8, data.len());
            }
        }
        self.text.seal(text_base, text.len())?;
        img.state = ImageState::Sealed;
        for d in obj.defined.iter().filter(|d| d.global) {
            self.table.insert(&d.name, img.symbols[&d.name])?;
        }
        Ok(img)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jit::x86::{AluOp, Mem, Rm, X86Inst};
    use crate::jit::{SymbolDef, RT_ALLOC};
    use crate::nativegen::arch::Gpr;
    use crate::rt::TrapKind;

    fn reloc(kind: RelocKind, offset: usize, addend: i64) -> Reloc {
        Reloc {
            section: Section::Text,
            offset,
            kind,
            target: "t".into(),
            addend,
        }
    }

    #[test]
    fn rel32_example() {
        let mut buf = vec![0u8; 0x40];
        apply_relocation(
            &mut buf,
            &reloc(RelocKind::Rel32, 0x20, -4),
            0x7f00_0000_1000,
            0x7f00_0000_3000,
        )
        .unwrap();
        assert_eq!(
            u32::from_le_bytes(buf[0x20..0x24].try_into().unwrap()),
            0x1FDC
        );
    }

    #[test]
    fn abs64_example() {
        let mut buf = vec![0u8; 8];
        apply_relocation(
            &mut buf,
            &reloc(RelocKind::Abs64, 0, 0),
            0,
            0x7f00_0000_2000,
        )
        .unwrap();
        assert_eq!(buf, vec![0x00, 0x20, 0x00, 0x00, 0x00, 0x7F, 0x00, 0x00]);
    }

    #[test]
    fn rel32_overflow_is_an_error() {
        let mut buf = vec![0u8; 8];
        // displacement exactly 2^31
        let r = apply_relocation(&mut buf, &reloc(RelocKind::Rel32, 0, 0), 0, 1 << 31);
        assert!(matches!(r, Err(LinkError::Rel32Overflow { .. })));
        assert!(
            apply_relocation(&mut buf, &reloc(RelocKind::Rel32, 0, 0), 0, (1 << 31) - 1).is_ok()
        );
    }

    fn machine() -> Machine {
        Machine::new(MachineConfig {
            arena_bytes: 4096,
            ..Default::default()
        })
        .unwrap()
    }

    fn function_object(name: &str, insts: Vec<X86Inst>) -> ObjectCode {
        let mut obj = ObjectCode::default();
        obj.push_function(name, &insts, true).unwrap();
        obj.finish().unwrap();
        obj
    }

    #[test]
    fn object_without_relocations_adds_one_symbol() {
        let mut m = machine();
        let before = m.linker.table.len();
        let obj = function_object(
            "nml_phrase1_entry",
            vec![X86Inst::MovRI(Gpr::Rax, 1), X86Inst::Ret],
        );
        let img = m.link(&obj).unwrap();
        assert!(img.sealed());
        assert_eq!(m.linker.table.len(), before + 1);
        assert_eq!(m.execute_entry(&img, "nml_phrase1_entry"), Ok(1));
    }

    #[test]
    fn unresolved_symbol_is_named() {
        let mut m = machine();
        let obj = function_object(
            "f",
            vec![X86Inst::CallSym("nml_phrase9_missing".into()), X86Inst::Ret],
        );
        assert_eq!(
            m.link(&obj).unwrap_err(),
            LinkError::Unresolved("nml_phrase9_missing".into())
        );
    }

    fn alloc_twice() -> Vec<X86Inst> {
        vec![
            X86Inst::MovRI(Gpr::R15, 24),
            X86Inst::CallSym(RT_ALLOC.into()),
            X86Inst::MovRR(Gpr::Rbx, Gpr::Rax),
            X86Inst::MovRI(Gpr::R15, 24),
            X86Inst::CallSym(RT_ALLOC.into()),
            X86Inst::Alu(AluOp::Sub, Rm::Reg(Gpr::Rax), Gpr::Rbx),
            X86Inst::Ret,
        ]
    }

    #[test]
    fn native_allocations_are_contiguous() {
        let mut m = machine();
        let img = m.link(&function_object("two", alloc_twice())).unwrap();
        assert_eq!(m.execute_entry(&img, "two"), Ok(24));
        assert_eq!(m.arena().next - m.arena().base, 48);
        let r = img.symbols["two"];
        // the call displacement reads back to the registered stub address
        let text = unsafe { std::slice::from_raw_parts(img.text_base as *const u8, img.text_len) };
        let at = text.iter().position(|b| *b == 0xE8).unwrap() + 1;
        let field = i32::from_le_bytes(text[at..at + 4].try_into().unwrap()) as i64;
        assert_eq!(
            (r as i64 + at as i64 + 4 + field) as u64,
            m.linker.table.get(RT_ALLOC).unwrap()
        );
    }

    #[test]
    fn arena_exhaustion_traps_and_session_survives() {
        let mut m = machine();
        let remaining = m.arena().remaining_words();
        let big = vec![
            X86Inst::MovRI(Gpr::R15, 8 * (remaining as i64 + 1)),
            X86Inst::CallSym(RT_ALLOC.into()),
            X86Inst::Ret,
        ];
        let img = m.link(&function_object("big", big)).unwrap();
        assert_eq!(
            m.execute_entry(&img, "big").unwrap_err().kind,
            TrapKind::Exhaustion
        );
        let img = m.link(&function_object("two", alloc_twice())).unwrap();
        assert_eq!(m.execute_entry(&img, "two"), Ok(24));
    }

    #[test]
    fn host_arena_round_trips_a_boxed_float() {
        let mut m = machine();
        let p = m.with_arena(|a| a.alloc(1, 253)).unwrap();
        unsafe { std::ptr::write(p as *mut u64, 1.5f64.to_bits()) };
        assert_eq!(m.block_header(p), Some((1 << 10) | 253));
        assert_eq!(f64::from_bits(m.read_word(p).unwrap()), 1.5);
        let q = m.with_arena(|a| a.alloc(2, 0)).unwrap();
        let r = m.with_arena(|a| a.alloc(2, 0)).unwrap();
        assert_eq!(r - q, 24);
        let left = m.arena().remaining_words();
        assert_eq!(
            m.with_arena(|a| a.alloc(left, 0)),
            Err(TrapKind::Exhaustion)
        );
    }

    #[test]
    fn data_relocation_points_at_text() {
        let mut m = machine();
        let mut obj = function_object("f", vec![X86Inst::MovRI(Gpr::Rax, 7), X86Inst::Ret]);
        obj.data = vec![0; 8];
        obj.defined.push(SymbolDef {
            name: "cell".into(),
            section: Section::Data,
            offset: 0,
            global: false,
        });
        obj.relocs.push(Reloc {
            section: Section::Data,
            offset: 0,
            kind: RelocKind::Abs64,
            target: "f".into(),
            addend: 0,
        });
        let img = m.link(&obj).unwrap();
        assert_eq!(m.read_word(img.symbols["cell"]), Some(img.symbols["f"]));
        assert!(m.linker.table.get("cell").is_none());
    }

    fn protections(addr: u64) -> String {
        let maps = std::fs::read_to_string("/proc/self/maps").unwrap();
        for line in maps.lines() {
            let mut parts = line.split_whitespace();
            let range = parts.next().unwrap();
            let perms = parts.next().unwrap();
            let (lo, hi) = range.split_once('-').unwrap();
            let (lo, hi) = (
                u64::from_str_radix(lo, 16).unwrap(),
                u64::from_str_radix(hi, 16).unwrap(),
            );
            if lo <= addr && addr < hi {
                return perms.to_string();
            }
        }
        panic!("{:#x} not mapped", addr)
    }

    #[test]
    fn sealed_text_is_executable_and_not_writable() {
        let mut m = machine();
        let img = m
            .link(&function_object(
                "f",
                vec![X86Inst::MovRI(Gpr::Rax, 3), X86Inst::Ret],
            ))
            .unwrap();
        assert_eq!(&protections(img.text_base)[..3], "r-x");
        assert_eq!(&protections(m.runtime_image().text_base)[..3], "r-x");
        let data = m.link(&{
            let mut o = function_object("g", vec![X86Inst::Ret]);
            o.data = vec![1; 8];
            o
        });
        assert_eq!(&protections(data.unwrap().data_base)[..3], "rw-");
        let _ = Mem::base(Gpr::Rax, 0);
    }
}
