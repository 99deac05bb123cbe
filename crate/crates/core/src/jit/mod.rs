//! The JIT emitter: encodes linear code and data items into an in-memory
//! object with relocations and symbols, and renders an assembly listing.

pub mod lower;
pub mod x86;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::nativegen::clambda::entry_symbol;
use crate::nativegen::cmm::{header, DataItem, TAG_CLOSURE, TAG_FLOAT, TAG_STRING};
use crate::nativegen::linearize::LinearFn;
pub use lower::{lower_function, RT_ALLOC, RT_STACK_OVERFLOW, RT_TRAP};
pub use x86::{assemble, RelocKind, X86Inst};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JitError {
    #[error("compiler bug: undefined local label .L{0}")]
    UndefinedLabel(u32),
    #[error("compiler bug: cannot encode {0}")]
    Unencodable(String),
    #[error("compiler bug: symbol {0} defined twice")]
    DuplicateSymbol(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Section {
    Text,
    Data,
}

impl Section {
    pub fn name(self) -> &'static str {
        match self {
            Section::Text => "text",
            Section::Data => "data",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reloc {
    pub section: Section,
    pub offset: usize,
    pub kind: RelocKind,
    pub target: String,
    pub addend: i64,
}

impl Reloc {
    pub fn width(&self) -> usize {
        match self.kind {
            RelocKind::Rel32 => 4,
            RelocKind::Abs64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolDef {
    pub name: String,
    pub section: Section,
    pub offset: usize,
    pub global: bool,
}

/// Byte written into text before relocation and as padding.
pub const TEXT_SENTINEL: u8 = 0xCC;
/// Byte written into data fields before relocation.
pub const DATA_SENTINEL: u8 = 0;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ObjectCode {
    pub text: Vec<u8>,
    pub data: Vec<u8>,
    pub relocs: Vec<Reloc>,
    pub defined: Vec<SymbolDef>,
    /// Symbols the relocations need that this object does not define.
    pub referenced: Vec<String>,
}

impl ObjectCode {
    pub fn symbol(&self, name: &str) -> Option<&SymbolDef> {
        self.defined.iter().find(|d| d.name == name)
    }

    pub fn section(&self, s: Section) -> &[u8] {
        match s {
            Section::Text => &self.text,
            Section::Data => &self.data,
        }
    }

    /// Hex dump: sections, then relocations, then symbols.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in [Section::Text, Section::Data] {
            let bytes = self.section(s);
            let _ = writeln!(out, "section {} size {:#x}", s.name(), bytes.len());
            for (k, row) in bytes.chunks(16).enumerate() {
                let hex: Vec<String> = row.iter().map(|b| format!("{:02x}", b)).collect();
                let _ = writeln!(out, "  {:04x}  {}", k * 16, hex.join(" "));
            }
        }
        let _ = writeln!(out, "relocs {}", self.relocs.len());
        for r in &self.relocs {
            let kind = match r.kind {
                RelocKind::Rel32 => "Rel32",
                RelocKind::Abs64 => "Abs64",
            };
            let _ = writeln!(
                out,
                "  {} {}+{:#x} -> {} {}",
                kind,
                r.section.name(),
                r.offset,
                r.target,
                r.addend
            );
        }
        let _ = writeln!(out, "symbols {}", self.defined.len());
        for d in &self.defined {
            let vis = if d.global { "global" } else { "local" };
            let _ = writeln!(
                out,
                "  {} {}+{:#x} {}",
                vis,
                d.section.name(),
                d.offset,
                d.name
            );
        }
        out
    }
}

impl ObjectCode {
    /// Appends an assembled function at the next 16-byte boundary.
    pub fn push_function(
        &mut self,
        name: &str,
        insts: &[X86Inst],
        global: bool,
    ) -> Result<(), JitError> {
        align(&mut self.text, 16, TEXT_SENTINEL);
        let base = self.text.len();
        self.defined.push(SymbolDef {
            name: name.to_string(),
            section: Section::Text,
            offset: base,
            global,
        });
        let asm = assemble(insts)?;
        self.text.extend_from_slice(&asm.bytes);
        for fx in asm.fixups {
            let r = Reloc {
                section: Section::Text,
                offset: base + fx.offset,
                kind: fx.kind,
                target: fx.symbol,
                addend: fx.addend,
            };
            self.text[r.offset..r.offset + r.width()].fill(TEXT_SENTINEL);
            self.relocs.push(r);
        }
        Ok(())
    }

    /// Checks name uniqueness and fills in the referenced symbols.
    pub fn finish(&mut self) -> Result<(), JitError> {
        let mut names = BTreeSet::new();
        for d in &self.defined {
            if !names.insert(d.name.as_str()) {
                return Err(JitError::DuplicateSymbol(d.name.clone()));
            }
        }
        let referenced: BTreeSet<String> = self
            .relocs
            .iter()
            .filter(|r| !names.contains(r.target.as_str()))
            .map(|r| r.target.clone())
            .collect();
        self.referenced = referenced.into_iter().collect();
        Ok(())
    }
}

fn align(buf: &mut Vec<u8>, to: usize, fill: u8) {
    while buf.len() % to != 0 {
        buf.push(fill);
    }
}

/// Lowers every function, numbering local labels across the object.
pub fn lower_all(fns: &[LinearFn]) -> Result<Vec<Vec<X86Inst>>, JitError> {
    let mut labels = HashMap::new();
    let mut next = 0;
    fns.iter()
        .enumerate()
        .map(|(k, f)| lower_function(f, k, &mut labels, &mut next))
        .collect()
}

/// Bytes of a string block body: the characters, zero padding and a final
/// byte holding the padding length, filling whole words.
pub fn string_body(s: &str) -> Vec<u8> {
    let words = s.len() / 8 + 1;
    let mut body = s.as_bytes().to_vec();
    let pad = words * 8 - 1 - s.len();
    body.resize(words * 8 - 1, 0);
    body.push(pad as u8);
    body
}

fn is_global(name: &str, entry: &str, data: &[DataItem]) -> bool {
    name == entry
        || data
            .iter()
            .any(|d| matches!(d, DataItem::GlobalSlot(s) if s == name))
}

pub fn emit_object(
    fns: &[LinearFn],
    data: &[DataItem],
    phrase: u32,
) -> Result<ObjectCode, JitError> {
    let entry = entry_symbol(phrase);
    let mut obj = ObjectCode::default();
    for (f, insts) in fns.iter().zip(lower_all(fns)?) {
        obj.push_function(&f.name, &insts, is_global(&f.name, &entry, data))?;
    }
    align(&mut obj.text, 16, TEXT_SENTINEL);
    for item in data {
        align(&mut obj.data, 8, 0);
        let (hdr, body): (Option<i64>, Vec<u8>) = match item {
            DataItem::GlobalSlot(_) => (None, 1u64.to_le_bytes().to_vec()),
            DataItem::BoxedFloat(_, x) => (
                Some(header(1, TAG_FLOAT)),
                x.to_bits().to_le_bytes().to_vec(),
            ),
            DataItem::Str(_, s) => {
                let body = string_body(s);
                (Some(header(body.len() / 8, TAG_STRING)), body)
            }
            DataItem::StaticClosure(_, _) => (Some(header(1, TAG_CLOSURE)), vec![DATA_SENTINEL; 8]),
        };
        if let Some(h) = hdr {
            obj.data.extend_from_slice(&h.to_le_bytes());
        }
        let at = obj.data.len();
        obj.defined.push(SymbolDef {
            name: item.symbol().to_string(),
            section: Section::Data,
            offset: at,
            global: is_global(item.symbol(), &entry, data),
        });
        if let DataItem::StaticClosure(_, code) = item {
            obj.relocs.push(Reloc {
                section: Section::Data,
                offset: at,
                kind: RelocKind::Abs64,
                target: code.clone(),
                addend: 0,
            });
        }
        obj.data.extend_from_slice(&body);
    }
    obj.finish()?;
    Ok(obj)
}

/// A GAS Intel-syntax listing of the object. Diagnostic only.
pub fn emit_assembly_text(fns: &[LinearFn], data: &[DataItem]) -> String {
    let mut out = String::from("    .intel_syntax noprefix\n    .text\n");
    let lowered = match lower_all(fns) {
        Ok(l) => l,
        Err(e) => return format!("# {}\n", e),
    };
    for (f, insts) in fns.iter().zip(lowered) {
        let kind = if f.leaf { "leaf" } else { "calls" };
        let _ = writeln!(
            out,
            "    .p2align 4\n# {} frame {} {}",
            f.name,
            f.frame_size(),
            kind
        );
        let _ = writeln!(out, "{}:", f.name);
        for i in insts {
            match i {
                X86Inst::Label(_) => {
                    let _ = writeln!(out, "{}", i);
                }
                i => {
                    let _ = writeln!(out, "    {}", i);
                }
            }
        }
    }
    if !data.is_empty() {
        out.push_str("    .data\n");
    }
    for item in data {
        out.push_str("    .p2align 3\n");
        match item {
            DataItem::GlobalSlot(s) => {
                let _ = writeln!(out, "{}:\n    .quad 1  # unit", s);
            }
            DataItem::BoxedFloat(s, x) => {
                let _ = writeln!(out, "    .quad {:#x}  # header", header(1, TAG_FLOAT));
                let _ = writeln!(out, "{}:\n    .quad {:#018x}  # {:?}", s, x.to_bits(), x);
            }
            DataItem::Str(s, text) => {
                let body = string_body(text);
                let _ = writeln!(
                    out,
                    "    .quad {:#x}  # header",
                    header(body.len() / 8, TAG_STRING)
                );
                let bytes: Vec<String> = body.iter().map(|b| b.to_string()).collect();
                let _ = writeln!(out, "{}:\n    .byte {}  # {:?}", s, bytes.join(", "), text);
            }
            DataItem::StaticClosure(s, code) => {
                let _ = writeln!(out, "    .quad {:#x}  # header", header(1, TAG_CLOSURE));
                let _ = writeln!(out, "{}:\n    .quad {}", s, code);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{infer_phrase, parse_phrase, TypeEnv};
    use crate::lambda::{simplify, translate};
    use crate::nativegen::{closure_convert, compile_functions, generate_cmm, BackendOptions};

    fn build(src: &str) -> (Vec<LinearFn>, Vec<DataItem>) {
        let ast = parse_phrase(src).unwrap();
        let (tt, _) = infer_phrase(&TypeEnv::new(), &ast, 1).unwrap();
        let mut l = translate(&tt);
        l.body = simplify(l.body);
        let cmm = generate_cmm(closure_convert(l, 1));
        (compile_functions(&cmm, BackendOptions::default()), cmm.data)
    }

    fn object(src: &str) -> ObjectCode {
        let (fns, data) = build(src);
        emit_object(&fns, &data, 1).unwrap()
    }

    #[test]
    fn unit_phrase_returns_one() {
        let obj = object("();;");
        let entry = obj.symbol("nml_phrase1_entry").unwrap();
        assert!(entry.global);
        assert!(obj.relocs.iter().all(|r| r.section != Section::Data));
        assert_eq!(
            &obj.text[..8],
            &[0x48, 0xC7, 0xC0, 0x01, 0x00, 0x00, 0x00, 0xC3]
        );
        let (fns, data) = build("();;");
        let asm = emit_assembly_text(&fns, &data);
        assert!(
            asm.contains("nml_phrase1_entry:\n    mov rax, 1\n    ret\n"),
            "{}",
            asm
        );
    }

    #[test]
    fn allocation_call_is_rel32_minus_four() {
        let obj = object("(1, 2);;");
        let r = obj.relocs.iter().find(|r| r.target == RT_ALLOC).unwrap();
        assert_eq!(
            (r.section, r.kind, r.addend),
            (Section::Text, RelocKind::Rel32, -4)
        );
        assert_eq!(obj.text[r.offset - 1], 0xE8);
        assert_eq!(&obj.text[r.offset..r.offset + 4], &[TEXT_SENTINEL; 4]);
        assert_eq!(obj.referenced, vec![RT_ALLOC.to_string()]);
    }

    #[test]
    fn float_literal_is_boxed_data() {
        let obj = object("1.5;;");
        let d = obj
            .defined
            .iter()
            .find(|d| d.section == Section::Data)
            .unwrap();
        assert_eq!(
            &obj.data[d.offset..d.offset + 8],
            &1.5f64.to_bits().to_le_bytes()
        );
        assert_eq!(
            &obj.data[d.offset - 8..d.offset],
            &header(1, TAG_FLOAT).to_le_bytes()
        );
        let r = obj.relocs.iter().find(|r| r.target == d.name).unwrap();
        assert_eq!(r.kind, RelocKind::Abs64);
        let (fns, data) = build("1.5;;");
        assert!(emit_assembly_text(&fns, &data).contains(".quad 0x3ff8000000000000  # 1.5"));
    }

    #[test]
    fn functions_start_on_sixteen_bytes() {
        let obj = object("let rec f n = if n < 2 then n else f (n - 1) + f (n - 2);;");
        let texts: Vec<&SymbolDef> = obj
            .defined
            .iter()
            .filter(|d| d.section == Section::Text)
            .collect();
        assert!(texts.len() >= 2);
        assert!(texts.iter().all(|d| d.offset % 16 == 0));
        assert!(obj
            .relocs
            .iter()
            .all(|r| r.offset + r.width() <= obj.section(r.section).len()));
    }

    #[test]
    fn emission_is_deterministic() {
        let src = "let g x = let t = (x, 2.5, \"hi\") in fun y -> (t, y);;";
        assert_eq!(object(src), object(src));
    }

    #[test]
    fn string_padding_fills_the_last_byte() {
        assert_eq!(string_body(""), vec![0, 0, 0, 0, 0, 0, 0, 7]);
        assert_eq!(string_body("abcdefg"), b"abcdefg\0".to_vec());
        assert_eq!(string_body("abcdefgh").len(), 16);
        assert_eq!(string_body("abcdefgh")[15], 7);
    }
}
