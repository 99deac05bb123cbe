//! Relocation round-trip: the target of each patched field, re-derived
//! from memory, must equal the symbol the object named.
#![allow(dead_code)]

use super::{config, corpus};
use nml::jit::{RelocKind, Section, DATA_SENTINEL, TEXT_SENTINEL};
use nml::toplevel::{split_phrases, Backend, LinkedPhrase, Session};

pub struct Checked {
    pub relocs: usize,
}

pub fn check_phrase(s: &Session, l: &LinkedPhrase, what: &str) -> Checked {
    let machine = s.machine_ref().expect("native phrase ran");
    for r in &l.object.relocs {
        let expected = l
            .image
            .symbols
            .get(&r.target)
            .copied()
            .or_else(|| machine.linker.table.get(&r.target))
            .unwrap_or_else(|| panic!("{}: {} unresolved", what, r.target));
        let field = l.image.section_base(r.section) + r.offset as u64;
        let limit = match r.section {
            Section::Text => l.image.text_len,
            Section::Data => l.image.data_len,
        };
        assert!(
            r.offset + r.width() <= limit,
            "{}: reloc outside its section",
            what
        );
        // SAFETY: the field lies inside a sealed text chunk or a live data
        // chunk of this session's machine, both readable.
        let bytes: Vec<u8> = (0..r.width())
            .map(|k| unsafe { std::ptr::read((field as *const u8).add(k)) })
            .collect();
        let sentinel = match r.section {
            Section::Text => TEXT_SENTINEL,
            Section::Data => DATA_SENTINEL,
        };
        assert!(
            bytes.iter().any(|&b| b != sentinel),
            "{}: {} still holds its sentinel",
            what,
            r.target
        );
        let derived = match r.kind {
            RelocKind::Rel32 => {
                let disp = i32::from_le_bytes(bytes[..4].try_into().unwrap()) as i64;
                (field as i64).wrapping_add(disp).wrapping_sub(r.addend) as u64
            }
            RelocKind::Abs64 => {
                let v = u64::from_le_bytes(bytes[..8].try_into().unwrap());
                v.wrapping_sub(r.addend as u64)
            }
        };
        assert_eq!(derived, expected, "{}: {:?} to {}", what, r.kind, r.target);
    }
    Checked {
        relocs: l.object.relocs.len(),
    }
}

/// Runs the corpus under the JIT and checks every linked phrase; returns
/// (phrases, relocations) checked.
pub fn check_corpus() -> (usize, usize) {
    let (mut phrases, mut relocs) = (0, 0);
    for (name, src) in corpus() {
        let mut s = Session::new(config(Backend::Jit));
        for (k, p) in split_phrases(&src).iter().enumerate() {
            s.last_linked = None;
            s.eval(p);
            if let Some(l) = &s.last_linked {
                relocs += check_phrase(&s, l, &format!("{} phrase {}", name, k + 1)).relocs;
                phrases += 1;
            }
        }
    }
    (phrases, relocs)
}
