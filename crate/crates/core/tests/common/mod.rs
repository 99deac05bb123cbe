#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub mod comballoc;
pub mod encoding;
pub mod reloc;
pub mod scan;
pub mod typing;

use nml::nativegen::{AllocMode, BackendOptions};
use nml::toplevel::{split_phrases, Backend, Session, SessionConfig};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Every corpus program as (file stem, source), sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ml"))
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            (stem, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn config(backend: Backend) -> SessionConfig {
    SessionConfig {
        backend,
        ..SessionConfig::default()
    }
}

pub fn native(alloc: AllocMode, comballoc: bool) -> SessionConfig {
    SessionConfig {
        native: BackendOptions { alloc, comballoc },
        ..config(Backend::Jit)
    }
}

/// Evaluates every phrase, carrying on past errors, as a REPL would.
pub fn transcript_with(session: &mut Session, src: &str) -> String {
    let mut out = String::new();
    for p in split_phrases(src) {
        out.push_str(&session.eval(&p).output);
    }
    out
}

pub fn transcript(config: SessionConfig, src: &str) -> String {
    transcript_with(&mut Session::new(config), src)
}

/// First differing line of two transcripts, for readable failures.
pub fn first_difference(a: &str, b: &str) -> Option<String> {
    let (la, lb): (Vec<&str>, Vec<&str>) = (a.lines().collect(), b.lines().collect());
    for i in 0..la.len().max(lb.len()) {
        let (x, y) = (la.get(i).copied(), lb.get(i).copied());
        if x != y {
            return Some(format!("line {}: {:?} vs {:?}", i + 1, x, y));
        }
    }
    None
}
