//! Corpus-wide output equality: JIT against the interpreter, linear scan
//! against spill-everything, and allocation combining on against off.

mod common;

use common::{corpus, corpus_dir, first_difference, native, transcript};
use nml::nativegen::AllocMode;
use nml::toplevel::Backend;

#[test]
fn corpus_is_large_enough() {
    assert!(corpus().len() >= 25);
}

#[test]
fn jit_matches_interpreter() {
    for (name, src) in corpus() {
        let jit = transcript(common::config(Backend::Jit), &src);
        let interp = transcript(common::config(Backend::Interp), &src);
        assert!(
            jit == interp,
            "{}: {}",
            name,
            first_difference(&jit, &interp).unwrap()
        );
    }
}

/// The reviewed transcripts under corpus/expected were checked by hand and
/// against independent arithmetic; set NML_BLESS=1 to rewrite them.
#[test]
fn interpreter_matches_reviewed_transcripts() {
    let dir = corpus_dir().join("expected");
    let bless = std::env::var_os("NML_BLESS").is_some();
    for (name, src) in corpus() {
        let got = transcript(common::config(Backend::Interp), &src);
        let path = dir.join(format!("{}.out", name));
        if bless {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want =
            std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert!(
            got == want,
            "{}: {}",
            name,
            first_difference(&got, &want).unwrap()
        );
    }
}

#[test]
fn spill_everything_matches_linear_scan() {
    for (name, src) in corpus() {
        let scan = transcript(native(AllocMode::LinearScan, true), &src);
        let spill = transcript(native(AllocMode::SpillAll, true), &src);
        assert!(
            scan == spill,
            "{}: {}",
            name,
            first_difference(&scan, &spill).unwrap()
        );
    }
}

#[test]
fn disabling_comballoc_changes_nothing() {
    for (name, src) in corpus() {
        let on = transcript(native(AllocMode::LinearScan, true), &src);
        let off = transcript(native(AllocMode::LinearScan, false), &src);
        assert!(
            on == off,
            "{}: {}",
            name,
            first_difference(&on, &off).unwrap()
        );
    }
}

#[test]
fn spill_everything_without_comballoc() {
    for (name, src) in corpus() {
        let base = transcript(common::config(Backend::Interp), &src);
        let spill = transcript(native(AllocMode::SpillAll, false), &src);
        assert!(
            base == spill,
            "{}: {}",
            name,
            first_difference(&base, &spill).unwrap()
        );
    }
}
