//! Structure of selected code after allocation combining: within a block,
//! the instructions between two calls make at most one heap reservation.

mod common;

use common::comballoc::corpus_worst;
use common::native;
use nml::nativegen::mach::Instr;
use nml::nativegen::AllocMode;
use nml::toplevel::Session;

#[test]
fn at_most_one_allocation_per_straight_line_run() {
    let (worst, phrases) = corpus_worst(true);
    assert!(phrases > 200, "only {} phrases compiled", phrases);
    assert!(worst <= 1, "a run still has {} allocations", worst);
}

#[test]
fn the_corpus_has_runs_worth_combining() {
    let (worst, _) = corpus_worst(false);
    assert!(worst >= 2);
}

#[test]
fn nested_tuple_is_one_reservation() {
    let mut s = Session::new(native(AllocMode::LinearScan, true));
    s.eval("let f x = ((x, x), [| x |], (x, (x, x)));;");
    let mach = &s.last_linked.as_ref().unwrap().mach;
    let allocs: Vec<usize> = mach
        .iter()
        .flat_map(|f| f.blocks.iter().flat_map(|b| b.instrs.iter()))
        .filter_map(|i| match i {
            Instr::Alloc { words, headers, .. } => Some(*words * 100 + headers.len()),
            _ => None,
        })
        .collect();
    // (x, x): 3, [| x |]: 2, (x, x): 3, (x, (..)): 3, outer triple: 4
    assert_eq!(allocs, vec![15 * 100 + 5]);
}
