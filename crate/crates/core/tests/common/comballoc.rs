//! Allocation runs in selected code: within a block, the instructions
//! between two calls.
#![allow(dead_code)]

use super::{corpus, native};
use nml::nativegen::mach::Instr;
use nml::nativegen::{AllocMode, MachFn};
use nml::toplevel::{split_phrases, Session};

/// Largest number of allocations in one call-free run of any block.
pub fn max_allocs_per_run(fns: &[MachFn]) -> usize {
    let mut worst = 0;
    for f in fns {
        for b in &f.blocks {
            let mut run = 0;
            for i in &b.instrs {
                match i {
                    Instr::Alloc { .. } => {
                        run += 1;
                        worst = worst.max(run);
                    }
                    Instr::Call { .. } => run = 0,
                    _ => {}
                }
            }
        }
    }
    worst
}

/// Worst run length over every phrase of every corpus program.
pub fn corpus_worst(comballoc: bool) -> (usize, usize) {
    let (mut worst, mut phrases) = (0, 0);
    for (_, src) in corpus() {
        let mut s = Session::new(native(AllocMode::LinearScan, comballoc));
        for p in split_phrases(&src) {
            s.last_linked = None;
            s.eval(&p);
            if let Some(l) = &s.last_linked {
                worst = worst.max(max_allocs_per_run(&l.mach));
                phrases += 1;
            }
        }
    }
    (worst, phrases)
}
