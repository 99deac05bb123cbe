//! Linear-scan register allocation (Poletto and Sarkar).
//!
//! Intervals are visited by increasing start; when no register is free the
//! active interval ending furthest away is spilled, or the new one if it
//! ends later still. Two intervals that share a position never share a
//! register. Registers clobbered by a call are saved to a per-register frame
//! slot around each call they are live across.

use std::collections::HashMap;
use std::fmt;

use super::arch::{Gpr, PReg, FLOAT_REGS, INT_REGS};
use super::cmm::MType;
use super::liveness::{compute_live_intervals, Interval, Numbering};
use super::mach::{BlockId, Clobber, MachFn, VReg};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Loc {
    Reg(PReg),
    /// Frame slot, 8 bytes each, addressed from the stack pointer.
    Stack(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AllocMode {
    LinearScan,
    /// Every interval lives in a frame slot; a differential baseline.
    SpillAll,
}

/// Outcome of the scan for one interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assignment {
    Reg(usize),
    Spilled,
}

/// Runs the scan over intervals sorted by start with registers `0..k`.
/// Returns one assignment per interval, in input order.
pub fn linear_scan(intervals: &[Interval], k: usize) -> Vec<Assignment> {
    let mut result = vec![Assignment::Spilled; intervals.len()];
    // active intervals as indices, kept sorted by increasing end
    let mut active: Vec<usize> = Vec::new();
    // free registers, lowest preference index first
    let mut free: Vec<usize> = (0..k).rev().collect();
    for (i, cur) in intervals.iter().enumerate() {
        active.retain(|&j| {
            if intervals[j].end < cur.start {
                if let Assignment::Reg(r) = result[j] {
                    free.push(r);
                }
                false
            } else {
                true
            }
        });
        if let Some(r) = free.pop() {
            result[i] = Assignment::Reg(r);
            insert_by_end(&mut active, i, intervals);
        } else if let Some(&last) = active.last() {
            if intervals[last].end > cur.end {
                result[i] = result[last];
                result[last] = Assignment::Spilled;
                active.pop();
                insert_by_end(&mut active, i, intervals);
            }
        }
        free.sort_unstable_by(|a, b| b.cmp(a));
    }
    result
}

fn insert_by_end(active: &mut Vec<usize>, i: usize, intervals: &[Interval]) {
    let at = active.partition_point(|&j| intervals[j].end <= intervals[i].end);
    active.insert(at, i);
}

#[derive(Clone, Debug)]
pub struct Allocation {
    pub locs: Vec<Option<Loc>>,
    pub numbering: Numbering,
    pub intervals: Vec<Interval>,
    /// Registers to save around the instruction at (block, index).
    pub saves: HashMap<(BlockId, usize), Vec<(PReg, u32)>>,
    pub frame_slots: u32,
}

impl Allocation {
    pub fn loc(&self, r: VReg) -> Loc {
        self.locs[r as usize].expect("register has a location")
    }
}

fn clobbers(c: Clobber, r: PReg) -> bool {
    match c {
        Clobber::None => false,
        Clobber::All => true,
        Clobber::Rax => r == PReg::Gpr(Gpr::Rax),
        Clobber::RaxRdx => r == PReg::Gpr(Gpr::Rax) || r == PReg::Gpr(Gpr::Rdx),
    }
}

pub fn allocate_registers(f: &MachFn, mode: AllocMode) -> Allocation {
    let (intervals, numbering) = compute_live_intervals(f);
    let mut locs: Vec<Option<Loc>> = vec![None; f.vreg_types.len()];
    let mut slots = 0u32;
    for class in [MType::Int, MType::Float] {
        let subset: Vec<Interval> = intervals
            .iter()
            .copied()
            .filter(|i| f.vreg_types[i.vreg as usize] == class)
            .collect();
        let regs: Vec<PReg> = match class {
            MType::Int => INT_REGS.iter().map(|g| PReg::Gpr(*g)).collect(),
            MType::Float => FLOAT_REGS.iter().map(|x| PReg::Xmm(*x)).collect(),
        };
        let assignment = match mode {
            AllocMode::LinearScan => linear_scan(&subset, regs.len()),
            AllocMode::SpillAll => vec![Assignment::Spilled; subset.len()],
        };
        for (i, a) in subset.iter().zip(assignment) {
            locs[i.vreg as usize] = Some(match a {
                Assignment::Reg(r) => Loc::Reg(regs[r]),
                Assignment::Spilled => {
                    slots += 1;
                    Loc::Stack(slots - 1)
                }
            });
        }
    }
    let mut save_slot: HashMap<PReg, u32> = HashMap::new();
    let mut saves = HashMap::new();
    for &b in &numbering.order {
        for (k, instr) in f.blocks[b].instrs.iter().enumerate() {
            let c = instr.clobber();
            if c == Clobber::None {
                continue;
            }
            let pos = numbering.block_start[b] + k as u32;
            let mut regs = Vec::new();
            for i in &intervals {
                if i.start < pos && pos < i.end {
                    if let Some(Loc::Reg(r)) = locs[i.vreg as usize] {
                        if clobbers(c, r) {
                            let slot = *save_slot.entry(r).or_insert_with(|| {
                                slots += 1;
                                slots - 1
                            });
                            regs.push((r, slot));
                        }
                    }
                }
            }
            regs.sort();
            if !regs.is_empty() {
                saves.insert((b, k), regs);
            }
        }
    }
    Allocation {
        locs,
        numbering,
        intervals,
        saves,
        frame_slots: slots,
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Reg(r) => r.fmt(f),
            Loc::Stack(s) => write!(f, "[rsp+{}]", 8 * s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(vreg: VReg, start: u32, end: u32) -> Interval {
        Interval { vreg, start, end }
    }

    #[test]
    fn expired_register_is_reused() {
        let a = linear_scan(&[iv(1, 1, 10), iv(2, 2, 4), iv(3, 5, 9)], 2);
        assert_eq!(a[0], Assignment::Reg(0));
        assert_eq!(a[2], a[1]);
    }

    #[test]
    fn furthest_end_is_spilled() {
        let a = linear_scan(&[iv(1, 1, 10), iv(2, 2, 8), iv(3, 3, 6)], 2);
        assert_eq!(a[0], Assignment::Spilled);
        assert_ne!(a[1], Assignment::Spilled);
        assert_ne!(a[2], Assignment::Spilled);
        assert_ne!(a[1], a[2]);
    }

    #[test]
    fn new_interval_spilled_when_it_ends_last() {
        let a = linear_scan(&[iv(1, 1, 5), iv(2, 2, 20)], 1);
        assert_eq!(a, vec![Assignment::Reg(0), Assignment::Spilled]);
    }

    #[test]
    fn values_live_across_calls_are_saved() {
        let fs = crate::nativegen::liveness::tests::mach(
            "let rec f n = if n < 2 then n else f (n - 1) + f (n - 2);;",
        );
        let f = fs.iter().find(|f| f.name.ends_with("_f")).unwrap();
        let alloc = allocate_registers(f, AllocMode::LinearScan);
        assert!(!alloc.saves.is_empty());
    }
}
