//! Live intervals over a linear numbering of the instructions.
//!
//! Blocks are numbered in reverse postorder; every instruction and every
//! terminator takes one position. A register's interval is the hull of its
//! definition and use positions, extended across loop back-edges so that a
//! value live into a loop header stays live through the whole loop.

use super::mach::{BlockId, MachFn, VReg};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub vreg: VReg,
    pub start: u32,
    pub end: u32,
}

#[derive(Clone, Debug)]
pub struct Numbering {
    pub order: Vec<BlockId>,
    /// Position of the first instruction of each block, indexed by block id.
    pub block_start: Vec<u32>,
    /// Position of the terminator of each block, indexed by block id.
    pub block_end: Vec<u32>,
}

impl Numbering {
    pub fn new(f: &MachFn) -> Numbering {
        let order = f.reverse_postorder();
        let mut block_start = vec![u32::MAX; f.blocks.len()];
        let mut block_end = vec![u32::MAX; f.blocks.len()];
        let mut pos = 0u32;
        for &b in &order {
            block_start[b] = pos;
            pos += f.blocks[b].instrs.len() as u32;
            block_end[b] = pos;
            pos += 1;
        }
        Numbering {
            order,
            block_start,
            block_end,
        }
    }

    /// Loops as (header start, latch end) for every back-edge.
    pub fn loops(&self, f: &MachFn) -> Vec<(u32, u32)> {
        let mut loops = Vec::new();
        for &b in &self.order {
            for s in f.blocks[b].term.successors() {
                if self.block_start[s] <= self.block_end[b] {
                    loops.push((self.block_start[s], self.block_end[b]));
                }
            }
        }
        loops
    }
}

/// Intervals sorted by start position, one per register that occurs.
pub fn compute_live_intervals(f: &MachFn) -> (Vec<Interval>, Numbering) {
    let num = Numbering::new(f);
    let mut hull: Vec<Option<(u32, u32)>> = vec![None; f.vreg_types.len()];
    let mut touch = |r: VReg, p: u32| {
        let h = &mut hull[r as usize];
        *h = Some(match *h {
            None => (p, p),
            Some((s, e)) => (s.min(p), e.max(p)),
        });
    };
    for &b in &num.order {
        let block = &f.blocks[b];
        let mut pos = num.block_start[b];
        for i in &block.instrs {
            for r in i.uses().into_iter().chain(i.defs()) {
                touch(r, pos);
            }
            pos += 1;
        }
        for r in block.term.uses() {
            touch(r, pos);
        }
    }
    let loops = num.loops(f);
    loop {
        let mut changed = false;
        for h in hull.iter_mut().flatten() {
            for &(head, latch) in &loops {
                if h.0 < head && h.1 >= head && h.1 < latch {
                    h.1 = latch;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut intervals: Vec<Interval> = hull
        .iter()
        .enumerate()
        .filter_map(|(r, h)| {
            h.map(|(start, end)| Interval {
                vreg: r as VReg,
                start,
                end,
            })
        })
        .collect();
    intervals.sort_by_key(|i| (i.start, i.end, i.vreg));
    (intervals, num)
}

#[cfg(test)]
pub(crate) mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::frontend::{infer_phrase, parse_phrase, TypeEnv};
    use crate::lambda::{simplify, translate};
    use crate::nativegen::{
        clambda::closure_convert, cmm::generate_cmm, mach::select_instructions,
    };

    pub(crate) fn mach(src: &str) -> Vec<MachFn> {
        let ast = parse_phrase(src).unwrap();
        let (tt, _) = infer_phrase(&TypeEnv::new(), &ast, 1).unwrap();
        let mut l = translate(&tt);
        l.body = simplify(l.body);
        select_instructions(&generate_cmm(closure_convert(l, 1)))
    }

    /// Iterative backward dataflow: the set of registers live just after
    /// each position.
    pub(crate) fn dataflow_live_after(f: &MachFn, num: &Numbering) -> Vec<(u32, HashSet<VReg>)> {
        let n = f.blocks.len();
        let mut live_in: Vec<HashSet<VReg>> = vec![HashSet::new(); n];
        loop {
            let mut changed = false;
            for &b in num.order.iter().rev() {
                let block = &f.blocks[b];
                let mut live: HashSet<VReg> = block
                    .term
                    .successors()
                    .iter()
                    .flat_map(|s| live_in[*s].iter().copied())
                    .collect();
                live.extend(block.term.uses());
                for i in block.instrs.iter().rev() {
                    for d in i.defs() {
                        live.remove(&d);
                    }
                    live.extend(i.uses());
                }
                if live != live_in[b] {
                    live_in[b] = live;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut out = Vec::new();
        for &b in &num.order {
            let block = &f.blocks[b];
            let mut live: HashSet<VReg> = block
                .term
                .successors()
                .iter()
                .flat_map(|s| live_in[*s].iter().copied())
                .collect();
            out.push((num.block_end[b], live.clone()));
            live.extend(block.term.uses());
            for (k, i) in block.instrs.iter().enumerate().rev() {
                out.push((num.block_start[b] + k as u32, live.clone()));
                for d in i.defs() {
                    live.remove(&d);
                }
                live.extend(i.uses());
            }
        }
        out
    }

    /// Every register live after a position lies inside its interval.
    pub(crate) fn intervals_cover_liveness(f: &MachFn) -> Result<(), String> {
        let (intervals, num) = compute_live_intervals(f);
        let by_reg: std::collections::HashMap<VReg, Interval> =
            intervals.iter().map(|i| (i.vreg, *i)).collect();
        for (pos, live) in dataflow_live_after(f, &num) {
            for r in live {
                let i = by_reg
                    .get(&r)
                    .ok_or(format!("v{} live but has no interval", r))?;
                if pos < i.start || pos > i.end {
                    return Err(format!(
                        "v{} live after {} outside [{}, {}]\n{}",
                        r,
                        pos,
                        i.start,
                        i.end,
                        f.dump()
                    ));
                }
            }
        }
        Ok(())
    }

    #[test]
    fn straight_line_interval_is_def_to_last_use() {
        let fs = mach("fun x -> x * x + 1;;");
        let (intervals, _) = compute_live_intervals(&fs[0]);
        let param = intervals.iter().find(|i| i.vreg == 0).unwrap();
        assert_eq!(param.start, 0);
        assert!(param.end >= 1);
    }

    #[test]
    fn intervals_agree_with_dataflow() {
        for src in [
            "fun n -> let s = (fun z -> z) n in s;;",
            "fun n -> let a = [| 0 |] in for i = 1 to n do a.(0) <- a.(0) + i done; a.(0);;",
            "fun n -> let a = [| n |] in while a.(0) > 0 do a.(0) <- a.(0) - 1 done; a;;",
            "let rec f n = if n < 2 then n else f (n - 1) + f (n - 2);;",
            "fun n -> if n > 0 && n < 10 || n = 100 then 1 else 2;;",
        ] {
            for f in mach(src) {
                intervals_cover_liveness(&f).unwrap();
            }
        }
    }

    #[test]
    fn loop_carried_value_spans_the_loop() {
        let fs = mach("fun n -> let k = n * 3 in for i = 1 to n do print_int k done;;");
        let f = &fs[0];
        let (intervals, num) = compute_live_intervals(f);
        let (_, latch) = num.loops(f)[0];
        // the parameter is used before the loop but `k` must survive it
        assert!(intervals
            .iter()
            .any(|i| i.start < num.loops(f)[0].0 && i.end >= latch));
    }
}
