//! Generated interval sets and the register-sharing property.
#![allow(dead_code)]

use nml::nativegen::{linear_scan, Assignment, Interval};
use proptest::prelude::*;

/// Up to 64 intervals sorted by start, as the allocator expects.
pub fn intervals() -> impl Strategy<Value = Vec<Interval>> {
    prop::collection::vec((0u32..200, 0u32..40), 0..=64).prop_map(|raw| {
        let mut v: Vec<Interval> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (start, len))| Interval {
                vreg: i as u32,
                start,
                end: start + len,
            })
            .collect();
        v.sort_by_key(|iv| (iv.start, iv.vreg));
        v
    })
}

pub fn overlap(a: &Interval, b: &Interval) -> bool {
    a.start <= b.end && b.start <= a.end
}

/// Checks that no two overlapping intervals share one of the `k` registers.
pub fn check_sound(v: &[Interval], k: usize) -> Result<(), String> {
    let a = linear_scan(v, k);
    if a.len() != v.len() {
        return Err(format!("{} assignments for {} intervals", a.len(), v.len()));
    }
    for i in 0..v.len() {
        if let Assignment::Reg(r) = a[i] {
            if r >= k {
                return Err(format!("register {} of {}", r, k));
            }
            for j in i + 1..v.len() {
                if a[j] == Assignment::Reg(r) && overlap(&v[i], &v[j]) {
                    return Err(format!("{:?} and {:?} share r{}", v[i], v[j], r));
                }
            }
        }
    }
    Ok(())
}
