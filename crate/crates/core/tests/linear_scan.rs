//! Randomized soundness of the linear scan over bare interval sets.

mod common;

use common::scan::{check_sound, intervals};
use nml::nativegen::{linear_scan, Assignment, Interval};
use proptest::prelude::*;

/// Largest number of intervals live at one position.
fn max_pressure(v: &[Interval]) -> usize {
    (0..=240u32)
        .map(|p| v.iter().filter(|iv| iv.start <= p && p <= iv.end).count())
        .max()
        .unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn overlapping_intervals_never_share_a_register(v in intervals(), k in 2usize..=12) {
        if let Err(e) = check_sound(&v, k) {
            return Err(TestCaseError::fail(e));
        }
    }

    #[test]
    fn nothing_spills_below_register_pressure(v in intervals(), k in 2usize..=12) {
        let a = linear_scan(&v, k);
        if max_pressure(&v) <= k {
            prop_assert!(a.iter().all(|x| *x != Assignment::Spilled));
        }
    }
}

#[test]
fn furthest_end_is_spilled() {
    let v = [
        Interval {
            vreg: 0,
            start: 0,
            end: 100,
        },
        Interval {
            vreg: 1,
            start: 1,
            end: 5,
        },
        Interval {
            vreg: 2,
            start: 2,
            end: 6,
        },
    ];
    assert_eq!(
        linear_scan(&v, 2),
        vec![Assignment::Spilled, Assignment::Reg(1), Assignment::Reg(0)]
    );
}
