//! Linear scan over hand-written live intervals, then the same phrase
//! compiled with both allocators.

use nml::nativegen::{linear_scan, AllocMode, Interval};
use nml::toplevel::{Session, SessionConfig};

fn main() {
    let spans = [(0, 10), (1, 3), (2, 8), (4, 6), (5, 12), (7, 9)];
    let intervals: Vec<Interval> = spans
        .iter()
        .enumerate()
        .map(|(v, &(start, end))| Interval {
            vreg: v as _,
            start,
            end,
        })
        .collect();
    for (iv, a) in intervals.iter().zip(linear_scan(&intervals, 2)) {
        println!("[{:2}, {:2}] -> {:?}", iv.start, iv.end, a);
    }

    let src = "let rec poly x = if x = 0 then 0 else 3 * x * x + 2 * x + poly (x - 1);; poly 50;;";
    for mode in [AllocMode::LinearScan, AllocMode::SpillAll] {
        let mut config = SessionConfig::default();
        config.native.alloc = mode;
        let (out, _) = Session::new(config).run_source(src);
        print!("{:?}: {}", mode, out.lines().last().unwrap_or_default());
        println!();
    }
}
