//! The native middle end: closure conversion, Cmm, instruction selection,
//! register allocation and linearisation.

pub mod arch;
pub mod clambda;
pub mod cmm;
pub mod linearize;
pub mod liveness;
pub mod mach;
pub mod regalloc;

pub use clambda::{closure_convert, CProgram, Clambda};
pub use cmm::{generate_cmm, Cmm, CmmProgram, DataItem, MType};
pub use linearize::{linearize, schedule, LInstr, LinearFn};
pub use liveness::{compute_live_intervals, Interval};
pub use mach::{combine_allocations, select_instructions, MachFn};
pub use regalloc::{allocate_registers, linear_scan, AllocMode, Allocation, Assignment, Loc};

/// Back-end switches used for differential testing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackendOptions {
    pub alloc: AllocMode,
    pub comballoc: bool,
}

impl Default for BackendOptions {
    fn default() -> Self {
        BackendOptions {
            alloc: AllocMode::LinearScan,
            comballoc: true,
        }
    }
}

/// Selects instructions for every function, combining allocations when
/// enabled.
pub fn select_all(prog: &CmmProgram, opts: BackendOptions) -> Vec<MachFn> {
    select_instructions(prog)
        .into_iter()
        .map(|mut f| {
            if opts.comballoc {
                combine_allocations(&mut f);
            }
            f
        })
        .collect()
}

/// Runs the back end from Cmm down to scheduled linear code.
pub fn compile_functions(prog: &CmmProgram, opts: BackendOptions) -> Vec<LinearFn> {
    select_all(prog, opts)
        .iter()
        .map(|f| {
            let alloc = allocate_registers(f, opts.alloc);
            schedule(linearize(f, &alloc))
        })
        .collect()
}
