//! A native-code toplevel for a small ML dialect.

pub mod bytecode;
pub mod frontend;
pub mod jit;
pub mod lambda;
pub mod linkrun;
pub mod nativegen;
pub mod rt;
pub mod toplevel;
