//! Prints every intermediate representation of one phrase.

use nml::toplevel::{IrKind, Session, SessionConfig};

fn main() {
    let mut s = Session::new(SessionConfig {
        dump_ir: vec![
            IrKind::Lambda,
            IrKind::Clambda,
            IrKind::Cmm,
            IrKind::Mach,
            IrKind::Linear,
        ],
        ..SessionConfig::default()
    });
    print!("{}", s.eval("let add k = fun x -> (x + k, k);;").output);
}
