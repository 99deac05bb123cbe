//! Prints the Intel-syntax assembly generated for a phrase.

use nml::toplevel::{Session, SessionConfig};

fn main() {
    let mut s = Session::new(SessionConfig {
        emit_asm: true,
        ..SessionConfig::default()
    });
    print!(
        "{}",
        s.eval("let clamp lo hi x = if x < lo then lo else if x > hi then hi else x;;")
            .output
    );
}
