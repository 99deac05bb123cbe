//! Runtime errors in native code are reported and the session carries on.

use nml::toplevel::{Session, SessionConfig};

fn main() {
    let mut s = Session::new(SessionConfig {
        arena_bytes: 1 << 20,
        ..SessionConfig::default()
    });
    for phrase in [
        "let a = [| 1; 2; 3 |];;",
        "a.(5);;",
        "let zero = 0;;",
        "7 / zero;;",
        "array_make 1000000 0;;",
        "let rec down n = if n = 0 then 0 else 1 + down (n - 1);;",
        "down 100000000;;",
        "a.(0) + a.(1) + a.(2);;",
    ] {
        print!("# {}\n{}", phrase, s.eval(phrase).output);
    }
}
