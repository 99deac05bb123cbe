//! Prints inferred types, including polymorphic ones, and type errors.

use nml::toplevel::{Backend, Session, SessionConfig};

fn main() {
    let mut s = Session::new(SessionConfig {
        backend: Backend::Interp,
        ..SessionConfig::default()
    });
    for phrase in [
        "let id x = x;;",
        "let compose f g x = f (g x);;",
        "let swap (a, b) = (b, a);;",
        "let fill n x = array_make n x;;",
        "let r = array_make 1 (fun x -> x);;",
        "1 + true;;",
        "fun x -> x x;;",
        "undefined_name;;",
    ] {
        print!("# {}\n{}", phrase, s.eval(phrase).output);
    }
}
