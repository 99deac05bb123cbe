//! Runs one script under both backends and checks the transcripts agree.

use std::time::Instant;

use nml::toplevel::{Backend, Session, SessionConfig};

const SCRIPT: &str = "
let rec fib n = if n < 2 then n else fib (n - 1) + fib (n - 2);;
let squares n = let a = array_make n 0 in for i = 0 to n - 1 do a.(i) <- i * i done; a;;
squares 6;;
fib 25;;
";

fn main() {
    let mut transcripts = Vec::new();
    for backend in [Backend::Interp, Backend::Jit] {
        let mut s = Session::new(SessionConfig {
            backend,
            ..SessionConfig::default()
        });
        let t = Instant::now();
        let (out, err) = s.run_source(SCRIPT);
        assert!(err.is_none(), "{:?}", err);
        println!("{:>6}: {:.4}s", backend.name(), t.elapsed().as_secs_f64());
        transcripts.push(out);
    }
    assert_eq!(transcripts[0], transcripts[1]);
    print!("{}", transcripts[1]);
}
