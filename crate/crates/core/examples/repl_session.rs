//! Feeds a few phrases to a native session and prints each echo.

use nml::toplevel::{Session, SessionConfig};

fn main() {
    let mut s = Session::new(SessionConfig::default());
    for phrase in [
        "let rec fact n = if n = 0 then 1 else n * fact (n - 1);;",
        "fact 20;;",
        "let twice f x = f (f x);;",
        "twice (fun x -> x * x) 3;;",
        "let pair = (1.5, \"ok\");;",
        "print_string \"side effect\"; print_newline (); 7;;",
    ] {
        print!("# {}\n{}", phrase, s.eval(phrase).output);
    }
}
