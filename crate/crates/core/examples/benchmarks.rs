//! Runs the benchmark suite at reduced sizes and prints the CSV report.

use nml::toplevel::bench::run_sized;

fn main() {
    match run_sized(&[], 2, None, true) {
        Ok(report) => print!("{}", report.to_csv()),
        Err(e) => {
            eprintln!("{}", e);
            std::process::exit(1);
        }
    }
}
