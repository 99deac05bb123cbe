//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines appear in order; exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{config, corpus, first_difference, native, transcript};
use nml::nativegen::AllocMode;
use nml::toplevel::{run_benchmarks, Backend, Session, SessionConfig};
use proptest::test_runner::{Config, TestRunner};

type Check = Result<String, String>;

fn within(limit: Duration, start: Instant, detail: String) -> Check {
    let t = start.elapsed();
    if t <= limit {
        Ok(format!("{} in {:.2}s", detail, t.as_secs_f64()))
    } else {
        Err(format!(
            "{} but took {:.2}s (budget {}s)",
            detail,
            t.as_secs_f64(),
            limit.as_secs()
        ))
    }
}

/// Corpus transcripts under two configurations must agree.
fn corpus_agrees(
    a: impl Fn() -> SessionConfig,
    b: impl Fn() -> SessionConfig,
) -> Result<usize, String> {
    let programs = corpus();
    for (name, src) in &programs {
        let (x, y) = (transcript(a(), src), transcript(b(), src));
        if x != y {
            return Err(format!(
                "{}: {}",
                name,
                first_difference(&x, &y).unwrap_or_default()
            ));
        }
    }
    Ok(programs.len())
}

fn differential() -> Check {
    let start = Instant::now();
    let n = corpus_agrees(|| config(Backend::Jit), || config(Backend::Interp))?;
    if n < 25 {
        return Err(format!("corpus has {} programs, need 25", n));
    }
    within(
        Duration::from_secs(60),
        start,
        format!("{} programs identical under jit and interp", n),
    )
}

fn speedup() -> Check {
    let start = Instant::now();
    let names: Vec<String> = ["sieve", "quicksort", "fib"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let report = run_benchmarks(&names, 2, None).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut slow = Vec::new();
    for n in &names {
        let jit = report.row(n, Backend::Jit).ok_or("missing row")?;
        let interp = report.row(n, Backend::Interp).ok_or("missing row")?;
        let ratio = interp.best_seconds / jit.best_seconds;
        parts.push(format!("{} {:.1}x", n, ratio));
        if jit.best_seconds * 3.0 > interp.best_seconds {
            slow.push(n.clone());
        }
    }
    let detail = parts.join(", ");
    if !slow.is_empty() {
        return Err(format!("{}; below 3x: {}", detail, slow.join(", ")));
    }
    within(Duration::from_secs(300), start, detail)
}

fn encoding() -> Check {
    let start = Instant::now();
    let singles = common::encoding::check_single()?;
    let functions = common::encoding::check_functions()?;
    if singles < 40 || functions < 5 {
        return Err(format!(
            "only {} instructions and {} functions",
            singles, functions
        ));
    }
    within(
        Duration::from_secs(1),
        start,
        format!(
            "{} instructions and {} functions match GNU as",
            singles, functions
        ),
    )
}

fn relocation() -> Check {
    let start = Instant::now();
    let (phrases, relocs) = std::panic::catch_unwind(common::reloc::check_corpus)
        .map_err(|_| "a relocation did not round-trip".to_string())?;
    within(
        Duration::from_secs(10),
        start,
        format!("{} relocations over {} phrases", relocs, phrases),
    )
}

fn linear_scan() -> Check {
    let start = Instant::now();
    let cases = 1000;
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (common::scan::intervals(), 2usize..=12);
    runner
        .run(&strategy, |(v, k)| {
            common::scan::check_sound(&v, k).map_err(proptest::test_runner::TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    let n = corpus_agrees(
        || native(AllocMode::LinearScan, true),
        || native(AllocMode::SpillAll, true),
    )?;
    within(
        Duration::from_secs(30),
        start,
        format!(
            "{} random interval sets sound; {} programs agree with spill-all",
            cases, n
        ),
    )
}

fn comballoc() -> Check {
    let start = Instant::now();
    let (worst, phrases) = common::comballoc::corpus_worst(true);
    if worst > 1 {
        return Err(format!("a straight-line run keeps {} allocations", worst));
    }
    let n = corpus_agrees(
        || native(AllocMode::LinearScan, true),
        || native(AllocMode::LinearScan, false),
    )?;
    within(
        Duration::from_secs(30),
        start,
        format!(
            "at most 1 allocation per run over {} phrases; {} programs unchanged without the pass",
            phrases, n
        ),
    )
}

fn cross_phrase() -> Check {
    let mut s = Session::new(config(Backend::Jit));
    s.eval("let f x = x * 2;;");
    let a = s.eval("f 21;;").output;
    s.eval("let k = 40;;");
    s.eval("let add = fun x -> x + k;;");
    let b = s.eval("add 2;;").output;
    if a == "- : int = 42\n" && b == "- : int = 42\n" {
        Ok("f 21 and a closure over k both print - : int = 42".into())
    } else {
        Err(format!("got {:?} and {:?}", a, b))
    }
}

fn children() -> usize {
    std::fs::read_dir("/proc/self/task")
        .map(|d| {
            d.flatten()
                .filter_map(|t| std::fs::read_to_string(t.path().join("children")).ok())
                .map(|s| s.split_whitespace().count())
                .sum()
        })
        .unwrap_or(0)
}

fn latency() -> Check {
    let mut s = Session::new(config(Backend::Jit));
    let start = Instant::now();
    for k in 0..1000 {
        let out = s.eval("1 + 1;;").output;
        if out != "- : int = 2\n" {
            return Err(format!("evaluation {} printed {:?}", k, out));
        }
    }
    let t = start.elapsed();
    // SAFETY: a non-blocking wait with a null status pointer.
    let waited = unsafe { libc::waitpid(-1, std::ptr::null_mut(), libc::WNOHANG) };
    if children() != 0 || waited != -1 {
        return Err("a child process exists".into());
    }
    within(
        Duration::from_secs(5),
        start,
        format!(
            "1000 evaluations, {:.3} ms each, no children",
            t.as_secs_f64() * 1e3 / 1000.0
        ),
    )
}

fn containment() -> Check {
    let mut s = Session::new(SessionConfig {
        arena_bytes: 1 << 20,
        ..config(Backend::Jit)
    });
    s.eval("let a = [| 1; 2; 3 |];;");
    s.eval("let z = 0;;");
    let traps = [
        "a.(3);;",
        "10 / z;;",
        "array_make 200000 0;;",
        "a.(-1) <- 0;;",
        "7 mod z;;",
    ];
    for k in 0..100 {
        let ev = s.eval(traps[k % traps.len()]);
        if ev.error.is_none() || !ev.output.starts_with("Exception:") {
            return Err(format!("phrase {} did not trap: {:?}", k, ev.output));
        }
    }
    let out = s.eval("a.(0) + a.(1) + a.(2);;").output;
    if out == "- : int = 6\n" {
        Ok("100 traps (bounds, division, exhaustion) in a 1 MiB arena, then - : int = 6".into())
    } else {
        Err(format!("after the traps: {:?}", out))
    }
}

fn typing() -> Check {
    let (p, n) = (
        common::typing::POSITIVE.len(),
        common::typing::NEGATIVE.len(),
    );
    if p < 30 || n < 15 {
        return Err(format!("only {} positive and {} negative cases", p, n));
    }
    let f = common::typing::failures();
    if f.is_empty() {
        Ok(format!("{} positive and {} negative cases", p, n))
    } else {
        Err(f.join("; "))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("differential correctness", differential),
        ("speedup floor", speedup),
        ("encoding oracle", encoding),
        ("relocation round-trip", relocation),
        ("linear scan soundness", linear_scan),
        ("allocation combining", comballoc),
        ("cross-phrase linking", cross_phrase),
        ("in-process latency", latency),
        ("crash containment", containment),
        ("typing suite", typing),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:2} PASS {}: {}", k + 1, name, detail),
            Err(why) => {
                failed += 1;
                println!("criterion {:2} FAIL {}: {}", k + 1, name, why);
            }
        }
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
