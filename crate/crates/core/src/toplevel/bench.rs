//! Built-in benchmarks, run under both backends: outputs must match before
//! timings count, and each backend keeps its best wall time.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use super::{Backend, Session, SessionConfig};

pub struct Benchmark {
    pub name: &'static str,
    /// Definitions, ending with `main : int -> unit`.
    pub program: &'static str,
    /// Argument to `main` for a timed run.
    pub full: i64,
    /// Argument to `main` for a quick check.
    pub small: i64,
}

impl Benchmark {
    pub fn source(&self, arg: i64) -> String {
        format!("{}\nmain {};;\n", self.program, arg)
    }
}

const FIB: &str = "
let rec fib n = if n < 2 then n else fib (n - 1) + fib (n - 2);;
let main n = print_int (fib n); print_newline ();;
";

const SIEVE: &str = "
let sieve n =
  let composite = array_make (n + 1) false in
  let count = [| 0; 0 |] in
  for i = 2 to n do
    if not composite.(i) then begin
      count.(0) <- count.(0) + 1;
      count.(1) <- i + i;
      while count.(1) <= n do
        composite.(count.(1)) <- true;
        count.(1) <- count.(1) + i
      done
    end
  done;
  count.(0);;
let main n = print_int (sieve n); print_newline ();;
";

const QUICKSORT: &str = "
let ij = [| 0; 0 |];;
let fill a seed =
  let s = [| seed |] in
  for i = 0 to array_length a - 1 do
    s.(0) <- (s.(0) * 1103515245 + 12345) mod 2147483648;
    a.(i) <- s.(0) / 7
  done;;
let rec qsort a lo hi =
  if lo < hi then begin
    let pivot = a.((lo + hi) / 2) in
    ij.(0) <- lo;
    ij.(1) <- hi;
    while ij.(0) <= ij.(1) do
      while a.(ij.(0)) < pivot do ij.(0) <- ij.(0) + 1 done;
      while a.(ij.(1)) > pivot do ij.(1) <- ij.(1) - 1 done;
      if ij.(0) <= ij.(1) then begin
        let t = a.(ij.(0)) in
        a.(ij.(0)) <- a.(ij.(1));
        a.(ij.(1)) <- t;
        ij.(0) <- ij.(0) + 1;
        ij.(1) <- ij.(1) - 1
      end
    done;
    let i = ij.(0) in
    let j = ij.(1) in
    qsort a lo j;
    qsort a i hi
  end;;
let sorted a =
  let ok = [| true |] in
  for i = 1 to array_length a - 1 do
    if a.(i - 1) > a.(i) then ok.(0) <- false
  done;
  ok.(0);;
let main n =
  let a = array_make n 0 in
  let acc = [| 0 |] in
  for round = 1 to 20 do
    fill a round;
    qsort a 0 (n - 1);
    if sorted a then acc.(0) <- (acc.(0) + a.(n / 2)) mod 1000003 else acc.(0) <- -1
  done;
  print_int acc.(0); print_newline ();;
";

const BOYER: &str = "
let cap = 1000000;;
let kind = array_make cap 0;;
let left = array_make cap 0;;
let right = array_make cap 0;;
let top = [| 0 |];;
let mk k l r =
  let n = top.(0) in
  kind.(n) <- k; left.(n) <- l; right.(n) <- r; top.(0) <- n + 1; n;;
let cst v = mk 0 v 0;;
let var () = mk 1 0 0;;
let is_const e v = kind.(e) = 0 && left.(e) = v;;
let add a b =
  if kind.(a) = 0 && kind.(b) = 0 then cst (left.(a) + left.(b))
  else if is_const a 0 then b
  else if is_const b 0 then a
  else mk 2 a b;;
let mul a b =
  if kind.(a) = 0 && kind.(b) = 0 then cst (left.(a) * left.(b))
  else if is_const a 0 || is_const b 0 then cst 0
  else if is_const a 1 then b
  else if is_const b 1 then a
  else mk 3 a b;;
let rec deriv e =
  let k = kind.(e) in
  if k = 0 then cst 0
  else if k = 1 then cst 1
  else if k = 2 then add (deriv left.(e)) (deriv right.(e))
  else add (mul (deriv left.(e)) right.(e)) (mul left.(e) (deriv right.(e)));;
let rec eval e x =
  let k = kind.(e) in
  if k = 0 then left.(e)
  else if k = 1 then x
  else if k = 2 then (eval left.(e) x + eval right.(e) x) mod 1000003
  else (eval left.(e) x * eval right.(e) x) mod 1000003;;
let rec size e = if kind.(e) < 2 then 1 else 1 + size left.(e) + size right.(e);;
let rec poly n = if n = 0 then cst 3 else add (mul (var ()) (poly (n - 1))) (cst n);;
let main n =
  let acc = [| 0 |] in
  for r = 1 to n do
    top.(0) <- 0;
    let p = poly 14 in
    let d = deriv (deriv p) in
    acc.(0) <- (acc.(0) + eval d (r + 1) + size d) mod 1000003
  done;
  print_int acc.(0); print_newline ();;
";

const FFT: &str = "
let pi_fraction k =
  let cs = [| -1.0; 0.0 |] in
  for i = 1 to k do
    let c = cs.(0) in
    cs.(0) <- sqrt ((1.0 +. c) /. 2.0);
    cs.(1) <- sqrt ((1.0 -. c) /. 2.0)
  done;
  cs;;
let fft re im logn sign =
  let n = array_length re in
  let j = [| 0 |] in
  for i = 0 to n - 2 do
    if i < j.(0) then begin
      let tr = re.(i) in let ti = im.(i) in
      re.(i) <- re.(j.(0)); im.(i) <- im.(j.(0));
      re.(j.(0)) <- tr; im.(j.(0)) <- ti
    end;
    let m = [| n / 2 |] in
    while m.(0) >= 1 && j.(0) >= m.(0) do j.(0) <- j.(0) - m.(0); m.(0) <- m.(0) / 2 done;
    j.(0) <- j.(0) + m.(0)
  done;
  let len = [| 2 |] in
  for s = 1 to logn do
    let half = len.(0) / 2 in
    let w1 = pi_fraction (s - 1) in
    let wr1 = w1.(0) in
    let wi1 = sign *. w1.(1) in
    let w = [| 1.0; 0.0 |] in
    for k = 0 to half - 1 do
      let wr = w.(0) in let wi = w.(1) in
      let p = [| k |] in
      while p.(0) < n do
        let a = p.(0) in let b = a + half in
        let xr = re.(b) *. wr -. im.(b) *. wi in
        let xi = re.(b) *. wi +. im.(b) *. wr in
        re.(b) <- re.(a) -. xr; im.(b) <- im.(a) -. xi;
        re.(a) <- re.(a) +. xr; im.(a) <- im.(a) +. xi;
        p.(0) <- p.(0) + len.(0)
      done;
      w.(0) <- wr *. wr1 -. wi *. wi1;
      w.(1) <- wr *. wi1 +. wi *. wr1
    done;
    len.(0) <- len.(0) * 2
  done;;
let main reps =
  let logn = 10 in
  let n = 1024 in
  let re = array_make n 0.0 in
  let im = array_make n 0.0 in
  let err = [| 0.0 |] in
  for r = 1 to reps do
    for i = 0 to n - 1 do re.(i) <- float_of_int ((i * r) mod 17) -. 8.0; im.(i) <- 0.0 done;
    fft re im logn (-1.0);
    fft re im logn 1.0;
    for i = 0 to n - 1 do
      let d = re.(i) /. float_of_int n -. (float_of_int ((i * r) mod 17) -. 8.0) in
      err.(0) <- err.(0) +. d *. d
    done
  done;
  print_int (int_of_float (err.(0) *. 1000000000000.0));
  print_string \" \";
  print_float re.(3); print_newline ();;
";

const NUCLEIC: &str = "
let nbodies = 5;;
let px = [| 0.0; 4.84; 8.34; 12.89; 15.37 |];;
let py = [| 0.0; -1.16; 4.12; -15.11; -25.91 |];;
let pz = [| 0.0; -0.10; -0.40; -0.22; 0.17 |];;
let vx = [| 0.0; 0.60; -1.01; 1.08; 0.97 |];;
let vy = [| 0.0; 2.81; 1.82; 0.86; 0.59 |];;
let vz = [| 0.0; -0.02; 0.008; -0.01; -0.03 |];;
let mass = [| 39.47; 0.037; 0.011; 0.0017; 0.002 |];;
let advance dt =
  for i = 0 to nbodies - 1 do
    for j = i + 1 to nbodies - 1 do
      let dx = px.(i) -. px.(j) in
      let dy = py.(i) -. py.(j) in
      let dz = pz.(i) -. pz.(j) in
      let d2 = dx *. dx +. dy *. dy +. dz *. dz in
      let mag = dt /. (d2 *. sqrt d2) in
      vx.(i) <- vx.(i) -. dx *. mass.(j) *. mag;
      vy.(i) <- vy.(i) -. dy *. mass.(j) *. mag;
      vz.(i) <- vz.(i) -. dz *. mass.(j) *. mag;
      vx.(j) <- vx.(j) +. dx *. mass.(i) *. mag;
      vy.(j) <- vy.(j) +. dy *. mass.(i) *. mag;
      vz.(j) <- vz.(j) +. dz *. mass.(i) *. mag
    done
  done;
  for i = 0 to nbodies - 1 do
    px.(i) <- px.(i) +. dt *. vx.(i);
    py.(i) <- py.(i) +. dt *. vy.(i);
    pz.(i) <- pz.(i) +. dt *. vz.(i)
  done;;
let energy () =
  let e = [| 0.0 |] in
  for i = 0 to nbodies - 1 do
    e.(0) <- e.(0) +. 0.5 *. mass.(i) *. (vx.(i) *. vx.(i) +. vy.(i) *. vy.(i) +. vz.(i) *. vz.(i));
    for j = i + 1 to nbodies - 1 do
      let dx = px.(i) -. px.(j) in
      let dy = py.(i) -. py.(j) in
      let dz = pz.(i) -. pz.(j) in
      e.(0) <- e.(0) -. mass.(i) *. mass.(j) /. sqrt (dx *. dx +. dy *. dy +. dz *. dz)
    done
  done;
  e.(0);;
let main steps =
  print_float (energy ()); print_newline ();
  for s = 1 to steps do advance 0.01 done;
  print_float (energy ()); print_newline ();;
";

pub const BENCHMARKS: &[Benchmark] = &[
    Benchmark {
        name: "fib",
        program: FIB,
        full: 32,
        small: 18,
    },
    Benchmark {
        name: "sieve",
        program: SIEVE,
        full: 3_000_000,
        small: 10_000,
    },
    Benchmark {
        name: "quicksort",
        program: QUICKSORT,
        full: 200_000,
        small: 500,
    },
    Benchmark {
        name: "boyer-mini",
        program: BOYER,
        full: 40,
        small: 2,
    },
    Benchmark {
        name: "fft-mini",
        program: FFT,
        full: 40,
        small: 1,
    },
    Benchmark {
        name: "nucleic-mini",
        program: NUCLEIC,
        full: 20_000,
        small: 50,
    },
];

pub fn benchmark(name: &str) -> Option<&'static Benchmark> {
    BENCHMARKS.iter().find(|b| b.name == name)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub benchmark: String,
    pub backend: Backend,
    pub iterations: usize,
    pub best_seconds: f64,
    /// Interpreter best time over this backend's best time.
    pub speedup: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("benchmark,backend,iterations,best_seconds,speedup\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.3}",
                r.benchmark,
                r.backend.name(),
                r.iterations,
                r.best_seconds,
                r.speedup
            );
        }
        out
    }

    pub fn row(&self, benchmark: &str, backend: Backend) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.benchmark == benchmark && r.backend == backend)
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("iterations must be at least 2 (got {0})")]
    TooFewIterations(usize),
    #[error("unknown benchmark `{0}`")]
    Unknown(String),
    #[error("benchmark {name} failed under {backend}: {message}")]
    Failed {
        name: String,
        backend: &'static str,
        message: String,
    },
    #[error("benchmark {name}: outputs differ\n--- jit\n{jit}--- interp\n{interp}")]
    Mismatch {
        name: String,
        jit: String,
        interp: String,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Runs one benchmark source in a fresh session; returns output and time.
pub fn run_once(src: &str, backend: Backend) -> Result<(String, f64), String> {
    let mut s = Session::new(SessionConfig {
        backend,
        ..SessionConfig::default()
    });
    let t = Instant::now();
    let (out, err) = s.run_source(src);
    let secs = t.elapsed().as_secs_f64();
    match err {
        Some(e) => Err(format!("{}\n{}", e, out)),
        None => Ok((out, secs)),
    }
}

/// Runs the selected benchmarks (all when empty) `iterations` times per
/// backend at the given size, best time kept.
pub fn run_sized(
    selection: &[String],
    iterations: usize,
    csv: Option<&Path>,
    small: bool,
) -> Result<BenchReport, BenchError> {
    if iterations < 2 {
        return Err(BenchError::TooFewIterations(iterations));
    }
    let chosen: Vec<&Benchmark> = if selection.is_empty() {
        BENCHMARKS.iter().collect()
    } else {
        selection
            .iter()
            .map(|n| benchmark(n).ok_or_else(|| BenchError::Unknown(n.clone())))
            .collect::<Result<_, _>>()?
    };
    let mut report = BenchReport::default();
    for b in chosen {
        let src = b.source(if small { b.small } else { b.full });
        let mut best = [f64::INFINITY; 2];
        let mut outputs = [String::new(), String::new()];
        for (k, backend) in [Backend::Interp, Backend::Jit].into_iter().enumerate() {
            for _ in 0..iterations {
                let (out, secs) =
                    run_once(&src, backend).map_err(|message| BenchError::Failed {
                        name: b.name.into(),
                        backend: backend.name(),
                        message,
                    })?;
                best[k] = best[k].min(secs);
                outputs[k] = out;
            }
        }
        if outputs[0] != outputs[1] {
            return Err(BenchError::Mismatch {
                name: b.name.into(),
                jit: outputs[1].clone(),
                interp: outputs[0].clone(),
            });
        }
        for (k, backend) in [Backend::Interp, Backend::Jit].into_iter().enumerate() {
            report.rows.push(BenchRow {
                benchmark: b.name.into(),
                backend,
                iterations,
                best_seconds: best[k],
                speedup: best[0] / best[k],
            });
        }
    }
    if let Some(path) = csv {
        std::fs::write(path, report.to_csv()).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(report)
}

/// Runs the selected benchmarks at full size.
pub fn run_benchmarks(
    selection: &[String],
    iterations: usize,
    csv: Option<&Path>,
) -> Result<BenchReport, BenchError> {
    run_sized(selection, iterations, csv, false)
}
