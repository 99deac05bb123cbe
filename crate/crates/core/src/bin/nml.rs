use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nml::nativegen::{AllocMode, BackendOptions};
use nml::toplevel::{
    phrase_complete, run_benchmarks, run_script, split_phrases, Backend, IrKind, ScriptError,
    Session, SessionConfig,
};

#[derive(Parser)]
#[command(
    name = "nml",
    version,
    about = "MiniML toplevel with a native JIT and a bytecode interpreter"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Evaluation backend.
    #[arg(long, global = true, default_value = "jit")]
    backend: Backend,

    /// Print an assembly listing of each compiled phrase.
    #[arg(long, global = true)]
    emit_asm: bool,

    /// Print the named IR after its phase (repeatable or comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    dump_ir: Vec<IrKind>,

    /// Print a hex dump of each phrase's object code.
    #[arg(long, global = true)]
    dump_object: bool,

    /// Heap arena size in bytes.
    #[arg(long, global = true, default_value_t = 64 << 20)]
    arena_size: usize,

    /// Register allocator for the native backend.
    #[arg(long, global = true, value_enum, default_value = "linear-scan")]
    alloc: Alloc,

    /// Disable allocation combining.
    #[arg(long, global = true)]
    no_comballoc: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a script, stopping at the first error.
    Run { file: PathBuf },
    /// Time the built-in benchmarks under both backends.
    Bench {
        /// Comma separated benchmark names (default: all).
        #[arg(long, value_delimiter = ',')]
        select: Vec<String>,
        /// Runs per backend; the best time is reported
        #[arg(long, default_value_t = 2)]
        iterations: usize,
        /// Also write the report to this file
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Alloc {
    LinearScan,
    SpillAll,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = SessionConfig {
        backend: cli.backend,
        arena_bytes: cli.arena_size,
        native: BackendOptions {
            alloc: match cli.alloc {
                Alloc::LinearScan => AllocMode::LinearScan,
                Alloc::SpillAll => AllocMode::SpillAll,
            },
            comballoc: !cli.no_comballoc,
        },
        emit_asm: cli.emit_asm,
        dump_ir: cli.dump_ir,
        dump_object: cli.dump_object,
        time: false,
    };
    match cli.command {
        None => repl(config),
        Some(Command::Run { file }) => match run_script(&file, config, &mut io::stdout()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(ScriptError::Phrase(_)) => ExitCode::from(1),
            Err(e) => {
                eprintln!("nml: {}", e);
                ExitCode::from(1)
            }
        },
        Some(Command::Bench {
            select,
            iterations,
            csv,
        }) => match run_benchmarks(&select, iterations, csv.as_deref()) {
            Ok(report) => {
                print!("{}", report.to_csv());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("nml: {}", e);
                ExitCode::from(1)
            }
        },
    }
}

fn repl(config: SessionConfig) -> ExitCode {
    let mut session = Session::new(config);
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    let mut buf = String::new();
    let mut line = String::new();
    loop {
        let _ = write!(
            stdout,
            "{}",
            if buf.trim().is_empty() { "# " } else { "  " }
        );
        let _ = stdout.flush();
        line.clear();
        match stdin.lock().read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                eprintln!("nml: {}", e);
                return ExitCode::from(1);
            }
        }
        buf.push_str(&line);
        let directive = buf.trim_start().starts_with('#');
        if !(phrase_complete(&buf) || directive) {
            continue;
        }
        let mut parts = if directive {
            vec![buf.clone()]
        } else {
            split_phrases(&buf)
        };
        let rest = match parts.last() {
            Some(p) if !directive && !p.trim_end().ends_with(";;") => {
                parts.pop().unwrap_or_default()
            }
            _ => String::new(),
        };
        buf = rest;
        for p in parts {
            let ev = session.eval(&p);
            let _ = stdout.write_all(ev.output.as_bytes());
            let _ = stdout.flush();
            if ev.quit {
                return ExitCode::SUCCESS;
            }
        }
    }
    let _ = writeln!(stdout);
    ExitCode::SUCCESS
}
