//! The interactive toplevel: sessions over either backend, directives,
//! scripts and the benchmark driver.

pub mod bench;
pub mod format;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::bytecode::{compile_bytecode, Vm, VmConfig};
use crate::frontend::infer::GlobalDef;
use crate::frontend::types::format_scheme;
use crate::frontend::{
    format_type, infer_phrase, parse_phrase, TExpr, TExprKind, TypeEnv, TypedTree,
};
use crate::jit::{emit_assembly_text, emit_object, ObjectCode};
use crate::lambda::{simplify, translate};
use crate::linkrun::{ExecutableImage, Machine, MachineConfig};
use crate::nativegen::clambda::entry_symbol;
use crate::nativegen::{
    allocate_registers, closure_convert, generate_cmm, linearize, schedule, select_all,
    BackendOptions, MachFn,
};
use crate::rt::Trap;
pub use bench::{run_benchmarks, BenchError, BenchReport, BenchRow, BENCHMARKS};
pub use format::{format_native, format_vm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Jit,
    Interp,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Jit => "jit",
            Backend::Interp => "interp",
        }
    }
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Backend, String> {
        match s {
            "jit" => Ok(Backend::Jit),
            "interp" => Ok(Backend::Interp),
            _ => Err(format!("unknown backend `{}` (expected jit or interp)", s)),
        }
    }
}

/// Intermediate representations that can be printed after their phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IrKind {
    Lambda,
    Bytecode,
    Clambda,
    Cmm,
    Mach,
    Linear,
}

impl FromStr for IrKind {
    type Err = String;
    fn from_str(s: &str) -> Result<IrKind, String> {
        Ok(match s {
            "lambda" => IrKind::Lambda,
            "bytecode" => IrKind::Bytecode,
            "clambda" => IrKind::Clambda,
            "cmm" => IrKind::Cmm,
            "mach" => IrKind::Mach,
            "linear" => IrKind::Linear,
            _ => return Err(format!("unknown IR `{}`", s)),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub backend: Backend,
    pub arena_bytes: usize,
    pub native: BackendOptions,
    pub emit_asm: bool,
    pub dump_ir: Vec<IrKind>,
    pub dump_object: bool,
    pub time: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            backend: Backend::Jit,
            arena_bytes: 64 << 20,
            native: BackendOptions::default(),
            emit_asm: false,
            dump_ir: Vec::new(),
            dump_object: false,
            time: false,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PhraseError {
    #[error(transparent)]
    Syntax(#[from] crate::frontend::SyntaxError),
    #[error(transparent)]
    Type(#[from] crate::frontend::TypeError),
    #[error(transparent)]
    Trap(#[from] Trap),
    #[error(
        "Error: {name} was bound under the {bound} backend and is not available under {current}"
    )]
    OtherBackend {
        name: String,
        bound: &'static str,
        current: &'static str,
    },
    #[error("Unknown directive `{0}`.")]
    UnknownDirective(String),
    #[error("Internal error: {0}")]
    Internal(String),
}

/// What evaluating one input produced.
#[derive(Clone, Debug, Default)]
pub struct Evaluation {
    /// Program output followed by the result echo or diagnostic.
    pub output: String,
    pub error: Option<PhraseError>,
    pub quit: bool,
}

/// The object and image of the most recent native phrase.
#[derive(Clone, Debug)]
pub struct LinkedPhrase {
    /// Selected machine code, before register allocation.
    pub mach: Vec<MachFn>,
    pub object: ObjectCode,
    pub image: ExecutableImage,
}

pub struct Session {
    pub config: SessionConfig,
    env: TypeEnv,
    phrase: u32,
    vm: Vm,
    machine: Option<Machine>,
    bound_under: HashMap<String, Backend>,
    pub last_linked: Option<LinkedPhrase>,
}

fn global_refs(e: &TExpr, out: &mut Vec<(String, String)>) {
    use TExprKind::*;
    match &e.kind {
        Global { name, symbol } => out.push((name.clone(), symbol.clone())),
        Int(_) | Float(_) | Bool(_) | Unit | Str(_) | Local(_) | Prim(_) => {}
        Tuple(es) | Array(es) => es.iter().for_each(|e| global_refs(e, out)),
        Fun(_, b) | UnOp(_, b) => global_refs(b, out),
        App(f, args) => {
            global_refs(f, out);
            args.iter().for_each(|e| global_refs(e, out));
        }
        Let { bound, body, .. } => {
            global_refs(bound, out);
            global_refs(body, out);
        }
        If(c, t, e) => {
            global_refs(c, out);
            global_refs(t, out);
            if let Some(e) = e {
                global_refs(e, out);
            }
        }
        While(a, b) | Seq(a, b) | BinOp(_, a, b) | Index(a, b) => {
            global_refs(a, out);
            global_refs(b, out);
        }
        For { lo, hi, body, .. } => {
            global_refs(lo, out);
            global_refs(hi, out);
            global_refs(body, out);
        }
        Assign(a, i, v) => {
            global_refs(a, out);
            global_refs(i, out);
            global_refs(v, out);
        }
    }
}

/// Splits source text into `;;`-terminated phrases, ignoring terminators
/// inside strings and comments. Trailing text without a terminator is
/// returned as the last element when it is not blank.
pub fn split_phrases(src: &str) -> Vec<String> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let (mut start, mut i, mut depth) = (0, 0, 0usize);
    let mut in_string = false;
    while i < b.len() {
        if in_string {
            match b[i] {
                b'\\' => i += 1,
                b'"' => in_string = false,
                _ => {}
            }
        } else if b[i] == b'(' && b.get(i + 1) == Some(&b'*') {
            depth += 1;
            i += 1;
        } else if depth > 0 && b[i] == b'*' && b.get(i + 1) == Some(&b')') {
            depth -= 1;
            i += 1;
        } else if b[i] == b'"' {
            in_string = true;
        } else if depth == 0 && b[i] == b';' && b.get(i + 1) == Some(&b';') {
            out.push(src[start..i + 2].to_string());
            start = i + 2;
            i += 1;
        }
        i += 1;
    }
    let rest = &src[start.min(src.len())..];
    if !rest.trim().is_empty() && !only_comments(rest) {
        out.push(rest.to_string());
    }
    out
}

fn only_comments(s: &str) -> bool {
    crate::frontend::lexer::tokenize(s)
        .map(|t| t.len() == 1)
        .unwrap_or(false)
}

/// True when `buf` holds at least one complete phrase.
pub fn phrase_complete(buf: &str) -> bool {
    let parts = split_phrases(buf);
    !parts.is_empty() && parts.last().is_some_and(|p| p.trim_end().ends_with(";;"))
}

impl Default for Session {
    fn default() -> Self {
        Session::new(SessionConfig::default())
    }
}

impl Session {
    pub fn new(config: SessionConfig) -> Session {
        let vm_config = VmConfig {
            max_block_words: config.arena_bytes / 8,
            ..VmConfig::default()
        };
        Session {
            config,
            env: TypeEnv::new(),
            phrase: 0,
            vm: Vm::new(vm_config),
            machine: None,
            bound_under: HashMap::new(),
            last_linked: None,
        }
    }

    pub fn backend(&self) -> Backend {
        self.config.backend
    }

    pub fn set_backend(&mut self, b: Backend) {
        self.config.backend = b;
    }

    /// Number of phrases that reached type inference.
    pub fn phrase_count(&self) -> u32 {
        self.phrase
    }

    pub fn type_env(&self) -> &TypeEnv {
        &self.env
    }

    /// The native machine, created on first use.
    pub fn machine(&mut self) -> Result<&mut Machine, PhraseError> {
        if self.machine.is_none() {
            let config = MachineConfig {
                arena_bytes: self.config.arena_bytes,
                ..MachineConfig::default()
            };
            self.machine =
                Some(Machine::new(config).map_err(|e| PhraseError::Internal(e.to_string()))?);
        }
        Ok(self.machine.as_mut().expect("created above"))
    }

    pub fn machine_ref(&self) -> Option<&Machine> {
        self.machine.as_ref()
    }

    /// Evaluates one phrase or directive.
    pub fn eval(&mut self, src: &str) -> Evaluation {
        if src.trim_start().starts_with('#') {
            return self.handle_directive(src);
        }
        let start = Instant::now();
        let mut ev = Evaluation::default();
        if let Err(e) = self.eval_phrase(src, &mut ev.output) {
            let _ = writeln!(ev.output, "{}", e);
            ev.error = Some(e);
        }
        if self.config.time {
            let _ = writeln!(ev.output, "Time: {:.6}s", start.elapsed().as_secs_f64());
        }
        ev
    }

    pub fn handle_directive(&mut self, line: &str) -> Evaluation {
        let body = line
            .trim()
            .trim_start_matches('#')
            .trim_end_matches(";;")
            .trim();
        let mut words = body.split_whitespace();
        let name = words.next().unwrap_or("");
        let arg = words.next();
        let mut ev = Evaluation::default();
        match (name, arg) {
            ("quit", None) => ev.quit = true,
            ("backend", Some(b)) => match b.parse::<Backend>() {
                Ok(b) => self.config.backend = b,
                Err(m) => {
                    let e = PhraseError::Internal(m);
                    let _ = writeln!(ev.output, "{}", e);
                    ev.error = Some(e);
                }
            },
            ("time", None) => self.config.time = !self.config.time,
            ("emit_asm", None) => self.config.emit_asm = !self.config.emit_asm,
            ("dump_ir", None) => self.config.dump_ir.clear(),
            ("dump_ir", Some(list)) => {
                match list
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<IrKind>, _>>()
                {
                    Ok(kinds) => self.config.dump_ir = kinds,
                    Err(m) => {
                        let e = PhraseError::Internal(m);
                        let _ = writeln!(ev.output, "{}", e);
                        ev.error = Some(e);
                    }
                }
            }
            _ => {
                let e = PhraseError::UnknownDirective(name.to_string());
                let _ = writeln!(ev.output, "{}", e);
                ev.error = Some(e);
            }
        }
        ev
    }

    fn eval_phrase(&mut self, src: &str, out: &mut String) -> Result<(), PhraseError> {
        let ast = parse_phrase(src)?;
        self.phrase += 1;
        let id = self.phrase;
        let (tree, env) = infer_phrase(&self.env, &ast, id)?;
        let backend = self.config.backend;
        let mut refs = Vec::new();
        match &tree {
            TypedTree::Expr(e) | TypedTree::Def { expr: e, .. } => global_refs(e, &mut refs),
        }
        for (name, symbol) in refs {
            if let Some(&b) = self.bound_under.get(&symbol) {
                if b != backend {
                    return Err(PhraseError::OtherBackend {
                        name,
                        bound: b.name(),
                        current: backend.name(),
                    });
                }
            }
        }
        let mut lambda = translate(&tree);
        lambda.body = simplify(lambda.body);
        if self.dumping(IrKind::Lambda) {
            let _ = writeln!(out, "{}", lambda.dump());
        }
        let defs: Vec<GlobalDef> = match &tree {
            TypedTree::Def { defs, .. } => defs.clone(),
            TypedTree::Expr(_) => Vec::new(),
        };
        let echo = match backend {
            Backend::Interp => self.run_interp(lambda, &tree, &defs, out)?,
            Backend::Jit => self.run_native(lambda, id, &tree, &defs, out)?,
        };
        out.push_str(&echo);
        self.env = env;
        for d in &defs {
            self.bound_under.insert(d.symbol.clone(), backend);
        }
        Ok(())
    }

    fn dumping(&self, k: IrKind) -> bool {
        self.config.dump_ir.contains(&k)
    }

    fn run_interp(
        &mut self,
        lambda: crate::lambda::LambdaPhrase,
        tree: &TypedTree,
        defs: &[GlobalDef],
        out: &mut String,
    ) -> Result<String, PhraseError> {
        let bc = compile_bytecode(&lambda);
        if self.dumping(IrKind::Bytecode) {
            let _ = writeln!(out, "{}", bc.dump());
        }
        let handle = Rc::new(bc);
        let result = self.vm.run(&handle, out)?;
        let mut echo = String::new();
        if defs.is_empty() {
            let _ = writeln!(
                echo,
                "- : {} = {}",
                format_type(tree.ty()),
                format_vm(tree.ty(), &result)
            );
        }
        for d in defs {
            let v = self
                .vm
                .globals
                .get(&d.symbol)
                .ok_or_else(|| PhraseError::Internal(format!("{} unset", d.symbol)))?;
            let _ = writeln!(
                echo,
                "val {} : {} = {}",
                d.name,
                format_scheme(&d.scheme),
                format_vm(&d.scheme.body, v)
            );
        }
        Ok(echo)
    }

    fn run_native(
        &mut self,
        lambda: crate::lambda::LambdaPhrase,
        id: u32,
        tree: &TypedTree,
        defs: &[GlobalDef],
        out: &mut String,
    ) -> Result<String, PhraseError> {
        let opts = self.config.native;
        let cprog = closure_convert(lambda, id);
        if self.dumping(IrKind::Clambda) {
            let _ = writeln!(out, "{}", cprog.dump());
        }
        let cmm = generate_cmm(cprog);
        if self.dumping(IrKind::Cmm) {
            let _ = writeln!(out, "{}", cmm.dump());
        }
        let mach = select_all(&cmm, opts);
        if self.dumping(IrKind::Mach) {
            for f in &mach {
                let _ = writeln!(out, "{}", f.dump());
            }
        }
        let fns: Vec<_> = mach
            .iter()
            .map(|f| schedule(linearize(f, &allocate_registers(f, opts.alloc))))
            .collect();
        if self.dumping(IrKind::Linear) {
            for f in &fns {
                let _ = write!(out, "{}", f);
            }
        }
        if self.config.emit_asm {
            out.push_str(&emit_assembly_text(&fns, &cmm.data));
        }
        let object =
            emit_object(&fns, &cmm.data, id).map_err(|e| PhraseError::Internal(e.to_string()))?;
        if self.config.dump_object {
            out.push_str(&object.dump());
        }
        let machine = self.machine()?;
        let image = machine
            .link(&object)
            .map_err(|e| PhraseError::Internal(e.to_string()))?;
        let result = machine.execute_entry(&image, &entry_symbol(id));
        out.push_str(&machine.take_output());
        self.last_linked = Some(LinkedPhrase {
            mach,
            object,
            image,
        });
        let word = result?;
        let machine = self.machine.as_ref().expect("created above");
        let mut echo = String::new();
        if defs.is_empty() {
            let _ = writeln!(
                echo,
                "- : {} = {}",
                format_type(tree.ty()),
                format_native(tree.ty(), word, machine)
            );
        }
        for d in defs {
            let slot = machine
                .linker
                .table
                .get(&d.symbol)
                .and_then(|a| machine.read_word(a))
                .ok_or_else(|| PhraseError::Internal(format!("{} has no slot", d.symbol)))?;
            let _ = writeln!(
                echo,
                "val {} : {} = {}",
                d.name,
                format_scheme(&d.scheme),
                format_native(&d.scheme.body, slot, machine)
            );
        }
        Ok(echo)
    }

    /// Evaluates every phrase of a script, stopping at the first error.
    /// Returns the combined output and the error, if any.
    pub fn run_source(&mut self, src: &str) -> (String, Option<PhraseError>) {
        let mut out = String::new();
        for p in split_phrases(src) {
            let ev = self.eval(&p);
            out.push_str(&ev.output);
            if ev.error.is_some() || ev.quit {
                return (out, ev.error);
            }
        }
        (out, None)
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Phrase(PhraseError),
}

/// Runs a script file, writing output to `sink` as each phrase finishes.
pub fn run_script(
    path: &std::path::Path,
    config: SessionConfig,
    sink: &mut dyn std::io::Write,
) -> Result<(), ScriptError> {
    let src = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut s = Session::new(config);
    for p in split_phrases(&src) {
        let ev = s.eval(&p);
        let _ = sink.write_all(ev.output.as_bytes());
        let _ = sink.flush();
        if let Some(e) = ev.error {
            return Err(ScriptError::Phrase(e));
        }
        if ev.quit {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(backend: Backend, src: &str) -> String {
        let mut s = Session::new(SessionConfig {
            backend,
            ..Default::default()
        });
        s.run_source(src).0
    }

    #[test]
    fn splits_on_terminators_outside_strings_and_comments() {
        let ps = split_phrases("let s = \";;\";; (* ;; *) 1;;\n  ");
        assert_eq!(
            ps,
            vec!["let s = \";;\";;".to_string(), " (* ;; *) 1;;".to_string()]
        );
        assert!(split_phrases("(* only *)\n").is_empty());
        assert!(phrase_complete("1 +\n 2;;"));
        assert!(!phrase_complete("let x = 1"));
    }

    #[test]
    fn definitions_and_expressions_echo() {
        for b in [Backend::Jit, Backend::Interp] {
            assert_eq!(
                run(b, "let f x = x * 2;; f 21;;"),
                "val f : int -> int = <fun>\n- : int = 42\n"
            );
            assert_eq!(run(b, "1.5 +. 2.25;;"), "- : float = 3.75\n");
            assert_eq!(
                run(b, "let x = 1;; print_int x;;"),
                "val x : int = 1\n1- : unit = ()\n"
            );
        }
    }

    #[test]
    fn traps_keep_the_session() {
        for b in [Backend::Jit, Backend::Interp] {
            let mut s = Session::new(SessionConfig {
                backend: b,
                ..Default::default()
            });
            let ev = s.eval("1 / 0;;");
            assert_eq!(ev.output, "Exception: Division_by_zero.\n");
            assert_eq!(
                s.eval("let a = [| 1; 2 |];;").output,
                "val a : int array = [|1; 2|]\n"
            );
            assert!(matches!(
                s.eval("a.(9);;").error,
                Some(PhraseError::Trap(_))
            ));
            assert_eq!(s.eval("a.(1) + 40;;").output, "- : int = 42\n");
        }
    }

    #[test]
    fn directives() {
        let mut s = Session::default();
        assert_eq!(s.eval("#bogus;;").output, "Unknown directive `bogus`.\n");
        s.eval("#backend interp;;");
        assert_eq!(s.backend(), Backend::Interp);
        assert!(s.eval("#time;;").output.is_empty());
        assert!(s.eval("();;").output.starts_with("- : unit = ()\nTime: "));
        assert!(s.eval("#quit;;").quit);
    }

    #[test]
    fn names_do_not_cross_backends() {
        let mut s = Session::default();
        s.eval("let k = 5;;");
        s.eval("#backend interp;;");
        let ev = s.eval("k + 1;;");
        assert!(
            matches!(ev.error, Some(PhraseError::OtherBackend { .. })),
            "{}",
            ev.output
        );
        s.eval("let k = 7;;");
        assert_eq!(s.eval("k + 1;;").output, "- : int = 8\n");
    }
}
