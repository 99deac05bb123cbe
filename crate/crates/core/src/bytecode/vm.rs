//! The bytecode interpreter.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::{BcHandle, BcInstr};
use crate::lambda::{Const, PrimOp};
use crate::rt::{format_float, int_of_float, wrap63, Trap, TrapKind};

#[derive(Clone, Debug)]
pub enum VmValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    Unit,
    Str(Rc<str>),
    /// Tuples and arrays; fields are mutable for arrays.
    Block(Rc<RefCell<Vec<VmValue>>>),
    Closure(Rc<VmClosure>),
}

#[derive(Debug)]
pub struct VmClosure {
    pub program: BcHandle,
    pub pc: usize,
    pub env: Vec<VmValue>,
}

impl VmValue {
    fn int(&self) -> i64 {
        match self {
            VmValue::Int(n) => *n,
            other => unreachable!("expected an int, found {:?}", other),
        }
    }

    fn float(&self) -> f64 {
        match self {
            VmValue::Float(f) => *f,
            other => unreachable!("expected a float, found {:?}", other),
        }
    }

    fn boolean(&self) -> bool {
        match self {
            VmValue::Bool(b) => *b,
            other => unreachable!("expected a bool, found {:?}", other),
        }
    }

    fn block(&self) -> &Rc<RefCell<Vec<VmValue>>> {
        match self {
            VmValue::Block(b) => b,
            other => unreachable!("expected a block, found {:?}", other),
        }
    }

    fn from_const(c: &Const) -> VmValue {
        match c {
            Const::Int(n) => VmValue::Int(*n),
            Const::Float(f) => VmValue::Float(*f),
            Const::Bool(b) => VmValue::Bool(*b),
            Const::Unit => VmValue::Unit,
            Const::String(s) => VmValue::Str(s.as_str().into()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VmConfig {
    /// Maximum number of active calls before a stack-overflow trap.
    pub max_frames: usize,
    /// Largest block, in words including its header, that `array_make` may
    /// create before reporting exhaustion.
    pub max_block_words: usize,
    /// Checks that each run ends with a balanced stack.
    pub check_balance: bool,
}

impl Default for VmConfig {
    fn default() -> Self {
        VmConfig {
            max_frames: 1_000_000,
            max_block_words: (64 << 20) / 8,
            check_balance: cfg!(debug_assertions),
        }
    }
}

struct Frame {
    program: BcHandle,
    pc: usize,
    env: Option<Rc<VmClosure>>,
    base: usize,
    /// Arguments still to be applied to the result of this call.
    extra: usize,
}

/// Interpreter state that persists across phrases.
#[derive(Default)]
pub struct Vm {
    pub globals: HashMap<String, VmValue>,
    pub config: VmConfig,
}

impl Vm {
    pub fn new(config: VmConfig) -> Vm {
        Vm {
            globals: HashMap::new(),
            config,
        }
    }

    pub fn run(&mut self, p: &BcHandle, out: &mut String) -> Result<VmValue, Trap> {
        run_bytecode(p, &mut self.globals, out, &self.config)
    }
}

/// Runs `p` from its entry. Printed output is appended to `out`.
pub fn run_bytecode(
    p: &BcHandle,
    globals: &mut HashMap<String, VmValue>,
    out: &mut String,
    config: &VmConfig,
) -> Result<VmValue, Trap> {
    let mut stack: Vec<VmValue> = Vec::with_capacity(256);
    let mut frames: Vec<Frame> = Vec::new();
    let mut acc = VmValue::Unit;
    let mut env: Option<Rc<VmClosure>> = None;
    let mut program: BcHandle = p.clone();
    let mut pc = p.entry;

    'switch: loop {
        let current = program.clone();
        let code = &current.code;
        loop {
            let ins = &code[pc];
            pc += 1;
            match ins {
                BcInstr::Const(k) => acc = VmValue::from_const(&current.constants[*k]),
                BcInstr::Push => stack.push(acc.clone()),
                BcInstr::Acc(n) => acc = stack[stack.len() - 1 - n].clone(),
                BcInstr::Assign(n) => {
                    let i = stack.len() - 1 - n;
                    stack[i] = std::mem::replace(&mut acc, VmValue::Unit);
                }
                BcInstr::EnvAcc(n) => {
                    acc = env.as_ref().expect("closure environment").env[*n].clone()
                }
                BcInstr::SelfClosure => {
                    acc = VmValue::Closure(env.clone().expect("running closure"))
                }
                BcInstr::Closure(label, n) => {
                    let captured = stack.split_off(stack.len() - n).into_iter().rev().collect();
                    acc = VmValue::Closure(Rc::new(VmClosure {
                        program: current.clone(),
                        pc: *label,
                        env: captured,
                    }));
                }
                BcInstr::Apply(n) => {
                    let VmValue::Closure(clo) = std::mem::replace(&mut acc, VmValue::Unit) else {
                        unreachable!("applying a non-function")
                    };
                    if frames.len() >= config.max_frames {
                        return Err(TrapKind::StackOverflow.into());
                    }
                    let arg = stack.pop().expect("argument");
                    frames.push(Frame {
                        program: current.clone(),
                        pc,
                        env: env.take(),
                        base: stack.len(),
                        extra: n - 1,
                    });
                    stack.push(arg);
                    pc = clo.pc;
                    program = clo.program.clone();
                    env = Some(clo);
                    continue 'switch;
                }
                BcInstr::Return => {
                    let frame = frames.pop().expect("return inside a call");
                    stack.truncate(frame.base);
                    if frame.extra > 0 {
                        let VmValue::Closure(clo) = std::mem::replace(&mut acc, VmValue::Unit)
                        else {
                            unreachable!("over-application of a non-function")
                        };
                        let arg = stack.pop().expect("pending argument");
                        frames.push(Frame {
                            base: stack.len(),
                            extra: frame.extra - 1,
                            ..frame
                        });
                        stack.push(arg);
                        pc = clo.pc;
                        program = clo.program.clone();
                        env = Some(clo);
                    } else {
                        pc = frame.pc;
                        program = frame.program;
                        env = frame.env;
                    }
                    continue 'switch;
                }
                BcInstr::Branch(l) => pc = *l,
                BcInstr::BranchIf(l) => {
                    if acc.boolean() {
                        pc = *l
                    }
                }
                BcInstr::BranchIfNot(l) => {
                    if !acc.boolean() {
                        pc = *l
                    }
                }
                BcInstr::Prim(op) => {
                    acc = prim(
                        op,
                        std::mem::replace(&mut acc, VmValue::Unit),
                        &mut stack,
                        out,
                        config,
                    )?
                }
                BcInstr::MakeBlock(n, _tag) => {
                    let mut fields = Vec::with_capacity(*n);
                    fields.push(std::mem::replace(&mut acc, VmValue::Unit));
                    for _ in 1..*n {
                        fields.push(stack.pop().expect("block field"));
                    }
                    acc = VmValue::Block(Rc::new(RefCell::new(fields)));
                }
                BcInstr::GetField(n) => {
                    let v = acc.block().borrow()[*n].clone();
                    acc = v;
                }
                BcInstr::GetGlobal(s) => {
                    acc = globals
                        .get(s)
                        .cloned()
                        .unwrap_or_else(|| unreachable!("global {} is defined", s))
                }
                BcInstr::SetGlobal(s) => {
                    globals.insert(s.clone(), std::mem::replace(&mut acc, VmValue::Unit));
                }
                BcInstr::Pop(n) => stack.truncate(stack.len() - n),
                BcInstr::Stop => {
                    if config.check_balance {
                        assert!(
                            stack.is_empty() && frames.is_empty(),
                            "unbalanced stack at stop"
                        );
                    }
                    return Ok(acc);
                }
            }
        }
    }
}

fn prim(
    op: &PrimOp,
    a: VmValue,
    stack: &mut Vec<VmValue>,
    out: &mut String,
    config: &VmConfig,
) -> Result<VmValue, Trap> {
    let mut pop = || stack.pop().expect("primitive operand");
    Ok(match op {
        PrimOp::AddInt => VmValue::Int(wrap63(a.int().wrapping_add(pop().int()))),
        PrimOp::SubInt => VmValue::Int(wrap63(a.int().wrapping_sub(pop().int()))),
        PrimOp::MulInt => VmValue::Int(wrap63(a.int().wrapping_mul(pop().int()))),
        PrimOp::DivInt | PrimOp::ModInt => {
            let b = pop().int();
            if b == 0 {
                return Err(TrapKind::DivideByZero.into());
            }
            let r = if *op == PrimOp::DivInt {
                a.int().wrapping_div(b)
            } else {
                a.int().wrapping_rem(b)
            };
            VmValue::Int(wrap63(r))
        }
        PrimOp::NegInt => VmValue::Int(wrap63(a.int().wrapping_neg())),
        PrimOp::AddFloat => VmValue::Float(a.float() + pop().float()),
        PrimOp::SubFloat => VmValue::Float(a.float() - pop().float()),
        PrimOp::MulFloat => VmValue::Float(a.float() * pop().float()),
        PrimOp::DivFloat => VmValue::Float(a.float() / pop().float()),
        PrimOp::NegFloat => VmValue::Float(-a.float()),
        PrimOp::CmpInt(c) => VmValue::Bool(c.eval(a.int(), pop().int())),
        PrimOp::Not => VmValue::Bool(!a.boolean()),
        PrimOp::ArrayMake => {
            let n = a.int();
            let init = pop();
            if n < 0 {
                return Err(TrapKind::InvalidArgument.into());
            }
            if n as u64 + 1 > config.max_block_words as u64 {
                return Err(TrapKind::Exhaustion.into());
            }
            VmValue::Block(Rc::new(RefCell::new(vec![init; n as usize])))
        }
        PrimOp::ArrayGet => {
            let i = pop().int();
            let b = a.block().borrow();
            if i < 0 || i as usize >= b.len() {
                return Err(TrapKind::Bounds.into());
            }
            b[i as usize].clone()
        }
        PrimOp::ArraySet => {
            let i = pop().int();
            let v = pop();
            let mut b = a.block().borrow_mut();
            if i < 0 || i as usize >= b.len() {
                return Err(TrapKind::Bounds.into());
            }
            b[i as usize] = v;
            VmValue::Unit
        }
        PrimOp::ArrayLength => VmValue::Int(a.block().borrow().len() as i64),
        PrimOp::StringLength => match &a {
            VmValue::Str(s) => VmValue::Int(s.len() as i64),
            other => unreachable!("string_length of {:?}", other),
        },
        PrimOp::PrintInt => {
            out.push_str(&a.int().to_string());
            VmValue::Unit
        }
        PrimOp::PrintFloat => {
            out.push_str(&format_float(a.float()));
            VmValue::Unit
        }
        PrimOp::PrintString => {
            match &a {
                VmValue::Str(s) => out.push_str(s),
                other => unreachable!("print_string of {:?}", other),
            }
            VmValue::Unit
        }
        PrimOp::PrintNewline => {
            out.push('\n');
            VmValue::Unit
        }
        PrimOp::FloatOfInt => VmValue::Float(a.int() as f64),
        PrimOp::IntOfFloat => VmValue::Int(int_of_float(a.float())),
        PrimOp::Sqrt => VmValue::Float(a.float().sqrt()),
        PrimOp::MakeBlock(_) | PrimOp::Field(_) | PrimOp::SetGlobal(_) => {
            unreachable!("{} has a dedicated instruction", op.name())
        }
    })
}

/// Runs a standalone program on a fresh machine.
#[cfg(test)]
pub fn run_standalone(p: super::BcProgram) -> Result<(VmValue, String), Trap> {
    let mut out = String::new();
    let mut globals = HashMap::new();
    let v = run_bytecode(&Rc::new(p), &mut globals, &mut out, &VmConfig::default())?;
    Ok((v, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::compile_bytecode;
    use crate::frontend::{infer_phrase, parse_phrase, TypeEnv};
    use crate::lambda::{simplify, translate};

    fn run(src: &str) -> Result<(VmValue, String), Trap> {
        let ast = parse_phrase(src).unwrap();
        let (tt, _) = infer_phrase(&TypeEnv::new(), &ast, 1).unwrap();
        let mut l = translate(&tt);
        l.body = simplify(l.body);
        run_standalone(compile_bytecode(&l))
    }

    fn int(src: &str) -> i64 {
        run(src).unwrap().0.int()
    }

    #[test]
    fn arithmetic() {
        assert_eq!(int("1 + 2;;"), 3);
        assert_eq!(int("let f x = x * 2 in f 21;;"), 42);
        assert_eq!(int("7 mod 3 - 10 / 3;;"), -2);
    }

    #[test]
    fn bounds_trap() {
        assert_eq!(
            run("array_get [|1; 2|] 5;;").unwrap_err().kind,
            TrapKind::Bounds
        );
    }

    #[test]
    fn division_by_zero_traps() {
        assert_eq!(
            run("let z = 0 in 1 / z;;").unwrap_err().kind,
            TrapKind::DivideByZero
        );
    }

    #[test]
    fn recursion_and_closures() {
        assert_eq!(
            int("let rec fib n = if n < 2 then n else fib (n - 1) + fib (n - 2) in fib 15;;"),
            610
        );
        assert_eq!(
            int("let add x y = x + y in let inc = add 1 in inc 41;;"),
            42
        );
        assert_eq!(
            int("let rec f x y = if x = 0 then y else f (x - 1) (y + 2) in f 10 0;;"),
            20
        );
    }

    #[test]
    fn loops_and_arrays() {
        let src = "let a = array_make 10 0 in for i = 0 to 9 do a.(i) <- i * i done; \
                   let s = [|0|] in for i = 0 to 9 do s.(0) <- s.(0) + a.(i) done; s.(0);;";
        assert_eq!(int(src), 285);
        assert_eq!(
            int("let n = [|0|] in for i = 5 to 4 do n.(0) <- 1 done; n.(0);;"),
            0
        );
        assert_eq!(
            int("let n = [|0|] in while n.(0) < 7 do n.(0) <- n.(0) + 1 done; n.(0);;"),
            7
        );
    }

    #[test]
    fn printing_order() {
        let (_, out) =
            run("print_int 1; print_string \" \"; print_float 2.0; print_newline ();;").unwrap();
        assert_eq!(out, "1 2.\n");
    }

    #[test]
    fn deep_recursion_overflows() {
        let e = run("let rec f x = 1 + f x in f 0;;").unwrap_err();
        assert_eq!(e.kind, TrapKind::StackOverflow);
    }
}
