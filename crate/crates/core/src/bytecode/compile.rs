//! Lambda to bytecode.

use std::collections::HashMap;

use super::{BcInstr, BcProgram, Label};
use crate::lambda::{Const, Lambda, LambdaPhrase, PrimOp, VarId, VarNames};

#[derive(Clone, Copy, Debug)]
enum Loc {
    /// Absolute slot within the current frame, counted from its base.
    Stack(usize),
    Env(usize),
    SelfClosure,
}

#[derive(Clone, Default)]
struct Scope {
    locs: HashMap<VarId, Loc>,
    depth: usize,
}

struct PendingFn {
    closure_at: usize,
    param: VarId,
    body: Lambda,
    captures: Vec<VarId>,
    self_var: Option<VarId>,
    name: String,
}

struct Compiler<'a> {
    code: Vec<BcInstr>,
    constants: Vec<Const>,
    pending: Vec<PendingFn>,
    functions: Vec<(Label, String)>,
    names: &'a VarNames,
}

pub fn compile_bytecode(phrase: &LambdaPhrase) -> BcProgram {
    let mut c = Compiler {
        code: Vec::new(),
        constants: Vec::new(),
        pending: Vec::new(),
        functions: Vec::new(),
        names: &phrase.names,
    };
    let mut scope = Scope::default();
    c.expr(&phrase.body, &mut scope);
    c.code.push(BcInstr::Stop);
    while let Some(f) = c.pending.pop() {
        c.function(f);
    }
    BcProgram {
        code: c.code,
        constants: c.constants,
        entry: 0,
        functions: c.functions,
    }
}

impl Compiler<'_> {
    fn emit(&mut self, i: BcInstr) -> usize {
        self.code.push(i);
        self.code.len() - 1
    }

    fn here(&self) -> Label {
        self.code.len()
    }

    fn patch(&mut self, at: usize, target: Label) {
        match &mut self.code[at] {
            BcInstr::Branch(l)
            | BcInstr::BranchIf(l)
            | BcInstr::BranchIfNot(l)
            | BcInstr::Closure(l, _) => *l = target,
            other => unreachable!("patching a non-branch {:?}", other),
        }
    }

    fn constant(&mut self, k: &Const) -> usize {
        match self.constants.iter().position(|c| c == k) {
            Some(i) => i,
            None => {
                self.constants.push(k.clone());
                self.constants.len() - 1
            }
        }
    }

    fn push(&mut self, scope: &mut Scope) {
        self.emit(BcInstr::Push);
        scope.depth += 1;
    }

    fn pop(&mut self, n: usize, scope: &mut Scope) {
        if n > 0 {
            self.emit(BcInstr::Pop(n));
            scope.depth -= n;
        }
    }

    fn load(&mut self, x: VarId, scope: &Scope) {
        match scope.locs.get(&x) {
            Some(Loc::Stack(slot)) => {
                self.emit(BcInstr::Acc(scope.depth - 1 - slot));
            }
            Some(Loc::Env(i)) => {
                self.emit(BcInstr::EnvAcc(*i));
            }
            Some(Loc::SelfClosure) => {
                self.emit(BcInstr::SelfClosure);
            }
            None => unreachable!("unbound lambda variable {}", self.names.display(x)),
        }
    }

    fn function(&mut self, f: PendingFn) {
        let label = self.here();
        self.patch(f.closure_at, label);
        self.functions.push((label, f.name));
        let mut scope = Scope {
            locs: HashMap::new(),
            depth: 1,
        };
        scope.locs.insert(f.param, Loc::Stack(0));
        for (i, x) in f.captures.iter().enumerate() {
            scope.locs.insert(*x, Loc::Env(i));
        }
        if let Some(s) = f.self_var {
            scope.locs.insert(s, Loc::SelfClosure);
        }
        self.expr(&f.body, &mut scope);
        self.emit(BcInstr::Return);
    }

    fn closure(
        &mut self,
        params: &[VarId],
        body: &Lambda,
        self_var: Option<VarId>,
        scope: &mut Scope,
    ) {
        let (param, body) = match params {
            [p] => (*p, body.clone()),
            [p, rest @ ..] => (*p, Lambda::Fun(rest.to_vec(), Box::new(body.clone()))),
            [] => unreachable!("functions take a parameter"),
        };
        let whole = Lambda::Fun(vec![param], Box::new(body.clone()));
        let captures: Vec<VarId> = whole
            .free_vars()
            .into_iter()
            .filter(|x| Some(*x) != self_var)
            .collect();
        for x in captures.iter().rev() {
            self.load(*x, scope);
            self.push(scope);
        }
        let at = self.emit(BcInstr::Closure(0, captures.len()));
        scope.depth -= captures.len();
        let name = match self_var {
            Some(s) => self.names.display(s),
            None => format!("fun/{}", self.names.display(param)),
        };
        self.pending.push(PendingFn {
            closure_at: at,
            param,
            body,
            captures,
            self_var,
            name,
        });
    }

    fn expr(&mut self, l: &Lambda, scope: &mut Scope) {
        match l {
            Lambda::Var(x) => self.load(*x, scope),
            Lambda::Global(s) => {
                self.emit(BcInstr::GetGlobal(s.clone()));
            }
            Lambda::Const(k) => {
                let i = self.constant(k);
                self.emit(BcInstr::Const(i));
            }
            Lambda::Fun(ps, body) => self.closure(ps, body, None, scope),
            Lambda::Apply(f, args) => {
                for a in args.iter().rev() {
                    self.expr(a, scope);
                    self.push(scope);
                }
                self.expr(f, scope);
                self.emit(BcInstr::Apply(args.len()));
                scope.depth -= args.len();
            }
            Lambda::Let(x, bound, body) => {
                self.expr(bound, scope);
                let slot = scope.depth;
                self.push(scope);
                scope.locs.insert(*x, Loc::Stack(slot));
                self.expr(body, scope);
                self.pop(1, scope);
            }
            Lambda::LetRec(bindings, body) => {
                let [(f, fun)] = bindings.as_slice() else {
                    unreachable!("let rec binds exactly one function")
                };
                let Lambda::Fun(ps, fbody) = fun else {
                    unreachable!("let rec binds a function")
                };
                self.closure(ps, fbody, Some(*f), scope);
                let slot = scope.depth;
                self.push(scope);
                scope.locs.insert(*f, Loc::Stack(slot));
                self.expr(body, scope);
                self.pop(1, scope);
            }
            Lambda::Prim(op, args) => {
                for a in args[1..].iter().rev() {
                    self.expr(a, scope);
                    self.push(scope);
                }
                if let Some(first) = args.first() {
                    self.expr(first, scope);
                }
                let popped = args.len().saturating_sub(1);
                match op {
                    PrimOp::MakeBlock(n) => self.emit(BcInstr::MakeBlock(*n, 0)),
                    PrimOp::Field(n) => self.emit(BcInstr::GetField(*n)),
                    PrimOp::SetGlobal(s) => self.emit(BcInstr::SetGlobal(s.clone())),
                    op => self.emit(BcInstr::Prim(op.clone())),
                };
                scope.depth -= popped;
            }
            Lambda::If(c, t, e) => {
                self.expr(c, scope);
                let to_else = self.emit(BcInstr::BranchIfNot(0));
                self.expr(t, scope);
                let to_end = self.emit(BcInstr::Branch(0));
                let else_at = self.here();
                self.patch(to_else, else_at);
                self.expr(e, scope);
                let end = self.here();
                self.patch(to_end, end);
            }
            Lambda::While(c, body) => {
                let top = self.here();
                self.expr(c, scope);
                let to_exit = self.emit(BcInstr::BranchIfNot(0));
                self.expr(body, scope);
                self.emit(BcInstr::Branch(top));
                let exit = self.here();
                self.patch(to_exit, exit);
                self.expr(&Lambda::unit(), scope);
            }
            Lambda::For(i, lo, hi, body) => {
                self.expr(lo, scope);
                let i_slot = scope.depth;
                self.push(scope);
                self.expr(hi, scope);
                let hi_slot = scope.depth;
                self.push(scope);
                scope.locs.insert(*i, Loc::Stack(i_slot));
                // skip the loop entirely when lo > hi
                self.compare(i_slot, hi_slot, crate::lambda::Cmp::Le, scope);
                let to_exit = self.emit(BcInstr::BranchIfNot(0));
                let top = self.here();
                self.expr(body, scope);
                self.compare(i_slot, hi_slot, crate::lambda::Cmp::Eq, scope);
                let to_exit2 = self.emit(BcInstr::BranchIf(0));
                let one = self.constant(&Const::Int(1));
                self.emit(BcInstr::Const(one));
                self.push(scope);
                self.emit(BcInstr::Acc(scope.depth - 1 - i_slot));
                self.emit(BcInstr::Prim(PrimOp::AddInt));
                scope.depth -= 1;
                self.emit(BcInstr::Assign(scope.depth - 1 - i_slot));
                self.emit(BcInstr::Branch(top));
                let exit = self.here();
                self.patch(to_exit, exit);
                self.patch(to_exit2, exit);
                self.pop(2, scope);
                self.expr(&Lambda::unit(), scope);
            }
            Lambda::Seq(a, b) => {
                self.expr(a, scope);
                self.expr(b, scope);
            }
        }
    }

    /// Accumulator := slot `a` <cmp> slot `b`.
    fn compare(&mut self, a: usize, b: usize, cmp: crate::lambda::Cmp, scope: &mut Scope) {
        self.emit(BcInstr::Acc(scope.depth - 1 - b));
        self.push(scope);
        self.emit(BcInstr::Acc(scope.depth - 1 - a));
        self.emit(BcInstr::Prim(PrimOp::CmpInt(cmp)));
        scope.depth -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phrase(body: Lambda) -> LambdaPhrase {
        LambdaPhrase {
            body,
            names: VarNames::default(),
        }
    }

    #[test]
    fn addition_evaluates_right_operand_first() {
        let p = compile_bytecode(&phrase(Lambda::Prim(
            PrimOp::AddInt,
            vec![Lambda::int(1), Lambda::int(2)],
        )));
        let consts: Vec<_> = p
            .code
            .iter()
            .map(|i| match i {
                BcInstr::Const(k) => format!("const {:?}", p.constants[*k]),
                other => format!("{:?}", other),
            })
            .collect();
        assert_eq!(
            consts,
            [
                "const Int(2)",
                "Push",
                "const Int(1)",
                "Prim(AddInt)",
                "Stop"
            ]
        );
    }

    #[test]
    fn identity_function_body() {
        let p = compile_bytecode(&phrase(Lambda::Fun(vec![0], Box::new(Lambda::Var(0)))));
        assert_eq!(p.code[0], BcInstr::Closure(2, 0));
        assert_eq!(&p.code[2..], &[BcInstr::Acc(0), BcInstr::Return]);
        assert!(p.labels_in_range());
    }

    #[test]
    fn false_loop_exits_on_first_test() {
        let l = Lambda::While(Box::new(Lambda::boolean(false)), Box::new(Lambda::unit()));
        let p = compile_bytecode(&phrase(l));
        assert!(matches!(p.code[1], BcInstr::BranchIfNot(4)));
    }
}
