//! Semantics-preserving lambda rewrites, iterated to a fixpoint.

use super::{Const, Lambda, PrimOp, VarId};
use crate::rt::wrap63;

pub fn simplify(l: Lambda) -> Lambda {
    let mut cur = l;
    loop {
        let next = step(cur.clone());
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn is_pure(l: &Lambda) -> bool {
    match l {
        Lambda::Var(_) | Lambda::Global(_) | Lambda::Const(_) | Lambda::Fun(..) => true,
        Lambda::Prim(op, args) => op.is_pure() && args.iter().all(is_pure),
        _ => false,
    }
}

fn fold(op: &PrimOp, args: &[Lambda]) -> Option<Lambda> {
    use Const::*;
    let c = |i: usize| match args.get(i) {
        Some(Lambda::Const(c)) => Some(c),
        _ => None,
    };
    let int = |n: i64| Some(Lambda::int(wrap63(n)));
    match (op, c(0), c(1)) {
        (PrimOp::AddInt, Some(Int(a)), Some(Int(b))) => int(a.wrapping_add(*b)),
        (PrimOp::SubInt, Some(Int(a)), Some(Int(b))) => int(a.wrapping_sub(*b)),
        (PrimOp::MulInt, Some(Int(a)), Some(Int(b))) => int(a.wrapping_mul(*b)),
        (PrimOp::DivInt, Some(Int(a)), Some(Int(b))) if *b != 0 => int(a.wrapping_div(*b)),
        (PrimOp::ModInt, Some(Int(a)), Some(Int(b))) if *b != 0 => int(a.wrapping_rem(*b)),
        (PrimOp::NegInt, Some(Int(a)), _) => int(a.wrapping_neg()),
        (PrimOp::CmpInt(cmp), Some(Int(a)), Some(Int(b))) => {
            Some(Lambda::boolean(cmp.eval(*a, *b)))
        }
        (PrimOp::Not, Some(Bool(b)), _) => Some(Lambda::boolean(!b)),
        _ => None,
    }
}

fn substitute(l: Lambda, x: VarId, by: &Lambda) -> Lambda {
    map_children(l, &mut |c| substitute(c, x, by), &mut |l| match l {
        Lambda::Var(y) if y == x => Err(by.clone()),
        other => Ok(other),
    })
}

/// Applies `f` to every direct child. `leaf` may replace a node before its
/// children are visited by returning `Err`.
fn map_children(
    l: Lambda,
    f: &mut dyn FnMut(Lambda) -> Lambda,
    leaf: &mut dyn FnMut(Lambda) -> Result<Lambda, Lambda>,
) -> Lambda {
    let l = match leaf(l) {
        Ok(l) => l,
        Err(replaced) => return replaced,
    };
    macro_rules! b {
        ($e:expr) => {
            Box::new(f(*$e))
        };
    }
    match l {
        Lambda::Var(_) | Lambda::Global(_) | Lambda::Const(_) => l,
        Lambda::Fun(ps, body) => Lambda::Fun(ps, b!(body)),
        Lambda::Apply(g, args) => {
            let g = b!(g);
            Lambda::Apply(g, args.into_iter().map(|a| f(a)).collect())
        }
        Lambda::Let(x, a, body) => {
            let a = b!(a);
            Lambda::Let(x, a, b!(body))
        }
        Lambda::LetRec(bs, body) => {
            let bs = bs.into_iter().map(|(x, e)| (x, f(e))).collect();
            Lambda::LetRec(bs, b!(body))
        }
        Lambda::Prim(op, args) => Lambda::Prim(op, args.into_iter().map(|a| f(a)).collect()),
        Lambda::If(c, t, e) => {
            let c = b!(c);
            let t = b!(t);
            Lambda::If(c, t, b!(e))
        }
        Lambda::While(c, body) => {
            let c = b!(c);
            Lambda::While(c, b!(body))
        }
        Lambda::For(x, lo, hi, body) => {
            let lo = b!(lo);
            let hi = b!(hi);
            Lambda::For(x, lo, hi, b!(body))
        }
        Lambda::Seq(a1, a2) => {
            let a1 = b!(a1);
            Lambda::Seq(a1, b!(a2))
        }
    }
}

fn step(l: Lambda) -> Lambda {
    let l = map_children(l, &mut step, &mut Ok);
    match l {
        Lambda::Prim(op, args) => match fold(&op, &args) {
            Some(folded) => folded,
            None => Lambda::Prim(op, args),
        },
        Lambda::Let(x, bound, body) => match *bound {
            Lambda::Const(_) | Lambda::Var(_) => substitute(*body, x, &bound),
            bound if is_pure(&bound) && !body.free_vars().contains(&x) => *body,
            bound => Lambda::Let(x, Box::new(bound), body),
        },
        Lambda::LetRec(bs, body) => {
            let unused = bs.iter().all(|(x, _)| !body.free_vars().contains(x));
            if unused {
                *body
            } else {
                Lambda::LetRec(bs, body)
            }
        }
        Lambda::If(c, t, e) => match *c {
            Lambda::Const(Const::Bool(true)) => *t,
            Lambda::Const(Const::Bool(false)) => *e,
            c => Lambda::If(Box::new(c), t, e),
        },
        Lambda::Seq(a, b) => match *a {
            Lambda::Seq(a1, a2) => Lambda::Seq(a1, Box::new(Lambda::Seq(a2, b))),
            a if is_pure(&a) => *b,
            a => Lambda::Seq(Box::new(a), b),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::Cmp;

    #[test]
    fn trivial_bindings_are_inlined() {
        let l = Lambda::let_(0, Lambda::int(1), Lambda::Var(0));
        assert_eq!(simplify(l), Lambda::int(1));
    }

    #[test]
    fn constants_fold() {
        let l = Lambda::Prim(PrimOp::AddInt, vec![Lambda::int(2), Lambda::int(3)]);
        assert_eq!(simplify(l), Lambda::int(5));
    }

    #[test]
    fn branches_are_pruned() {
        let l = Lambda::If(
            Box::new(Lambda::boolean(true)),
            Box::new(Lambda::int(1)),
            Box::new(Lambda::int(2)),
        );
        assert_eq!(simplify(l), Lambda::int(1));
    }

    #[test]
    fn folding_wraps_to_63_bits() {
        let max = (1i64 << 62) - 1;
        let l = Lambda::Prim(PrimOp::AddInt, vec![Lambda::int(max), Lambda::int(1)]);
        assert_eq!(simplify(l), Lambda::int(-(1i64 << 62)));
    }

    #[test]
    fn division_by_constant_zero_is_kept() {
        let l = Lambda::Prim(PrimOp::DivInt, vec![Lambda::int(1), Lambda::int(0)]);
        assert_eq!(simplify(l.clone()), l);
    }

    #[test]
    fn effects_are_not_dropped() {
        let print = Lambda::Prim(PrimOp::PrintInt, vec![Lambda::int(1)]);
        let l = Lambda::let_(0, print.clone(), Lambda::int(2));
        assert_eq!(simplify(l.clone()), l);
    }

    #[test]
    fn nested_sequences_flatten() {
        let p = |n| Lambda::Prim(PrimOp::PrintInt, vec![Lambda::int(n)]);
        let l = Lambda::seq(Lambda::seq(p(1), p(2)), p(3));
        assert_eq!(simplify(l), Lambda::seq(p(1), Lambda::seq(p(2), p(3))));
    }

    #[test]
    fn comparisons_fold() {
        let l = Lambda::Prim(
            PrimOp::CmpInt(Cmp::Lt),
            vec![Lambda::int(1), Lambda::int(2)],
        );
        assert_eq!(simplify(l), Lambda::boolean(true));
    }
}
