//! Typing cases with hand-derived expected types. Each case is a script;
//! every phrase but the last must type-check.
#![allow(dead_code)]

use nml::frontend::TypeErrorKind;
use nml::frontend::{
    format_scheme, format_type, infer_phrase, parse_phrase, TypeEnv, TypeError, TypedTree,
};
use nml::toplevel::split_phrases;

/// Type of the script's last phrase: the last binding's scheme for a
/// definition, the expression type otherwise.
pub fn infer_script(src: &str) -> Result<String, TypeError> {
    let mut env = TypeEnv::new();
    let phrases = split_phrases(src);
    let mut last = String::new();
    for (k, p) in phrases.iter().enumerate() {
        let ast = parse_phrase(p).unwrap_or_else(|e| panic!("`{}`: {}", p, e));
        let (tree, next) = infer_phrase(&env, &ast, k as u32 + 1)?;
        last = match &tree {
            TypedTree::Def { defs, .. } => format_scheme(&defs.last().expect("binding").scheme),
            TypedTree::Expr(e) => format_type(&e.ty),
        };
        env = next;
    }
    Ok(last)
}

pub const POSITIVE: &[(&str, &str)] = &[
    ("1;;", "int"),
    ("1.5;;", "float"),
    ("\"s\";;", "string"),
    ("();;", "unit"),
    ("true && false;;", "bool"),
    ("fun x -> x;;", "'a -> 'a"),
    ("fun x y -> x;;", "'a -> 'b -> 'a"),
    ("fun f x -> f (f x);;", "('a -> 'a) -> 'a -> 'a"),
    (
        "let compose f g x = f (g x);;",
        "('a -> 'b) -> ('c -> 'a) -> 'c -> 'b",
    ),
    ("fun x -> (x, x);;", "'a -> 'a * 'a"),
    ("fun (a, b) -> (b, a);;", "'a * 'b -> 'b * 'a"),
    (
        "let rec fact n = if n = 0 then 1 else n * fact (n - 1);;",
        "int -> int",
    ),
    ("let id x = x in (id 1, id true);;", "int * bool"),
    ("[| 1; 2 |];;", "int array"),
    ("array_make;;", "int -> 'a -> 'a array"),
    ("fun a -> a.(0) + 1;;", "int array -> int"),
    ("fun a i v -> a.(i) <- v;;", "'a array -> int -> 'a -> unit"),
    ("fun x -> x +. 1.0;;", "float -> float"),
    (
        "fun n -> for i = 1 to n do print_int i done;;",
        "int -> unit",
    ),
    ("fun c -> while c () do () done;;", "(unit -> bool) -> unit"),
    ("let pair x y = (x, y);;", "'a -> 'b -> 'a * 'b"),
    ("let f x = let g y = (x, y) in g;;", "'a -> 'b -> 'a * 'b"),
    ("let rec loop x = loop x;;", "'a -> 'b"),
    ("fun f -> (f 1, f 2);;", "(int -> 'a) -> 'a * 'a"),
    ("fun x -> if x then 1.0 else 2.0;;", "bool -> float"),
    (
        "let twice f x = f (f x) in twice (fun x -> x * 2);;",
        "int -> int",
    ),
    ("fun x -> sqrt (float_of_int x);;", "int -> float"),
    ("(1, \"a\", 2.5, ());;", "int * string * float * unit"),
    ("fun ((a, b), c) -> a + b + c;;", "(int * int) * int -> int"),
    ("fun a -> [| a; a |];;", "'a -> 'a array"),
    ("fun f x -> f x x;;", "('a -> 'a -> 'b) -> 'a -> 'b"),
    ("fun f -> f 1 + 1;;", "(int -> int) -> int"),
    ("let id x = x;; (id 3, id \"x\");;", "int * string"),
    // value restriction: an application is not generalized
    ("let f = (fun x -> x) (fun y -> y);;", "'_a -> '_a"),
    ("let r = array_make 3 [||];;", "'_a array array"),
    // a weak variable is fixed by its first use in a later phrase
    (
        "let r = array_make 1 (fun x -> x);; r.(0) <- (fun x -> x + 1);; r;;",
        "(int -> int) array",
    ),
    // a syntactic function is generalized
    ("let k = fun x -> fun y -> x;;", "'a -> 'b -> 'a"),
    ("let g = let n = 1 in fun x -> (x, n);;", "'_a -> '_a * int"),
];

pub enum Expect {
    Mismatch(&'static str, &'static str),
    Occurs,
    Unbound(&'static str),
    NotAFunction(&'static str),
}

pub const NEGATIVE: &[(&str, Expect)] = &[
    ("1 + true;;", Expect::Mismatch("bool", "int")),
    ("fun x -> x x;;", Expect::Occurs),
    ("let rec f x = f;;", Expect::Occurs),
    ("fun f -> f f;;", Expect::Occurs),
    ("if 1 then 2 else 3;;", Expect::Mismatch("int", "bool")),
    (
        "if true then 1 else \"a\";;",
        Expect::Mismatch("string", "int"),
    ),
    ("undefined;;", Expect::Unbound("undefined")),
    ("1 2;;", Expect::NotAFunction("int")),
    ("1.0 + 2.0;;", Expect::Mismatch("float", "int")),
    ("1 +. 2.0;;", Expect::Mismatch("int", "float")),
    ("[| 1; true |];;", Expect::Mismatch("bool", "int")),
    (
        "(fun x -> x + 1) \"s\";;",
        Expect::Mismatch("string", "int"),
    ),
    ("print_int 1.5;;", Expect::Mismatch("float", "int")),
    // lambda-bound variables are monomorphic
    ("fun f -> (f 1, f true);;", Expect::Mismatch("bool", "int")),
    // value restriction: the weak variable is fixed to int, then misused
    (
        "let r = array_make 1 (fun x -> x);; r.(0) <- (fun x -> x + 1);; r.(0) true;;",
        Expect::Mismatch("bool", "int"),
    ),
    (
        "let g = (fun x -> x) (fun y -> y);; g 1;; g \"s\";;",
        Expect::Mismatch("string", "int"),
    ),
    (
        "let (a, b) = (1, 2, 3);;",
        Expect::Mismatch("int * int * int", "'a * 'b"),
    ),
];

/// Failures over both tables, one description each.
pub fn failures() -> Vec<String> {
    let mut failures = Vec::new();
    for (src, want) in POSITIVE {
        match infer_script(src) {
            Ok(got) if got == *want => {}
            Ok(got) => failures.push(format!("{}\n  got  {}\n  want {}", src, got, want)),
            Err(e) => failures.push(format!("{}\n  rejected: {}", src, e)),
        }
    }
    for (src, want) in NEGATIVE {
        let e = match infer_script(src) {
            Ok(t) => {
                failures.push(format!("{}\n  accepted as {}", src, t));
                continue;
            }
            Err(e) => e,
        };
        let ok = match (want, &e.kind) {
            (Expect::Mismatch(f, x), TypeErrorKind::Mismatch { found, expected }) => {
                found == f && expected == x
            }
            (Expect::Occurs, TypeErrorKind::Occurs { .. }) => true,
            (Expect::Unbound(n), TypeErrorKind::Unbound(m)) => n == m,
            (Expect::NotAFunction(t), TypeErrorKind::NotAFunction(u)) => t == u,
            _ => false,
        };
        if !ok {
            failures.push(format!("{}\n  got {:?}", src, e.kind));
        }
    }
    failures
}
