//! Hindley-Milner inference: printed types of accepted phrases and the
//! diagnostics of rejected ones.

mod common;

use common::typing::{failures, infer_script, NEGATIVE, POSITIVE};

#[test]
fn typing_tables_hold() {
    assert!(POSITIVE.len() >= 30);
    assert!(NEGATIVE.len() >= 15);
    let f = failures();
    assert!(f.is_empty(), "{}", f.join("\n"));
}

#[test]
fn occurs_check_message_names_the_cycle() {
    let e = infer_script("fun x -> x x;;").unwrap_err();
    assert_eq!(
        e.to_string(),
        "characters 11-12: Error: This expression has type 'a -> 'b but an expression was expected of type 'a \
         (the type variable occurs inside 'a)"
    );
}
