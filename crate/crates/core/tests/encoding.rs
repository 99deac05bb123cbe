//! Machine-code bytes against GNU `as` output committed under tests/golden.

mod common;

use common::encoding::{check_functions, check_single, hex, masked, single_cases, FUNCTIONS};
use nml::jit::X86Inst;

#[test]
fn single_instructions_match_the_reference_assembler() {
    assert!(single_cases().len() >= 40);
    if let Err(e) = check_single() {
        panic!("{}", e);
    }
}

#[test]
fn whole_functions_match_the_reference_assembler() {
    assert!(FUNCTIONS.len() >= 5);
    if let Err(e) = check_functions() {
        panic!("{}", e);
    }
}

#[test]
fn masking_leaves_unrelocated_bytes_exact() {
    assert_eq!(
        masked(&[0xE8, 0xCC, 0xCC, 0xCC, 0xCC, 0xC3], &[(1, 4)]),
        "E8 __ __ __ __ C3"
    );
    assert_eq!(hex(&X86Inst::Ret.encode().0), "C3");
}
