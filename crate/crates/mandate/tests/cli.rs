//! End-to-end CLI behaviour: exit codes, byte-stable output, and the
//! infix printer/parser round trip on random programs.

use mandate::cli::run_captured;
use mandate::surface::{parse_program, print_program};
use mandate_core::languages::ProgramGen;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn code(args: &[&str]) -> i32 {
    run_captured(args).0
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let commands: &[&[&str]] = &[
        &["cfg", "loop.imp"],
        &["cfg", "nested.imp", "--proj", "basic-block", "--abs", "expr-irrel"],
        &["pattern", "all"],
        &["pattern", "if", "--profile", "vnn"],
        &["codegen"],
        &["codegen", "--lang", "imp-ext", "--text"],
        &["pam-dump", "arith.imp"],
        &["am-dump"],
        &["analyze", "paren", "parens.imp"],
    ];
    for args in commands {
        let first = run_captured(args);
        let second = run_captured(args);
        assert_eq!(first, second, "{:?}", args);
        assert!(!first.1.is_empty(), "{:?} printed nothing", args);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["check"]), 0);
    assert_eq!(code(&["check", "--lang", "lockstep-demo"]), 3);
    assert_eq!(code(&["cfg", "no-such-program.imp"]), 2);
    assert_eq!(code(&["cfg", "loop.imp", "--lang", "no-such-language"]), 2);
    assert_eq!(code(&["cfg", "loop.imp", "--max-states", "2", "--strict"]), 4);
    assert_eq!(code(&["cfg", "loop.imp", "--max-states", "2"]), 0);
    assert_eq!(code(&["analyze", "paren", "parens.imp", "--abs", "bool-track:b"]), 0);
    assert_eq!(code(&["analyze", "paren", "parens.imp"]), 1);
    assert_eq!(code(&["certify-termination", "--lang", "imp-ext"]), 0);
}

#[test]
fn lockstep_names_the_offending_rule() {
    let (c, out, err) = run_captured(&["check", "--lang", "lockstep-demo"]);
    assert_eq!(c, 3);
    assert!(format!("{}{}", out, err).contains("LockstepComp.1"));
}

#[test]
fn recipes_written_by_codegen_apply() {
    let dir = std::env::temp_dir().join(format!("mandate-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("imp.json");
    let p = path.to_str().unwrap();
    assert_eq!(code(&["codegen", "-o", p]), 0);
    let (c, out, _) = run_captured(&["apply-recipes", p, "constants.imp"]);
    assert_eq!(c, 0);
    assert!(out.starts_with("digraph"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn constant_propagation_reports_exit_values() {
    let (c, out, _) = run_captured(&["analyze", "const-prop", "constants.imp"]);
    assert_eq!(c, 0);
    let exit = out.lines().find(|l| l.starts_with("exit:")).unwrap();
    assert!(exit.contains("x=1") && exit.contains("y=3"), "{}", exit);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_programs_parse_back(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = |n: usize| rng.gen_range(0..n);
        let c = ProgramGen { pick: &mut pick }.program(3);
        let text = print_program(&c.term).expect("generated programs are printable");
        let back = parse_program(&text).map_err(|e| TestCaseError::fail(format!("{}: {}", text, e)))?;
        prop_assert_eq!(back.term, c.term, "{}", text);
    }
}
