use std::path::PathBuf;

use dtt::surface::elab::{check_source, ElabOptions, Module};

fn load(name: &str) -> Module {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    let src = std::fs::read_to_string(&path).unwrap();
    check_source(&src, &ElabOptions::default())
}

#[test]
fn prelude_is_accepted() {
    let m = load("prelude.dtt");
    assert!(m.ok(), "{:#?}", m.diagnostics);
}

#[test]
fn every_mutant_is_rejected() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/mutants.dtt");
    let src = std::fs::read_to_string(path).unwrap();
    let defs: Vec<&str> = src.lines().filter_map(|l| l.strip_prefix("def ")).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(defs.len(), 20);
    let m = load("mutants.dtt");
    for s in &m.statuses {
        assert_eq!(s.ok, !defs.contains(&s.name.as_str()), "{}: {:?}", s.name, s.message);
    }
}

#[test]
fn fuzz_examples_are_accepted() {
    let m = load("fuzz_examples.dtt");
    assert!(m.ok(), "{:#?}", m.diagnostics);
}

#[test]
fn backend_cases_pass() {
    use dtt::suite::{discover, run_case, RunOptions};
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut bad = Vec::new();
    for case in discover(&dir).unwrap() {
        let r = run_case(&case, &RunOptions::default());
        if !r.ok {
            bad.push(serde_json::to_string_pretty(&r).unwrap());
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}
