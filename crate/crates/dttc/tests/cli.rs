use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn dttc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dttc")).current_dir(root()).env_remove("DTTC_FUEL").args(args).output().expect("dttc runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json report")
}

#[test]
fn prelude_checks_and_mutants_fail() {
    assert_eq!(code(&dttc(&["check", "corpus/prelude.dtt"])), 0);
    let o = dttc(&["check", "corpus/mutants.dtt", "--keep-going", "--format=json"]);
    assert_eq!(code(&o), 1);
    let j = json(&o);
    assert_eq!(j["ok"], false);
    assert!(j["files"][0]["repro"].as_str().unwrap().starts_with("dttc check corpus/mutants.dtt"));
    assert!(!j["files"][0]["diagnostics"].as_array().unwrap().is_empty());
}

#[test]
fn fuzz_examples_check_under_the_fuzz_calculus() {
    assert_eq!(code(&dttc(&["check", "corpus/fuzz_examples.dtt", "--calculus=fuzz"])), 0);
}

#[test]
fn derive_square_in_cdc_is_two_x_v() {
    let o = dttc(&["derive", "corpus/cdc/square.dtt", "square", "--backend=cdc", "--format=json"]);
    assert_eq!(code(&o), 0);
    let j = json(&o);
    assert_eq!(j["derivative"], "2*x*v");
    assert!(j["expansion"].as_str().unwrap().starts_with("Der"));
    assert!(j["predicate"].as_str().unwrap().contains("D[Real](mul (x, x), mul (y, y))"));
}

#[test]
fn derive_id_in_dlr_is_the_identity_on_distances() {
    let o = dttc(&["derive", "corpus/dlr/distance.dtt", "id", "--backend=dlr", "--format=json"]);
    assert_eq!(code(&o), 0);
    let rows = json(&o)["derivative"].as_array().unwrap().clone();
    assert!(!rows.is_empty());
    for r in rows {
        assert_eq!(r["d"], r["value"]);
    }
}

#[test]
fn derive_nonexpansive_map_in_metric_returns_epsilon() {
    let o = dttc(&["derive", "corpus/metric/lipschitz.dtt", "f", "--backend=metric", "--format=json"]);
    assert_eq!(code(&o), 0);
    for r in json(&o)["derivative"].as_array().unwrap() {
        assert_eq!(r["d"], r["value"]);
    }
}

#[test]
fn derive_rejects_non_functions() {
    assert_eq!(code(&dttc(&["derive", "corpus/cdc/square.dtt", "dsq"])), 1);
    assert_eq!(code(&dttc(&["derive", "corpus/cdc/square.dtt", "nothing"])), 3);
}

#[test]
fn normalize_folds_with_dchain() {
    let o = dttc(&["normalize", "corpus/cdc/square.dtt", "--term=chain", "--rules=dchain", "--format=json"]);
    assert_eq!(code(&o), 0);
    let nf = json(&o)["definitions"][0]["normal_form"].as_str().unwrap().to_string();
    assert!(!nf.contains("Der sq"), "{nf}");
}

#[test]
fn eval_reports_the_bag_change() {
    let o = dttc(&["eval", "corpus/change/bag.dtt", "--backend=change", "--term=dy", "--format=json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["results"][0]["value"], "+4");
}

#[test]
fn configuration_errors_exit_three() {
    assert_eq!(code(&dttc(&["eval", "corpus/change/bag.dtt"])), 3);
    assert_eq!(code(&dttc(&["eval", "corpus/change/bag.dtt", "--backend=nope"])), 3);
    assert_eq!(code(&dttc(&["check", "corpus/prelude.dtt", "--rules=fext1,fext2"])), 3);
    assert_eq!(code(&dttc(&["check", "missing.dtt"])), 3);
    assert_eq!(code(&dttc(&["frobnicate"])), 3);
}

#[test]
fn fuel_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_dttc"))
        .current_dir(root())
        .env("DTTC_FUEL", "not-a-number")
        .args(["check", "corpus/prelude.dtt"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn backend_corpus_json_is_deterministic() {
    let a = dttc(&["corpus", "--backend=cdc", "--format=json"]);
    let b = dttc(&["corpus", "--backend=cdc", "--format=json"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["summary"]["failed"], 0);
}

#[test]
fn full_corpus_passes_and_the_forbidden_rule_trivializes() {
    let o = dttc(&["corpus"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("10/10 cases passed"));
    let o = dttc(&["corpus", "--backend=cdc", "--rules=+jeta-plus", "--format=json"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["trivialization"], true);
}
