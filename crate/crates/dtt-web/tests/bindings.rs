use dtt_web::{check_report, derive_report, evaluate_report, EXAMPLES};

fn example(name: &str) -> (&'static str, &'static str, &'static str) {
    let (_, b, s, e) = EXAMPLES.iter().find(|x| x.0 == name).unwrap();
    (b, s, e)
}

#[test]
fn every_example_checks() {
    for (name, _, src, _) in EXAMPLES {
        assert_eq!(check_report(src)["ok"], true, "{name}");
    }
}

#[test]
fn broken_source_reports_diagnostics() {
    let r = check_report("type A\ndef x : A := y\n");
    assert_eq!(r["ok"], false);
    assert!(!r["diagnostics"].as_array().unwrap().is_empty());
}

#[test]
fn square_derivative_in_cdc() {
    let (b, s, e) = example("cdc/square");
    let r = derive_report(s, "square", b, e);
    assert_eq!(r["derivative"], "2*x*v", "{r}");
}

#[test]
fn derive_without_backend_still_expands() {
    let (_, s, _) = example("cdc/square");
    let r = derive_report(s, "sq", "", "");
    assert_eq!(r["ok"], true);
    assert_eq!(r["expansion"], "Der sq");
    assert!(r.get("derivative").is_none());
    assert_eq!(derive_report(s, "dsq", "", "")["ok"], false);
}

#[test]
fn bag_evaluates_to_plus_four() {
    let (b, s, e) = example("change/bag");
    let r = evaluate_report(s, b, e);
    assert_eq!(r["ok"], true, "{r}");
    assert_eq!(r["results"][0]["value"], "+4");
}

#[test]
fn bad_environment_is_reported() {
    let (_, s, _) = example("change/bag");
    assert_eq!(evaluate_report(s, "change", "{not json")["ok"], false);
    assert_eq!(evaluate_report(s, "nope", "")["ok"], false);
}
