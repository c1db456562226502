//! Browser bindings: check a source, derive a function, evaluate a module.
//! Every export takes and returns JSON text.

use serde_json::{json, Value as Json};
use wasm_bindgen::prelude::*;

use dtt::semantics::{EnvSpec, Interp};
use dtt::suite;
use dtt::surface::elab::{check_source, ElabOptions, Module};

const SAMPLES: usize = 24;
const SEED: u64 = 42;

/// Bundled examples: name, backend, source, environment.
pub const EXAMPLES: [(&str, &str, &str, &str); 4] = [
    ("cdc/square", "cdc", include_str!("../../../corpus/cdc/square.dtt"), include_str!("../../../corpus/cdc/square.json")),
    ("dlr/distance", "dlr", include_str!("../../../corpus/dlr/distance.dtt"), include_str!("../../../corpus/dlr/distance.json")),
    ("metric/lipschitz", "metric", include_str!("../../../corpus/metric/lipschitz.dtt"), include_str!("../../../corpus/metric/lipschitz.json")),
    ("change/bag", "change", include_str!("../../../corpus/change/bag.dtt"), include_str!("../../../corpus/change/bag.json")),
];

fn failure(message: impl ToString) -> Json {
    json!({"ok": false, "error": message.to_string()})
}

fn checked(source: &str) -> Result<Module, Json> {
    let m = check_source(source, &ElabOptions::default());
    if m.ok() {
        Ok(m)
    } else {
        Err(json!({"ok": false, "error": "the source does not type-check", "diagnostics": m.diagnostics}))
    }
}

fn interp(m: &Module, backend: &str, env: &str) -> Result<Interp, Json> {
    let env = if env.trim().is_empty() { EnvSpec::default() } else { EnvSpec::from_json(env).map_err(failure)? };
    let be = suite::backend(backend, env).map_err(failure)?;
    let i = Interp::new(be, m.checker()).with_samples(SAMPLES, SEED);
    i.admits().map_err(failure)?;
    Ok(i)
}

pub fn check_report(source: &str) -> Json {
    let m = check_source(source, &ElabOptions::default());
    json!({"ok": m.ok(), "declarations": m.statuses, "diagnostics": m.diagnostics})
}

pub fn derive_report(source: &str, name: &str, backend: &str, env: &str) -> Json {
    let run = || -> Result<Json, Json> {
        let m = checked(source)?;
        let i = if backend.is_empty() { None } else { Some(interp(&m, backend, env)?) };
        let d = suite::derive(&m, name.trim(), i.as_ref()).map_err(failure)?;
        let mut j = serde_json::to_value(d).map_err(failure)?;
        j["ok"] = json!(true);
        Ok(j)
    };
    run().unwrap_or_else(|e| e)
}

pub fn evaluate_report(source: &str, backend: &str, env: &str) -> Json {
    let run = || -> Result<Json, Json> {
        let m = checked(source)?;
        let i = interp(&m, backend, env)?;
        let results = suite::evaluate(&m, &i);
        Ok(json!({"ok": results.iter().all(|o| o.ok), "backend": backend, "results": results}))
    };
    run().unwrap_or_else(|e| e)
}

#[wasm_bindgen]
pub fn examples() -> String {
    let v: Vec<Json> = EXAMPLES.iter().map(|(n, b, s, e)| json!({"name": n, "backend": b, "source": s, "env": e})).collect();
    Json::Array(v).to_string()
}

#[wasm_bindgen]
pub fn check(source: &str) -> String {
    check_report(source).to_string()
}

#[wasm_bindgen]
pub fn derive(source: &str, name: &str, backend: &str, env: &str) -> String {
    derive_report(source, name, backend, env).to_string()
}

#[wasm_bindgen]
pub fn evaluate(source: &str, backend: &str, env: &str) -> String {
    evaluate_report(source, backend, env).to_string()
}
