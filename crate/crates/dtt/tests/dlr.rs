use std::sync::Arc;

use rand::SeedableRng;

mod common;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use dtt::backends::dlr::Dlr;
use dtt::semantics::{Backend, EnvSpec, Interp, Value};
use dtt::surface::elab::{check_source, DefBody, ElabOptions};
use dtt::syntax::Ty;

#[test]
fn filler_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for round in 0..200 {
        if let Err(e) = common::dlr_filler_round(&mut rng) {
            panic!("round {round}: {e}");
        }
    }
}

const SQ_SRC: &str = "
type Real
const sq : Real -> Real
const a : Real
const b : Real
dconst e : D[Real](a, b)
def d : D[Real](sq a, sq b) := Der sq a b e
";

fn sq_env(x: f64, eps: f64) -> EnvSpec {
    let env = json!({
        "types": {"Real": {"kind": "real", "min": -4.0, "max": 4.0, "step": 0.05}},
        "consts": {
            "sq": {"kind": "poly", "components": [[["1", [2]]]]},
            "a": {"kind": "value", "value": x},
            "b": {"kind": "value", "value": x + eps},
        },
        "dconsts": {"e": eps},
    });
    EnvSpec::from_json(&env.to_string()).unwrap()
}

#[test]
fn square_derivative_bound() {
    let m = check_source(SQ_SRC, &ElabOptions::default());
    assert!(m.ok(), "{:?}", m.diagnostics);
    let DefBody::Difference { term, pred } = &m.def("d").unwrap().body else { panic!() };
    let real = Ty::base("Real");
    let arrow = Ty::Arrow(Box::new(real.clone()), Box::new(real.clone()));
    for x in [0.0, 0.5, 1.0, 2.0] {
        for eps in [0.1, 0.5, 1.0] {
            let be = Dlr::new(sq_env(x, eps)).unwrap();
            let interp = Interp::new(Arc::new(be.clone()), m.checker());
            let v = interp.eval_dterm(term).unwrap();
            assert!(interp.holds_pred(pred, &v).unwrap().ok());
            let got = v.as_real().unwrap();
            let want = 2.0 * x * eps + eps * eps;
            assert!((got - want).abs() <= 2.0 * 0.05, "x={x} eps={eps}: {got} vs {want}");

            let sq = be.constant("sq", &arrow).unwrap();
            let dsq = be.refl(&arrow, &sq).unwrap();
            let direct = dsq.apply3(Value::Real(x), Value::Real(x + eps), Value::Real(eps)).unwrap();
            assert!((direct.as_real().unwrap() - got).abs() < 1e-9);
        }
    }
}

#[test]
fn euclidean_distance() {
    let be = Dlr::new(sq_env(0.0, 0.1)).unwrap();
    let d = be.dist(&Ty::base("Real"), &Value::Real(3.0), &Value::Real(5.0)).unwrap();
    assert_eq!(d.as_real().unwrap(), 2.0);
}

#[test]
fn unseparated_relation_is_rejected() {
    let env = json!({"types": {"B": {
        "kind": "finite", "points": ["t", "f"],
        "lattice": {"elements": ["lo", "hi"], "covers": [["lo", "hi"]]},
        "rho": [["t", "lo", "t"], ["f", "lo", "f"], ["t", "lo", "f"]],
    }}});
    assert!(Dlr::new(EnvSpec::from_json(&env.to_string()).unwrap()).is_err());
}

#[test]
fn discrete_default_is_complete_and_eta_holds() {
    let env = json!({"types": {"B": {"kind": "finite", "points": ["t", "f"]}}});
    let be = Dlr::new(EnvSpec::from_json(&env.to_string()).unwrap()).unwrap();
    assert!(be.complete());
    assert!(be.sound_rules().etad);
    assert!(be.eta_counterexample(&Ty::base("B")).unwrap().is_none());
}

#[test]
fn incomplete_relation_has_eta_counterexample() {
    let env = json!({"types": {"B": {
        "kind": "finite", "points": ["t", "f"],
        "lattice": {"elements": ["lo", "mid", "hi"], "covers": [["lo", "mid"], ["mid", "hi"]]},
        "rho": [["t", "lo", "t"], ["f", "lo", "f"], ["t", "hi", "f"], ["f", "hi", "t"]],
    }}});
    let be = Dlr::new(EnvSpec::from_json(&env.to_string()).unwrap()).unwrap();
    assert!(!be.complete());
    assert!(!be.sound_rules().etad);
    assert!(be.eta_counterexample(&Ty::base("B")).unwrap().is_some());
}
