use std::sync::Arc;

use dtt::backends::metric::{perforation, Metric};
use dtt::error::EvalError;
use dtt::semantics::{Backend, EnvSpec, Interp, Value};
use dtt::syntax::Ty;
use dtt::surface::elab::{check_source, DefBody, ElabOptions};
use num_rational::Rational64;

fn perf_value(n: usize, r: Rational64) -> f64 {
    let (src, env) = perforation(n, r);
    let m = check_source(&src, &ElabOptions::default());
    assert!(m.ok(), "{:?}", m.diagnostics);
    let interp = Interp::new(Arc::new(Metric::new(env).unwrap()), m.checker());
    interp.admits().unwrap();
    let DefBody::Difference { term, pred } = &m.def("perf").unwrap().body else { panic!() };
    let v = interp.eval_dterm(term).unwrap();
    assert!(interp.holds_pred(pred, &v).unwrap().ok());
    v.as_real().unwrap()
}

#[test]
fn perforation_nine_is_one_half() {
    assert_eq!(perf_value(9, Rational64::from_integer(1)), 0.5);
}

#[test]
fn perforation_closed_form() {
    for n in [1usize, 2, 6, 13, 20] {
        for r in [Rational64::new(1, 2), Rational64::from_integer(1), Rational64::from_integer(2)] {
            let want = (n / 2 + 1) as f64 / (n + 1) as f64 * (*r.numer() as f64 / *r.denom() as f64);
            let got = perf_value(n, r);
            assert!((got - want).abs() < 1e-9, "n={n} r={r}: {got} vs {want}");
        }
    }
}

#[test]
fn scaled_and_summed_distances() {
    let env = EnvSpec::from_json(r#"{"types": {"Real": {"kind": "real", "min": -4.0, "max": 4.0, "step": 0.5}}}"#).unwrap();
    let m = Metric::new(env).unwrap();
    let real = Ty::base("Real");
    let two = Ty::bang(Rational64::from_integer(2), real.clone());
    assert_eq!(m.dist(&two, &Value::Real(1.0), &Value::Real(3.0)).unwrap(), 4.0);
    let t = Ty::tensor(real.clone(), real.clone());
    let (a, b) = (Value::pair(Value::Real(0.0), Value::Real(1.0)), Value::pair(Value::Real(1.0), Value::Real(-1.0)));
    assert_eq!(m.dist(&t, &a, &b).unwrap(), 3.0);
}

#[test]
fn lipschitz_violation_is_unsound() {
    let env = EnvSpec::from_json(
        r#"{"types": {"Real": {"kind": "real", "min": -2.0, "max": 2.0, "step": 0.5}},
            "consts": {"g": {"kind": "poly", "components": [[["3", [1]]]]}}}"#,
    )
    .unwrap();
    let m = Metric::new(env).unwrap();
    let real = Ty::base("Real");
    let ok = Ty::lolli(Ty::bang(Rational64::from_integer(3), real.clone()), real.clone());
    assert!(m.constant("g", &ok).is_ok());
    assert!(matches!(m.constant("g", &Ty::lolli(real.clone(), real)), Err(EvalError::Unsound(_))));
}
