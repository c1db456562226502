use std::sync::Arc;

use dtt::backends::change::Change;
use dtt::semantics::{Backend, EnvSpec, Index, Interp, LeafRequest, Value};
use dtt::syntax::Ty;
use dtt::surface::elab::{check_source, DefBody, ElabOptions, Module};

fn setup(src: &str, env: &str) -> (Module, Interp) {
    let m = check_source(src, &ElabOptions::default());
    assert!(m.ok(), "{:?}", m.diagnostics);
    let be = Change::new(EnvSpec::from_json(env).unwrap()).unwrap();
    let interp = Interp::new(Arc::new(be), m.checker());
    (m, interp)
}

fn diff_value(m: &Module, interp: &Interp, name: &str) -> Value {
    let DefBody::Difference { term, pred } = &m.def(name).unwrap().body else { panic!("{name} is not a difference") };
    let v = interp.eval_dterm(term).unwrap();
    let verdict = interp.holds_pred(pred, &v).unwrap();
    assert!(verdict.ok(), "{name}: {:?}", verdict.failures);
    v
}

const BAG_SRC: &str = "
type Bag type Int
const sum : Bag -> Int
const before : Bag
const after : Bag
dconst swap : D[Bag](before, after)
def dy : D[Int](sum before, sum after) := Der sum before after swap
";

const BAG_ENV: &str = r#"{
  "types": {"Bag": {"kind": "bags", "universe": 5, "max_size": 2}, "Int": {"kind": "integers", "min": -20, "max": 20}},
  "consts": {
    "sum": {"kind": "builtin", "name": "bag_sum"},
    "before": {"kind": "value", "value": [1, 2, 3, 4]},
    "after": {"kind": "value", "value": [2, 3, 4, 5]}
  },
  "dconsts": {"swap": {"remove": [1], "add": [5]}}
}"#;

#[test]
fn bag_sum_change_is_plus_four() {
    let (m, interp) = setup(BAG_SRC, BAG_ENV);
    assert_eq!(diff_value(&m, &interp, "dy").as_int().unwrap(), 4);
}

#[test]
fn three_part_filler() {
    let be = Change::new(EnvSpec::from_json(r#"{"types": {"Int": {"kind": "integers", "min": -9, "max": 9}}}"#).unwrap()).unwrap();
    let int = Ty::base("Int");
    let f: Index = Arc::new(|x: &Value, _: &Value| Ok(x.clone()));
    let g: Index = Arc::new(|_: &Value, y: &Value| Ok(Value::Int(y.as_int()? * y.as_int()?)));
    let (x, y, d) = (Value::Int(3), Value::Int(5), Value::Int(2));
    let c = Value::Int(3 * 3 - 3);
    let req = LeafRequest { carrier: &int, z: &int, x: &x, y: &y, diff: &d, c: &c, f: &f, g: &g };
    let j = be.fill_leaf(&req).unwrap();
    assert_eq!(j.as_int().unwrap(), 22);
    assert_eq!(be.oplus(&int, &x, &j).unwrap().as_int().unwrap(), 25);
}
