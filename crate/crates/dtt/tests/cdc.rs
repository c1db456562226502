use std::sync::Arc;

use dtt::backends::cdc::{render_derivative, AxiomInputs, Cdc};
use dtt::semantics::{EnvSpec, Interp};
use dtt::surface::elab::{check_source, DefBody, ElabOptions};
use dtt::syntax::Ty;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SRC: &str = "
type Real
const square : Real -> Real
const inc : Real -> Real
def dsq : Pi x y : Real. D[Real](x, y) -> D[Real](square x, square y) := Der square
def dcomp : Pi x y : Real. D[Real](x, y) -> D[Real](inc (square x), inc (square y)) := Der (fun (x : Real) => inc (square x))
def dchain : Pi x y : Real. D[Real](x, y) -> D[Real](inc (square x), inc (square y)) :=
  fun x y e => Der inc (square x) (square y) (Der square x y e)
";

const ENV: &str = r#"{
  "consts": {
    "square": {"kind": "poly", "components": [[["1", [2]]]]},
    "inc": {"kind": "poly", "components": [[["1", [1]], ["1", [0]]]]}
  }
}"#;

fn setup() -> (dtt::surface::elab::Module, Interp) {
    let m = check_source(SRC, &ElabOptions::default());
    assert!(m.ok(), "{:?}", m.diagnostics);
    let interp = Interp::new(Arc::new(Cdc::new(EnvSpec::from_json(ENV).unwrap())), m.checker());
    (m, interp)
}

fn der_of(m: &dtt::surface::elab::Module, interp: &Interp, name: &str) -> String {
    let DefBody::Difference { term, .. } = &m.def(name).unwrap().body else { panic!() };
    let v = interp.eval_dterm(term).unwrap();
    let real = Ty::base("Real");
    render_derivative(&real, &real, &v).unwrap()
}

#[test]
fn derivative_of_square() {
    let (m, interp) = setup();
    assert_eq!(der_of(&m, &interp, "dsq"), "2*x*v");
}

#[test]
fn chain_rule_agrees() {
    let (m, interp) = setup();
    assert_eq!(der_of(&m, &interp, "dcomp"), der_of(&m, &interp, "dchain"));
}

#[test]
fn axioms_on_random_arrows() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        AxiomInputs::random(&mut rng, 3, 3).check().unwrap();
    }
}
