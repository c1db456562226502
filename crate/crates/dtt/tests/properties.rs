use std::path::PathBuf;
use std::sync::Arc;

use num_rational::Rational64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dtt::backends::change::Change;
use dtt::backends::dlr::Dlr;
use dtt::backends::metric::Metric;
use dtt::checker::Checker;
use dtt::rewrite::{Rewriter, Strategy as Order};
use dtt::semantics::{Backend, EnvSpec, Interp, Value};
use dtt::subexp::{check_bang, ctx_add, ctx_scale, Sens, SensContext};
use dtt::suite::{rule_subsets, trivialization_detected};
use dtt::surface::parser::{parse, parse_expr};
use dtt::surface::{delab, Printer};
use dtt::syntax::{lam, Context, RuleSet, Ty};

mod common;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn a() -> Ty {
    Ty::base("A")
}

fn sens() -> impl Strategy<Value = Sens> {
    prop_oneof![(0i64..6, 1i64..4).prop_map(|(n, d)| Sens::Fin(Rational64::new(n, d))), Just(Sens::Inf)]
}

fn sens_ctx() -> impl Strategy<Value = SensContext> {
    proptest::collection::vec(proptest::option::of(sens()), 3).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .fold(SensContext::new(), |c, (i, s)| match s {
                Some(s) => c.with(["x", "y", "z"][i], a(), s),
                None => c,
            })
    })
}

const INT_ENV: &str = r#"{
  "types": {"A": {"kind": "integers", "min": -3, "max": 3}},
  "consts": {
    "c0": {"kind": "value", "value": 1},
    "c1": {"kind": "value", "value": -2},
    "s": {"kind": "poly", "components": [[["1", [1]], ["1", [0]]]]},
    "m": {"kind": "poly", "components": [[["1", [1, 1]], ["-1", [0, 1]]]]}
  }
}"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifting_then_substituting_is_identity(seed in any::<u64>()) {
        let t = common::random_plain(&mut rng(seed), 2, 4);
        let u = common::random_plain(&mut rng(seed ^ 1), 0, 2);
        prop_assert_eq!(t.shift(1, 0).subst(0, &u), t);
    }

    #[test]
    fn printing_then_parsing_is_identity(seed in any::<u64>()) {
        let t = lam(a(), lam(a(), common::random_plain(&mut rng(seed), 2, 4)));
        let e = delab::term(&Context::new(), &t);
        let printed = Printer.expr(&e);
        prop_assert_eq!(parse_expr(&printed).unwrap(), e, "{}", printed);
    }

    #[test]
    fn context_addition_laws(x in sens_ctx(), y in sens_ctx(), z in sens_ctx(), s in sens()) {
        let xy = ctx_add(&x, &y).unwrap();
        prop_assert!(xy.same_entries(&ctx_add(&y, &x).unwrap()));
        let l = ctx_add(&xy, &z).unwrap();
        let r = ctx_add(&x, &ctx_add(&y, &z).unwrap()).unwrap();
        prop_assert!(l.same_entries(&r));
        let d1 = ctx_scale(s, &xy);
        let d2 = ctx_add(&ctx_scale(s, &x), &ctx_scale(s, &y)).unwrap();
        prop_assert!(d1.same_entries(&d2));
    }

    #[test]
    fn weakening_preserves_graded_typing(seed in any::<u64>(), s in sens()) {
        let mut g = rng(seed);
        let sig = common::bang_signature();
        let ty = common::random_bang_ty(&mut g, 3);
        let t = common::random_bang_term(&mut g, &mut Vec::new(), &ty, 3);
        if check_bang(&sig, &SensContext::new(), &t, &ty).is_ok() {
            let ctx = SensContext::new().with("unused", Ty::base("A"), s);
            prop_assert!(check_bang(&sig, &ctx, &t, &ty).is_ok());
        }
    }

    #[test]
    fn rewriting_preserves_predicates(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (_, j, _) = common::beta_d_instance(&mut g);
        let checker = Checker::new(common::plain_signature()).with_rules(RuleSet::parse("eta,betad,etad,dchain,jw").unwrap());
        let ctx = Context::new();
        let p = checker.infer_diff(&ctx, &j).unwrap();
        let rw = checker.rewriter();
        let mut cur = j;
        while let Some((next, _)) = rw.step(&ctx, &cur) {
            let q = checker.infer_diff(&ctx, &next).unwrap();
            prop_assert!(checker.pred_eq(&p, &q).unwrap());
            cur = next;
        }
    }

    #[test]
    fn strategies_agree(seed in any::<u64>()) {
        let (_, j, _) = common::beta_d_instance(&mut rng(seed));
        let rules = RuleSet::parse("betad").unwrap();
        let ctx = Context::new();
        let outer = Rewriter::new(rules).normalize(&ctx, &j).unwrap();
        let inner = Rewriter::new(rules).with_strategy(Order::Innermost).normalize(&ctx, &j).unwrap();
        prop_assert_eq!(&outer, &inner);
        prop_assert_eq!(Rewriter::new(rules).normalize(&ctx, &j).unwrap(), outer);
    }

    #[test]
    fn beta_is_sound_on_integers(seed in any::<u64>()) {
        let t = common::random_plain(&mut rng(seed), 0, 4);
        let checker = Checker::new(common::plain_signature());
        let n = checker.rewriter().normalize_term(&t).unwrap();
        let interp = Interp::new(Arc::new(Change::new(EnvSpec::from_json(INT_ENV).unwrap()).unwrap()), checker);
        prop_assert_eq!(interp.eval_term(&t).unwrap().as_int().unwrap(), interp.eval_term(&n).unwrap().as_int().unwrap());
    }

    #[test]
    fn metric_tensor_distance_is_a_sum(x in -4i32..4, y in -4i32..4, u in -4i32..4, v in -4i32..4) {
        let env = EnvSpec::from_json(r#"{"types": {"Real": {"kind": "real", "min": -4.0, "max": 4.0, "step": 1.0}}}"#).unwrap();
        let m = Metric::new(env).unwrap();
        let r = Ty::base("Real");
        let t = Ty::tensor(r.clone(), r.clone());
        let p = Value::pair(Value::Real(x as f64), Value::Real(y as f64));
        let q = Value::pair(Value::Real(u as f64), Value::Real(v as f64));
        let sum = m.dist(&r, &p.fst().unwrap(), &q.fst().unwrap()).unwrap() + m.dist(&r, &p.snd().unwrap(), &q.snd().unwrap()).unwrap();
        prop_assert_eq!(m.dist(&t, &p, &q).unwrap(), sum);
        prop_assert_eq!(m.refl(&t, &p).unwrap().as_real().unwrap(), 0.0);
    }

    #[test]
    fn dlr_self_difference_is_self_distance(seed in any::<u64>()) {
        let d = common::RandDlr::new(&mut rng(seed));
        let env = serde_json::json!({"types": {"X": d.spec("x")}});
        let be = Dlr::new_unchecked(EnvSpec::from_json(&env.to_string()).unwrap()).unwrap();
        let x = Ty::base("X");
        prop_assume!(be.finite("X").unwrap().attains_meets().is_ok());
        for p in 0..d.points {
            let v = Value::Point(p);
            let refl = be.refl(&x, &v).unwrap().as_point().unwrap();
            prop_assert_eq!(refl, d.index(d.dist(p, p)));
            prop_assert!(be.diff_eq(&x, &be.refl(&x, &v).unwrap(), &be.closed_refl(&x, &v).unwrap()).unwrap());
        }
    }
}

#[test]
fn forbidden_rule_is_not_derivable_from_supported_rules() {
    let every = RuleSet { fext1: false, ..RuleSet::parse("all,fext2").unwrap() };
    let with_fext1 = RuleSet { fext2: false, fext1: true, ..every };
    for rules in rule_subsets(every).into_iter().chain(rule_subsets(with_fext1)) {
        assert!(!trivialization_detected(rules), "{:?}", rules.names());
    }
}

#[test]
fn exponential_cross_conditions_on_finite_dlrs() {
    let env = EnvSpec::from_json(
        r#"{"types": {"B": {"kind": "finite", "points": ["t", "f"]}},
            "consts": {"not": {"kind": "table", "map": {"t": "f", "f": "t"}}, "id": {"kind": "builtin", "name": "id"}}}"#,
    )
    .unwrap();
    let be = Dlr::new(env).unwrap();
    let bb = Ty::arrow(Ty::base("B"), Ty::base("B"));
    let fs: Vec<Value> = be.points(&bb).unwrap();
    assert_eq!(fs.len(), 4);
    for f in &fs {
        for g in &fs {
            let d = be.dist(&bb, f, g).unwrap();
            assert!(be.rel(&bb, f, &d, g).unwrap());
            assert!(be.rel(&bb, g, &d, f).unwrap());
        }
        let df = be.refl(&bb, f).unwrap();
        assert!(be.rel(&bb, f, &df, f).unwrap());
    }
}

#[test]
fn change_nil_is_neutral_and_function_changes_apply_pointwise() {
    let env = EnvSpec::from_json(r#"{"types": {"N": {"kind": "integers", "min": -2, "max": 2}}}"#).unwrap();
    let ch = Change::new(env).unwrap();
    let n = Ty::base("N");
    let nn = Ty::arrow(n.clone(), n.clone());
    for x in -2..=2 {
        let v = Value::Int(x);
        let z = ch.nil(&n, &v).unwrap();
        assert!(ch.value_eq(&n, &ch.oplus(&n, &v, &z).unwrap(), &v).unwrap());
    }
    let f = Value::fun(|x| Ok(Value::Int(x.as_int()? * 2)));
    let g = Value::fun(|x| Ok(Value::Int(x.as_int()? + 1)));
    let phi = ch.ominus(&nn, &g, &f).unwrap();
    let h = ch.oplus(&nn, &f, &phi).unwrap();
    for x in -2..=2 {
        assert_eq!(h.apply(Value::Int(x)).unwrap().as_int().unwrap(), x + 1);
        let dx = Value::Int(1);
        let want = (x + 1 + 1) - 2 * x;
        assert_eq!(phi.apply(Value::Int(x)).unwrap().apply(dx).unwrap().as_int().unwrap(), want);
    }
}

#[test]
fn golden_corpus_reprints_to_the_same_syntax() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut files = vec![dir.join("prelude.dtt"), dir.join("mutants.dtt"), dir.join("fuzz_examples.dtt")];
    for b in ["metric", "dlr", "change", "cdc"] {
        for e in std::fs::read_dir(dir.join(b)).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "dtt") {
                files.push(p);
            }
        }
    }
    for f in files {
        let src = std::fs::read_to_string(&f).unwrap();
        let once = parse(&src).unwrap();
        let printed = dtt::surface::print::print_file(&once);
        let twice = parse(&printed).unwrap();
        let decls = |s: &dtt::surface::SourceFile| s.decls().cloned().collect::<Vec<_>>();
        assert_eq!(decls(&once), decls(&twice), "{}", f.display());
        let squash = |s: &str| s.split_whitespace().collect::<String>();
        assert_eq!(squash(&printed), squash(&dtt::surface::print::print_file(&twice)));
    }
}
