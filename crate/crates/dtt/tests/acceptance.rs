//! One PASS/FAIL line per acceptance criterion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Rational64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dtt::backends::cdc::{render_derivative, AxiomInputs, Cdc};
use dtt::backends::change::Change;
use dtt::backends::dlr::Dlr;
use dtt::backends::metric::{perforation, Metric};
use dtt::checker::Checker;
use dtt::error::RewriteError;
use dtt::semantics::{EnvSpec, Interp};
use dtt::subexp::{check_bang, forget_term, forget_ty, SensContext};
use dtt::suite::{discover, load_env, run_case, trivialization_detected, CaseKind, CaseReport, RunOptions, BACKENDS};
use dtt::surface::elab::{check_source, DefBody, ElabOptions, Module};
use dtt::syntax::{Context, RuleSet, Signature, Ty};

mod common;

type Check = Result<String, String>;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(name: &str) -> Result<Module, String> {
    let src = std::fs::read_to_string(corpus().join(name)).map_err(|e| format!("{name}: {e}"))?;
    Ok(check_source(&src, &ElabOptions::default()))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))
}

fn diff_body<'a>(m: &'a Module, name: &str) -> Result<&'a dtt::syntax::DTerm, String> {
    match m.def(name).map(|d| &d.body) {
        Some(DefBody::Difference { term, .. }) => Ok(term),
        _ => Err(format!("no difference definition `{name}`")),
    }
}

fn typing() -> Check {
    let start = Instant::now();
    let m = load("prelude.dtt")?;
    ensure(m.ok(), || format!("prelude rejected: {:?}", m.diagnostics))?;
    for name in ["der", "e1", "e2", "c1", "c2", "symm", "dist"] {
        ensure(m.def(name).is_some(), || format!("prelude lacks `{name}`"))?;
    }
    let src = std::fs::read_to_string(corpus().join("mutants.dtt")).map_err(|e| e.to_string())?;
    let defs: Vec<&str> = src.lines().filter_map(|l| l.strip_prefix("def ")).filter_map(|l| l.split_whitespace().next()).collect();
    let mutants = check_source(&src, &ElabOptions::default());
    let rejected = mutants.statuses.iter().filter(|s| !s.ok && defs.contains(&s.name.as_str())).count();
    ensure(defs.len() == 20 && rejected == 20, || format!("{rejected} of {} mutants rejected", defs.len()))?;
    ensure(mutants.statuses.iter().filter(|s| s.ok).all(|s| !defs.contains(&s.name.as_str())), || "a mutant was accepted".into())?;
    within(start, Duration::from_secs(5))?;
    Ok(format!("7 combinators accepted, 20/20 mutants rejected in {:.2?}", start.elapsed()))
}

fn equational() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let sig = common::plain_signature();
    let ctx = Context::new();
    let betad = RuleSet::parse("betad").unwrap();
    let etad = RuleSet::parse("etad").unwrap();
    for i in 0..50 {
        let (_, lhs, rhs) = common::beta_d_instance(&mut rng);
        let checker = Checker::new(sig.clone()).with_rules(betad);
        let (p, q) = (checker.infer_diff(&ctx, &lhs).map_err(|e| format!("beta instance {i}: {e}"))?, checker.infer_diff(&ctx, &rhs).map_err(|e| e.to_string())?);
        ensure(checker.pred_eq(&p, &q).unwrap_or(false), || format!("beta instance {i}: types differ"))?;
        ensure(checker.rewriter().equal_dterm(&ctx, &lhs, &rhs).map_err(|e| e.to_string())?, || format!("beta instance {i} fails"))?;

        let (pred, lhs, rhs) = common::eta_d_instance(&mut rng);
        let mut s = sig.clone();
        s.dconsts.insert("a".into(), pred);
        let checker = Checker::new(s).with_rules(etad);
        checker.infer_diff(&ctx, &lhs).map_err(|e| format!("eta instance {i}: {e}"))?;
        ensure(checker.rewriter().equal_dterm(&ctx, &lhs, &rhs).map_err(|e| e.to_string())?, || format!("eta instance {i} fails"))?;
    }

    let m = load("prelude.dtt")?;
    let (chain, comp) = (diff_body(&m, "chain")?, diff_body(&m, "comp")?);
    let plain = m.checker().with_rules(RuleSet::standard());
    let folding = m.checker().with_rules(RuleSet::standard().union(&RuleSet::parse("dchain").unwrap()));
    ensure(!plain.rewriter().equal_dterm(&ctx, chain, comp).map_err(|e| e.to_string())?, || "chain and comp agree without dchain".into())?;
    ensure(folding.rewriter().equal_dterm(&ctx, chain, comp).map_err(|e| e.to_string())?, || "dchain does not fold the nested derivative".into())?;

    ensure(!trivialization_detected(RuleSet::parse("all").unwrap()), || "detector fires without the flag".into())?;
    ensure(trivialization_detected(RuleSet::parse("jeta-plus").unwrap()), || "detector silent with the flag".into())?;

    let every = RuleSet::parse("all").unwrap();
    let rw = m.checker().with_rules(every).with_fuel(10_000);
    for d in &m.defs {
        let res = match &d.body {
            DefBody::Difference { term, .. } => rw.rewriter().normalize(&ctx, term).map(|_| ()),
            DefBody::Program { term, .. } => rw.rewriter().normalize_term(term).map(|_| ()),
        };
        if let Err(e @ RewriteError::FuelExhausted { .. }) = res {
            return Err(format!("{}: {e}", d.name));
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("50 betaD + 50 etaD instances, dchain folds, detector gated, in {:.2?}", start.elapsed()))
}

fn subexponential() -> Check {
    let fuzz = load("fuzz_examples.dtt")?;
    ensure(fuzz.ok(), || format!("fuzz examples rejected: {:?}", fuzz.diagnostics))?;
    let m = check_source(
        "calculus fuzz type A
         def twice : !2 (A -o A) -o A -o A := fun h a => h (h a)
         def linear : (A -o A) -o A -o A := fun h a => h (h a)",
        &ElabOptions::default(),
    );
    let ok = |n: &str| m.statuses.iter().find(|s| s.name == n).map(|s| s.ok);
    ensure(ok("twice") == Some(true) && ok("linear") == Some(false), || format!("{:?}", m.statuses))?;

    let sig = common::bang_signature();
    let plain = Signature { consts: sig.consts.iter().map(|(k, t)| (k.clone(), forget_ty(t))).collect::<BTreeMap<_, _>>(), ..sig.clone() };
    let checker = Checker::new(plain);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut kept, mut tries) = (0, 0);
    while kept < 100 && tries < 20_000 {
        tries += 1;
        let ty = common::random_bang_ty(&mut rng, 3);
        let t = common::random_bang_term(&mut rng, &mut Vec::new(), &ty, 3);
        if check_bang(&sig, &SensContext::new(), &t, &ty).is_err() {
            continue;
        }
        kept += 1;
        let ft = forget_term(&sig, &[], &t).map_err(|e| e.to_string())?;
        let got = checker.infer_program(&Context::new(), &ft).map_err(|e| format!("forgotten term ill-typed: {e}"))?;
        ensure(checker.ty_eq(&got, &forget_ty(&ty)), || format!("forget changes the type of a term at {}", dtt::pretty::ty(&ty)))?;
    }
    ensure(kept == 100, || format!("only {kept} graded terms generated"))?;
    Ok(format!("twice gated by !2, forget preserves typing on {kept} terms"))
}

fn reports_for<'a>(reports: &'a [CaseReport], backend: &str) -> Vec<&'a CaseReport> {
    reports.iter().filter(|r| r.backend.as_deref() == Some(backend)).collect()
}

fn soundness_of(reports: &[CaseReport], backend: &str) -> Result<usize, String> {
    let mut n = 0;
    for r in reports_for(reports, backend) {
        ensure(r.error.is_none(), || format!("{}: {}", r.name, r.error.clone().unwrap_or_default()))?;
        for o in &r.soundness {
            ensure(o.ok, || format!("{}::{}: {}", r.name, o.name, o.message.clone().unwrap_or_default()))?;
            n += 1;
        }
    }
    ensure(n > 0, || format!("no {backend} judgements"))?;
    Ok(n)
}

fn metric(reports: &[CaseReport]) -> Check {
    let value = |n: usize, r: Rational64| -> Result<f64, String> {
        let (src, env) = perforation(n, r);
        let m = check_source(&src, &ElabOptions::default());
        ensure(m.ok(), || format!("perforation source rejected: {:?}", m.diagnostics))?;
        let interp = Interp::new(Arc::new(Metric::new(env).map_err(|e| e.to_string())?), m.checker());
        interp.admits().map_err(|e| e.to_string())?;
        interp.eval_dterm(diff_body(&m, "perf")?).and_then(|v| v.as_real()).map_err(|e| e.to_string())
    };
    let nine = value(9, Rational64::from_integer(1))?;
    ensure(nine == 0.5, || format!("N=9, r=1 gives {nine}"))?;
    for n in 0..=20usize {
        for r in [Rational64::new(1, 2), Rational64::from_integer(1), Rational64::from_integer(2)] {
            let want = (n / 2 + 1) as f64 / (n + 1) as f64 * (*r.numer() as f64 / *r.denom() as f64);
            let got = value(n, r)?;
            ensure((got - want).abs() <= 1e-9, || format!("N={n}, r={r}: {got} vs {want}"))?;
        }
    }
    let n = soundness_of(reports, "metric")?;
    Ok(format!("N=9 gives 0.5, 63 closed forms match, {n} judgements sound"))
}

fn dlr() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for round in 0..200 {
        common::dlr_filler_round(&mut rng).map_err(|e| format!("round {round}: {e}"))?;
    }
    let src = "type Real const sq : Real -> Real const a : Real const b : Real
               dconst e : D[Real](a, b)
               def d : D[Real](sq a, sq b) := Der sq a b e";
    let m = check_source(src, &ElabOptions::default());
    ensure(m.ok(), || format!("{:?}", m.diagnostics))?;
    let step = 0.05;
    let mut worst: f64 = 0.0;
    for x in [0.0, 0.5, 1.0, 2.0] {
        for eps in [0.1, 0.5, 1.0] {
            let env = serde_json::json!({
                "types": {"Real": {"kind": "real", "min": -4.0, "max": 4.0, "step": step}},
                "consts": {
                    "sq": {"kind": "poly", "components": [[["1", [2]]]]},
                    "a": {"kind": "value", "value": x},
                    "b": {"kind": "value", "value": x + eps},
                },
                "dconsts": {"e": eps},
            });
            let be = Dlr::new(EnvSpec::from_json(&env.to_string()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let interp = Interp::new(Arc::new(be), m.checker());
            let got = interp.eval_dterm(diff_body(&m, "d")?).and_then(|v| v.as_real()).map_err(|e| e.to_string())?;
            let want = 2.0 * f64::abs(x) * eps + eps * eps;
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 2.0 * step, || format!("x={x}, eps={eps}: {got} vs {want}"))?;
        }
    }
    Ok(format!("200/200 random DLRs match the oracle, x^2 within {worst:.2e} of 2|x|e+e^2"))
}

fn change(reports: &[CaseReport]) -> Check {
    let bag = reports.iter().find(|r| r.name == "change/bag").ok_or("no change/bag case")?;
    let dy = bag.soundness.iter().find(|o| o.name == "dy").ok_or("no `dy` in change/bag")?;
    ensure(dy.value == serde_json::json!("+4"), || format!("bag example gives {}", dy.value))?;
    let n = soundness_of(reports, "change")?;
    let mut axioms = 0;
    for case in discover(&corpus()).map_err(|e| e.to_string())? {
        let CaseKind::Backend { backend, env } = &case.kind else { continue };
        if backend != "change" {
            continue;
        }
        let spec = load_env(env).map_err(|e| e.to_string())?;
        let names: Vec<String> = spec.types.keys().cloned().collect();
        let be = Change::new(spec).map_err(|e| e.to_string())?;
        for t in names {
            axioms += be.check_axioms(&Ty::base(&t)).map_err(|e| format!("{}: {t}: {e}", case.name))?;
        }
    }
    Ok(format!("bag gives +4, {n} judgements satisfy t + a = u, {axioms} axiom instances hold"))
}

fn cdc() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut identities = 0;
    for i in 0..100 {
        identities += AxiomInputs::random(&mut rng, 3, 3).check().map_err(|e| format!("arrow {i}: {e:?}"))?;
    }
    let src = std::fs::read_to_string(corpus().join("cdc/square.dtt")).map_err(|e| e.to_string())?;
    let m = check_source(&src, &ElabOptions::default());
    ensure(m.ok(), || format!("{:?}", m.diagnostics))?;
    let env = load_env(&corpus().join("cdc/square.json")).map_err(|e| e.to_string())?;
    let interp = Interp::new(Arc::new(Cdc::new(env)), m.checker());
    let real = Ty::base("Real");
    let der = |name: &str| -> Result<String, String> {
        let v = interp.eval_dterm(diff_body(&m, name)?).map_err(|e| e.to_string())?;
        render_derivative(&real, &real, &v).map_err(|e| e.to_string())
    };
    let did = der("did")?;
    ensure(did == "v", || format!("the derivative of id is {did}"))?;
    let (chain, comp) = (der("chain")?, der("comp")?);
    ensure(chain == comp, || format!("chain {chain} vs composite {comp}"))?;
    let folded = m.checker().with_rules(RuleSet::parse("eta,betad,etad,dchain").unwrap()).rewriter().normalize(&Context::new(), diff_body(&m, "chain")?).map_err(|e| e.to_string())?;
    let v = interp.eval_dterm(&folded).map_err(|e| e.to_string())?;
    let folded = render_derivative(&real, &real, &v).map_err(|e| e.to_string())?;
    ensure(folded == comp, || format!("folded chain {folded} vs {comp}"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!("{identities} identities on 100 arrows, d(id) = {did}, Dchain = D5 = {comp}, in {:.2?}", start.elapsed()))
}

fn factorization(reports: &[CaseReport]) -> Check {
    let mut counts = Vec::new();
    for b in BACKENDS {
        let mut n = 0;
        for r in reports_for(reports, b) {
            for o in &r.factorization {
                ensure(o.ok, || format!("{}::{}: {}", r.name, o.name, o.message.clone().unwrap_or_default()))?;
                n += 1;
            }
        }
        ensure(n > 0, || format!("no {b} arrows"))?;
        counts.push(format!("{b} {n}"));
    }
    Ok(format!("p.i = f with the closed form: {}", counts.join(", ")))
}

fn rewriting(reports: &[CaseReport]) -> Check {
    let mut counts = Vec::new();
    for b in BACKENDS {
        let mut n = 0;
        for r in reports_for(reports, b) {
            for o in &r.rewriting {
                ensure(o.ok, || format!("{}::{}: {}", r.name, o.name, o.message.clone().unwrap_or_default()))?;
                n += 1;
            }
        }
        ensure(n >= 100, || format!("only {n} pairs for {b}"))?;
        counts.push(format!("{b} {n}"));
    }
    Ok(format!("normalize-then-eval = eval: {}", counts.join(", ")))
}

fn backend_reports() -> Vec<CaseReport> {
    let cases = match discover(&corpus()) {
        Ok(c) => c,
        Err(e) => {
            println!("corpus unavailable: {e}");
            return Vec::new();
        }
    };
    let per_backend = |b: &str| cases.iter().filter(|c| matches!(&c.kind, CaseKind::Backend { backend, .. } if backend == b)).count().max(1);
    cases
        .iter()
        .filter_map(|c| match &c.kind {
            CaseKind::Backend { backend, .. } => {
                let opts = RunOptions { samples: 64, pairs: 100usize.div_ceil(per_backend(backend)), ..RunOptions::default() };
                Some(run_case(c, &opts))
            }
            CaseKind::Typing { .. } => None,
        })
        .collect()
}

fn main() {
    let reports = backend_reports();
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("typing corpus", Box::new(typing)),
        ("equational suite", Box::new(equational)),
        ("sub-exponential", Box::new(subexponential)),
        ("metric backend", Box::new(|| metric(&reports))),
        ("dlr backend", Box::new(dlr)),
        ("change backend", Box::new(|| change(&reports))),
        ("cdc backend", Box::new(cdc)),
        ("factorization", Box::new(|| factorization(&reports))),
        ("rewriting soundness", Box::new(|| rewriting(&reports))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
