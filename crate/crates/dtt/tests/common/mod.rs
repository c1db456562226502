#![allow(dead_code)]
//! Generators and brute-force oracles shared by the integration tests.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use dtt::syntax::{app, cnst, diff, lam, var, DTerm, Motive, Pred, Signature, Term, Ty};

/// A random closure system over `{0, 1, 2}`, ordered by inclusion.
fn closure_system(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut sets: BTreeSet<u8> = BTreeSet::from([0b111]);
    for _ in 0..rng.gen_range(0..6) {
        let s = rng.gen_range(0..8u8);
        let mut next = sets.clone();
        next.insert(s);
        loop {
            let pairs: Vec<u8> = next.iter().flat_map(|a| next.iter().map(move |b| a & b)).collect();
            let before = next.len();
            next.extend(pairs);
            if next.len() == before {
                break;
            }
        }
        if next.len() <= 8 {
            sets = next;
        }
    }
    sets.into_iter().collect()
}

fn subset(a: u8, b: u8) -> bool {
    a & !b == 0
}

pub struct RandDlr {
    pub points: usize,
    pub sets: Vec<u8>,
    pub rho: Vec<(usize, usize, usize)>,
}

impl RandDlr {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let points = rng.gen_range(1..=5);
        let sets = closure_system(rng);
        let rho = (0..rng.gen_range(0..12)).map(|_| (rng.gen_range(0..points), rng.gen_range(0..sets.len()), rng.gen_range(0..points))).collect();
        RandDlr { points, sets, rho }
    }

    pub fn spec(&self, tag: &str) -> serde_json::Value {
        let name = |i: usize| format!("s{}", self.sets[i]);
        let mut covers = Vec::new();
        for (i, &a) in self.sets.iter().enumerate() {
            for (j, &b) in self.sets.iter().enumerate() {
                let between = self.sets.iter().any(|&c| c != a && c != b && subset(a, c) && subset(c, b));
                if a != b && subset(a, b) && !between {
                    covers.push([name(i), name(j)]);
                }
            }
        }
        json!({
            "kind": "finite",
            "points": (0..self.points).map(|p| format!("{tag}{p}")).collect::<Vec<_>>(),
            "lattice": {"elements": (0..self.sets.len()).map(name).collect::<Vec<_>>(), "covers": covers},
            "rho": self.rho.iter().map(|&(x, l, y)| [format!("{tag}{x}"), name(l), format!("{tag}{y}")]).collect::<Vec<_>>(),
        })
    }

    pub fn related(&self, x: usize, e: usize, y: usize) -> bool {
        self.rho.iter().any(|&(a, l, b)| a == x && b == y && subset(self.sets[l], self.sets[e]))
    }

    /// Intersection of every related set; the full set when none is.
    pub fn dist(&self, x: usize, y: usize) -> u8 {
        (0..self.sets.len()).filter(|&l| self.related(x, l, y)).fold(0b111, |acc, l| acc & self.sets[l])
    }

    /// Least member of the system containing both.
    pub fn join(&self, a: u8, b: u8) -> u8 {
        self.sets.iter().filter(|&&s| subset(a | b, s)).fold(0b111, |acc, s| acc & s)
    }

    pub fn index(&self, s: u8) -> usize {
        self.sets.iter().position(|&t| t == s).unwrap()
    }
}

/// One random filler request on two random finite DLRs, against the
/// brute-force join over related points.
pub fn dlr_filler_round(rng: &mut ChaCha8Rng) -> Result<(), String> {
    use std::sync::Arc;

    use dtt::backends::dlr::Dlr;
    use dtt::semantics::{Backend, EnvSpec, Index, LeafRequest, Value};

    let (xs, zs) = (RandDlr::new(rng), RandDlr::new(rng));
    let env = json!({"types": {"X": xs.spec("x"), "Z": zs.spec("z")}});
    let be = Dlr::new_unchecked(EnvSpec::from_json(&env.to_string()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let ftab: Vec<Vec<usize>> = (0..xs.points).map(|_| (0..xs.points).map(|_| rng.gen_range(0..zs.points)).collect()).collect();
    let gtab: Vec<Vec<usize>> = (0..xs.points).map(|_| (0..xs.points).map(|_| rng.gen_range(0..zs.points)).collect()).collect();
    let (x, y, e, c) = (rng.gen_range(0..xs.points), rng.gen_range(0..xs.points), rng.gen_range(0..xs.sets.len()), rng.gen_range(0..zs.sets.len()));

    let mut expect = zs.sets[c];
    for w in 0..xs.points {
        if xs.related(x, e, w) {
            expect = zs.join(expect, zs.dist(ftab[x][w], gtab[x][w]));
        }
    }

    let (ft, gt) = (ftab.clone(), gtab.clone());
    let f: Index = Arc::new(move |a: &Value, b: &Value| Ok(Value::Point(ft[a.as_point()?][b.as_point()?])));
    let g: Index = Arc::new(move |a: &Value, b: &Value| Ok(Value::Point(gt[a.as_point()?][b.as_point()?])));
    let (tx, tz) = (Ty::base("X"), Ty::base("Z"));
    let (xv, yv, ev, cv) = (Value::Point(x), Value::Point(y), Value::Point(e), Value::Point(c));
    let req = LeafRequest { carrier: &tx, z: &tz, x: &xv, y: &yv, diff: &ev, c: &cv, f: &f, g: &g };
    let got = be.fill_leaf(&req).map_err(|e| e.to_string())?.as_point().map_err(|e| e.to_string())?;
    if got == zs.index(expect) {
        Ok(())
    } else {
        Err(format!("filler gave element {got}, brute force {}", zs.index(expect)))
    }
}

fn a() -> Ty {
    Ty::base("A")
}

/// Signature for generated graded terms.
pub fn bang_signature() -> Signature {
    let mut consts = BTreeMap::new();
    consts.insert("c".to_string(), a());
    consts.insert("h".to_string(), Ty::lolli(Ty::bang(2.into(), a()), a()));
    consts.insert("k".to_string(), Ty::lolli(Ty::tensor(a(), a()), a()));
    consts.insert("boxed".to_string(), Ty::bang(3.into(), a()));
    Signature { base_types: vec!["A".into()], consts, ..Signature::default() }
}

pub fn random_bang_ty(rng: &mut ChaCha8Rng, depth: usize) -> Ty {
    if depth == 0 {
        return a();
    }
    match rng.gen_range(0..5) {
        0 | 1 => a(),
        2 => Ty::lolli(random_bang_ty(rng, depth - 1), random_bang_ty(rng, depth - 1)),
        3 => Ty::tensor(random_bang_ty(rng, depth - 1), random_bang_ty(rng, depth - 1)),
        _ => Ty::bang(rng.gen_range(1..4i64).into(), random_bang_ty(rng, depth - 1)),
    }
}

/// A term of type `ty` over the variables of `env` (innermost last).
/// Usage is not tracked; callers filter with the graded checker.
pub fn random_bang_term(rng: &mut ChaCha8Rng, env: &mut Vec<Ty>, ty: &Ty, depth: usize) -> Term {
    match ty {
        Ty::Lolli(d, b) => {
            env.push(dtt::subexp::binder_grade(d).0);
            let body = random_bang_term(rng, env, b, depth);
            env.pop();
            lam(d.as_ref().clone(), body)
        }
        Ty::Tensor(l, r) => Term::Tensor(Box::new(random_bang_term(rng, env, l, depth)), Box::new(random_bang_term(rng, env, r, depth))),
        Ty::Bang(_, t) => Term::Bang(Box::new(random_bang_term(rng, env, t, depth))),
        _ => {
            let vars: Vec<usize> = (0..env.len()).filter(|&i| env[env.len() - 1 - i] == *ty).collect();
            let choice = if depth == 0 { rng.gen_range(0..2) } else { rng.gen_range(0..6) };
            match choice {
                0 if !vars.is_empty() => var(vars[rng.gen_range(0..vars.len())]),
                0 | 1 => cnst("c"),
                2 => app(cnst("h"), random_bang_term(rng, env, &a(), depth - 1)),
                3 => app(cnst("k"), Term::Tensor(Box::new(random_bang_term(rng, env, &a(), depth - 1)), Box::new(random_bang_term(rng, env, &a(), depth - 1)))),
                4 => {
                    env.push(a());
                    let body = random_bang_term(rng, env, ty, depth - 1);
                    env.pop();
                    Term::LetBang(Box::new(cnst("boxed")), Box::new(body))
                }
                _ => {
                    let pair = Term::Tensor(Box::new(random_bang_term(rng, env, &a(), depth - 1)), Box::new(cnst("c")));
                    env.push(a());
                    env.push(a());
                    let body = random_bang_term(rng, env, ty, depth - 1);
                    env.pop();
                    env.pop();
                    Term::LetTensor(Box::new(pair), Box::new(body))
                }
            }
        }
    }
}

/// Signature for generated plain terms: two points, a unary and a binary
/// function.
pub fn plain_signature() -> Signature {
    let mut consts = BTreeMap::new();
    consts.insert("c0".to_string(), a());
    consts.insert("c1".to_string(), a());
    consts.insert("s".to_string(), Ty::arrow(a(), a()));
    consts.insert("m".to_string(), Ty::arrow(a(), Ty::arrow(a(), a())));
    Signature { base_types: vec!["A".into()], consts, ..Signature::default() }
}

/// A plain term of type `A` with variables `0..vars`.
pub fn random_plain(rng: &mut ChaCha8Rng, vars: usize, depth: usize) -> Term {
    let leaf = |rng: &mut ChaCha8Rng| {
        let k = rng.gen_range(0..2 + vars);
        if k < vars {
            var(k)
        } else if k == vars {
            cnst("c0")
        } else {
            cnst("c1")
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..4) {
        0 => leaf(rng),
        1 => app(cnst("s"), random_plain(rng, vars, depth - 1)),
        2 => app(app(cnst("m"), random_plain(rng, vars, depth - 1)), random_plain(rng, vars, depth - 1)),
        _ => app(lam(a(), random_plain(rng, vars + 1, depth - 1)), random_plain(rng, vars, depth - 1)),
    }
}

/// The motive `x y. D_A(f x, f y)` for a body `f` over one variable.
pub fn der_motive(body: &Term) -> Motive {
    let f = lam(a(), body.clone());
    Motive { carrier: a(), body: diff(a(), app(f.clone(), var(1)), app(f, var(0))) }
}

/// `(J[x y. D(f x, f y)](t, t, ∂t, [z] ∂(f z)), ∂(f t))`.
pub fn beta_d_instance(rng: &mut ChaCha8Rng) -> (Term, DTerm, DTerm) {
    let body = random_plain(rng, 1, 3);
    let t = random_plain(rng, 0, 3);
    let f = lam(a(), body.clone());
    let lhs = DTerm::j(der_motive(&body), t.clone(), t.clone(), DTerm::Refl(t.clone()), DTerm::Refl(app(f.clone(), var(0))));
    (t.clone(), lhs, DTerm::Refl(app(f, t)))
}

/// `(J[x y. D(x, y)](t, u, a, [z] ∂z), a)` with `a : D_A(t, u)` a constant.
pub fn eta_d_instance(rng: &mut ChaCha8Rng) -> (Pred, DTerm, DTerm) {
    let (t, u) = (random_plain(rng, 0, 3), random_plain(rng, 0, 3));
    let d = DTerm::Const("a".into());
    let m = Motive { carrier: a(), body: diff(a(), var(1), var(0)) };
    (diff(a(), t.clone(), u.clone()), DTerm::j(m, t, u, d.clone(), DTerm::Refl(var(0))), d)
}
