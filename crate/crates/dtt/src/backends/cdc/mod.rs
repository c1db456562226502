//! Cartesian differential categories over polynomial maps with rational
//! coefficients. Every base type is read as the real line; values are
//! symbolic polynomials, so equalities are exact identities.

pub mod poly;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde_json::{json, Value as Json};

use crate::error::EvalError;
use crate::semantics::env::{curry, spine, ConstSpec, EnvSpec, NaryFn};
use crate::semantics::{dvalue_from_json, Backend, EvalResult, LeafRequest, Value};
use crate::syntax::{is_numeral, Pred, RuleSet, Ty};
use poly::{fresh_var, parse_rat, rat, Mono, Poly, PolyArrow, Var};

#[derive(Clone, Debug, Default)]
pub struct Cdc {
    pub env: EnvSpec,
}

impl Cdc {
    pub fn new(env: EnvSpec) -> Self {
        Cdc { env }
    }

    /// The arrow a first-order constant denotes.
    pub fn arrow(&self, name: &str) -> Option<PolyArrow> {
        let spec = self.env.consts.get(name)?;
        let comps = spec.polys()?;
        let dom = comps.iter().flat_map(|p| p.vars()).map(|v| v as usize + 1).max().unwrap_or(0);
        Some(PolyArrow::new(dom, comps))
    }
}

fn leaves(v: &Value, out: &mut Vec<Poly>) -> EvalResult<()> {
    match v {
        Value::Pair(a, b) => {
            leaves(a, out)?;
            leaves(b, out)
        }
        other => {
            out.push(other.as_poly()?.clone());
            Ok(())
        }
    }
}

fn unflatten(ty: &Ty, it: &mut impl Iterator<Item = Poly>) -> EvalResult<Value> {
    match ty.unbang() {
        Ty::Product(a, b) | Ty::Tensor(a, b) => Ok(Value::pair(unflatten(a, it)?, unflatten(b, it)?)),
        Ty::Base(_) => it.next().map(Value::Poly).ok_or_else(|| EvalError::shape("too few polynomial components")),
        _ => Err(EvalError::Unsupported { backend: "cdc", what: "polynomial constants with higher-order results".into() }),
    }
}

/// Maps every polynomial leaf of a value, lazily under functions.
fn map_polys(v: &Value, f: Arc<dyn Fn(&Poly) -> Poly + Send + Sync>) -> EvalResult<Value> {
    match v {
        Value::Poly(p) => Ok(Value::Poly(f(p))),
        Value::Pair(a, b) => Ok(Value::pair(map_polys(a, f.clone())?, map_polys(b, f)?)),
        Value::Fun(_) => {
            let g = v.clone();
            Ok(Value::fun(move |a| map_polys(&g.apply(a)?, f.clone())))
        }
        other => Err(EvalError::shape(format!("expected a polynomial value, found {}", other.kind()))),
    }
}

type PolyOp = Arc<dyn Fn(&Poly, &Poly) -> Poly + Send + Sync>;

fn zip_polys(a: &Value, b: &Value, f: PolyOp) -> EvalResult<Value> {
    match (a, b) {
        (Value::Poly(p), Value::Poly(q)) => Ok(Value::Poly(f(p, q))),
        (Value::Pair(a1, a2), Value::Pair(b1, b2)) => Ok(Value::pair(zip_polys(a1, b1, f.clone())?, zip_polys(a2, b2, f)?)),
        (Value::Fun(_), Value::Fun(_)) => {
            let (a, b) = (a.clone(), b.clone());
            Ok(Value::fun(move |x| zip_polys(&a.apply(x.clone())?, &b.apply(x)?, f.clone())))
        }
        _ => Err(EvalError::shape(format!("mismatched tangent shapes {} and {}", a.kind(), b.kind()))),
    }
}

/// The zero tangent of a type.
pub fn zero(ty: &Ty) -> Value {
    match ty {
        Ty::Base(_) => Value::Poly(Poly::zero()),
        Ty::Bang(_, a) => zero(a),
        Ty::Product(a, b) | Ty::Tensor(a, b) => Value::pair(zero(a), zero(b)),
        Ty::Arrow(_, b) | Ty::Lolli(_, b) => {
            let b = (**b).clone();
            Value::fun(move |_| Ok(zero(&b)))
        }
    }
}

/// A symbolic point of a type, built from fresh variables.
pub fn symbolic(ty: &Ty) -> Value {
    match ty {
        Ty::Base(_) => Value::Poly(Poly::var(fresh_var())),
        Ty::Bang(_, a) => symbolic(a),
        Ty::Product(a, b) | Ty::Tensor(a, b) => Value::pair(symbolic(a), symbolic(b)),
        Ty::Arrow(_, b) | Ty::Lolli(_, b) => {
            let (k, w) = (symbolic(b), fresh_var());
            Value::fun(move |a| {
                let mut ls = Vec::new();
                leaves(&a, &mut ls)?;
                let s = ls.iter().fold(Poly::zero(), |acc, p| acc.add(p));
                let s = s.mul(&Poly::var(w));
                map_polys(&k, Arc::new(move |p| p.add(&s).add(&s.mul(&s))))
            })
        }
    }
}

fn shape_ok(ty: &Ty, v: &Value) -> bool {
    match (ty, v) {
        (Ty::Bang(_, a), v) => shape_ok(a, v),
        (Ty::Base(_), Value::Poly(_)) => true,
        (Ty::Product(a, b) | Ty::Tensor(a, b), Value::Pair(x, y)) => shape_ok(a, x) && shape_ok(b, y),
        (Ty::Arrow(..) | Ty::Lolli(..), Value::Fun(_)) => true,
        _ => false,
    }
}

fn sym_eq(ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
    match ty {
        Ty::Bang(_, t) => sym_eq(t, a, b),
        Ty::Base(_) => Ok(a.as_poly()? == b.as_poly()?),
        Ty::Product(l, r) | Ty::Tensor(l, r) => Ok(sym_eq(l, &a.fst()?, &b.fst()?)? && sym_eq(r, &a.snd()?, &b.snd()?)?),
        Ty::Arrow(d, c) | Ty::Lolli(d, c) => {
            let p = symbolic(d);
            sym_eq(c, &a.apply(p.clone())?, &b.apply(p)?)
        }
    }
}

fn render_value(ty: &Ty, v: &Value, names: &dyn Fn(Var) -> String) -> Json {
    match (ty, v) {
        (Ty::Bang(_, a), v) => render_value(a, v, names),
        (_, Value::Poly(p)) => json!(p.render(names)),
        (Ty::Product(a, b) | Ty::Tensor(a, b), Value::Pair(x, y)) => json!([render_value(a, x, names), render_value(b, y, names)]),
        (Ty::Arrow(d, c) | Ty::Lolli(d, c), Value::Fun(_)) => {
            let arg = symbolic(d);
            let mut ls = Vec::new();
            if leaves(&arg, &mut ls).is_err() {
                return json!("<function>");
            }
            match v.apply(arg) {
                Ok(r) => json!({"fun": ls.iter().map(|p| p.render(names)).collect::<Vec<_>>(), "body": render_value(c, &r, names)}),
                Err(e) => json!(format!("error: {e}")),
            }
        }
        _ => json!("<value>"),
    }
}

impl Backend for Cdc {
    fn name(&self) -> &'static str {
        "cdc"
    }

    fn constant(&self, name: &str, ty: &Ty) -> EvalResult<Value> {
        let spec = self.env.consts.get(name);
        let Some(spec) = spec else {
            if is_numeral(name) {
                let r = parse_rat(name).ok_or_else(|| EvalError::Other(format!("bad numeral {name}")))?;
                return Ok(Value::Poly(Poly::constant(r)));
            }
            return Err(EvalError::UnboundConst(name.to_string()));
        };
        let (args, res) = spine(ty);
        match spec {
            ConstSpec::Poly { .. } => {
                let comps = spec.polys().ok_or_else(|| EvalError::Other(format!("bad polynomial for `{name}`")))?;
                let f: NaryFn = Arc::new(move |xs: &[Value]| {
                    let mut ls = Vec::new();
                    for x in xs {
                        leaves(x, &mut ls)?;
                    }
                    let map: BTreeMap<Var, Poly> = ls.into_iter().enumerate().map(|(i, p)| (i as Var, p)).collect();
                    let mut it = comps.iter().map(|p| p.subst(&map));
                    unflatten(&res, &mut it)
                });
                curry(args.len(), f)
            }
            ConstSpec::Value { value } => {
                let r = match value {
                    Json::String(s) => parse_rat(s),
                    Json::Number(n) => parse_rat(&n.to_string()),
                    _ => None,
                };
                r.map(|r| Value::Poly(Poly::constant(r))).ok_or_else(|| EvalError::Other(format!("`{name}`: expected a rational literal")))
            }
            ConstSpec::Builtin { name: b, .. } if b == "id" => Ok(Value::fun(Ok)),
            _ => Err(EvalError::Unsupported { backend: "cdc", what: format!("constant `{name}`: only polynomial arrows") }),
        }
    }

    fn dconst(&self, name: &str, pred: &Pred) -> EvalResult<Value> {
        let j = self.env.dconsts.get(name).ok_or_else(|| EvalError::UnboundConst(name.to_string()))?;
        dvalue_from_json(pred, j, &|_, j| {
            let r = match j {
                Json::String(s) => parse_rat(s),
                Json::Number(n) => parse_rat(&n.to_string()),
                _ => None,
            };
            r.map(|r| Value::Poly(Poly::constant(r))).ok_or_else(|| EvalError::Other(format!("`{name}`: expected a rational tangent")))
        })
    }

    fn refl(&self, ty: &Ty, _: &Value) -> EvalResult<Value> {
        Ok(zero(ty))
    }

    fn closed_refl(&self, ty: &Ty, _: &Value) -> EvalResult<Value> {
        Ok(zero(ty))
    }

    /// `c(x) + d/dδ f(x + δv, x + δv)` at `δ = 0`.
    fn fill_leaf(&self, req: &LeafRequest<'_>) -> EvalResult<Value> {
        let delta = fresh_var();
        let dp = Poly::var(delta);
        let moved = zip_polys(req.x, req.diff, Arc::new(move |x, v| x.add(&v.mul(&dp))))?;
        let image = (req.f)(&moved, &moved)?;
        let tangent = map_polys(&image, Arc::new(move |p| p.linear_coeff(delta)))?;
        zip_polys(req.c, &tangent, Arc::new(|a, b| a.add(b)))
    }

    fn holds(&self, ty: &Ty, _: &Value, _: &Value, d: &Value) -> EvalResult<bool> {
        Ok(shape_ok(ty, d))
    }

    fn points(&self, ty: &Ty) -> EvalResult<Vec<Value>> {
        Ok(vec![symbolic(ty)])
    }

    fn diffs(&self, ty: &Ty, _: &Value, _: &Value) -> EvalResult<Vec<Value>> {
        Ok(vec![symbolic(ty)])
    }

    fn value_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        sym_eq(ty, a, b)
    }

    fn diff_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        sym_eq(ty, a, b)
    }

    fn render(&self, ty: &Ty, v: &Value) -> Json {
        render_value(ty, v, &poly::default_name)
    }

    fn render_diff(&self, ty: &Ty, v: &Value) -> Json {
        render_value(ty, v, &poly::default_name)
    }

    fn sound_rules(&self) -> RuleSet {
        RuleSet { eta: true, betad: true, etad: true, dchain: true, cext: true, fext1: true, ..RuleSet::default() }
    }
}

/// Renders a first-order derivative `Der f x y v` with the variables named
/// `x`, `y`, `v` (suffixed by component for products).
pub fn render_derivative(dom: &Ty, cod: &Ty, der: &Value) -> EvalResult<String> {
    let mut names: BTreeMap<Var, String> = BTreeMap::new();
    let mut next: Var = 0;
    let mut named = |base: &str, ty: &Ty| -> EvalResult<Value> {
        let n = count_leaves(ty);
        let mut it = (0..n).map(|i| {
            let v = next;
            next += 1;
            names.insert(v, if n == 1 { base.to_string() } else { format!("{base}{}", i + 1) });
            Poly::var(v)
        });
        unflatten(ty, &mut it)
    };
    let (x, y, v) = (named("x", dom)?, named("y", dom)?, named("v", dom)?);
    let out = der.apply3(x, y, v)?;
    let r = render_value(cod, &out, &|v| names.get(&v).cloned().unwrap_or_else(|| poly::default_name(v)));
    Ok(match r {
        Json::String(s) => s,
        other => other.to_string(),
    })
}

fn count_leaves(ty: &Ty) -> usize {
    match ty.unbang() {
        Ty::Product(a, b) | Ty::Tensor(a, b) => count_leaves(a) + count_leaves(b),
        _ => 1,
    }
}

// ---------------------------------------------------------------------------
// axioms

/// A random arrow `R^dom -> R^cod` of bounded degree with small integer
/// coefficients.
pub fn random_arrow(rng: &mut impl Rng, dom: usize, cod: usize, max_deg: u32) -> PolyArrow {
    let comps = (0..cod)
        .map(|_| {
            let terms = rng.gen_range(0..=4);
            Poly::from_terms((0..terms).map(|_| {
                let mut exps = vec![0u32; dom];
                let mut budget = rng.gen_range(0..=max_deg);
                while budget > 0 && dom > 0 {
                    exps[rng.gen_range(0..dom)] += 1;
                    budget -= 1;
                }
                (Mono::from_exps(&exps), rat(rng.gen_range(-3..=3)))
            }))
        })
        .collect();
    PolyArrow::new(dom, comps)
}

/// One failed axiom instance.
#[derive(Clone, Debug, PartialEq)]
pub struct AxiomFailure {
    pub axiom: &'static str,
    pub lhs: String,
    pub rhs: String,
}

fn same(axiom: &'static str, l: PolyArrow, r: PolyArrow) -> Result<(), AxiomFailure> {
    if l == r {
        Ok(())
    } else {
        Err(AxiomFailure { axiom, lhs: format!("{:?}", l.comps), rhs: format!("{:?}", r.comps) })
    }
}

/// Checks D1-D7 and D-curry on `f, g : R^n -> R^m`, `h : R^m -> R^q`, and
/// `u, v, w : R^p -> R^n`, with `n = a + b` split for D3 and D-curry.
pub struct AxiomInputs {
    pub f: PolyArrow,
    pub g: PolyArrow,
    pub h: PolyArrow,
    pub u: PolyArrow,
    pub v: PolyArrow,
    pub w: PolyArrow,
    pub split: usize,
}

impl AxiomInputs {
    pub fn random(rng: &mut impl Rng, max_dim: usize, max_deg: u32) -> Self {
        let n = rng.gen_range(1..=max_dim);
        let m = rng.gen_range(1..=max_dim);
        let q = rng.gen_range(1..=max_dim);
        let p = rng.gen_range(1..=max_dim);
        AxiomInputs {
            f: random_arrow(rng, n, m, max_deg),
            g: random_arrow(rng, n, m, max_deg),
            h: random_arrow(rng, m, q, max_deg),
            u: random_arrow(rng, p, n, max_deg),
            v: random_arrow(rng, p, n, max_deg),
            w: random_arrow(rng, p, n, max_deg),
            split: rng.gen_range(0..=n),
        }
    }

    pub fn check(&self) -> Result<usize, AxiomFailure> {
        let AxiomInputs { f, g, h, u, v, w, split } = self;
        let (n, m, p) = (f.dom, f.cod(), u.dom);
        let df = f.derive();
        // D1
        same("D1", f.add(g).derive(), df.add(&g.derive()))?;
        same("D1", PolyArrow::zero(n, m).derive(), PolyArrow::zero(2 * n, m))?;
        // D2
        same("D2", df.compose(&u.add(v).pair(w)), df.compose(&u.pair(w)).add(&df.compose(&v.pair(w))))?;
        same("D2", df.compose(&PolyArrow::zero(p, n).pair(w)), PolyArrow::zero(p, m))?;
        // D3
        same("D3", PolyArrow::id(n).derive(), PolyArrow::proj(2 * n, 0, n))?;
        let (a, b) = (*split, n - split);
        same("D3", PolyArrow::proj(n, 0, a).derive(), PolyArrow::proj(2 * n, 0, a))?;
        same("D3", PolyArrow::proj(n, a, b).derive(), PolyArrow::proj(2 * n, a, b))?;
        // D4
        same("D4", f.pair(g).derive(), df.pair(&g.derive()))?;
        // D5
        let pi2 = PolyArrow::proj(2 * n, n, n);
        same("D5", h.compose(f).derive(), h.derive().compose(&df.pair(&f.compose(&pi2))))?;
        // D6
        let ddf = df.derive();
        let zero = PolyArrow::zero(p, n);
        same("D6", ddf.compose(&u.pair(&zero).pair(&v.pair(w))), df.compose(&u.pair(w)))?;
        // D7
        same("D7", ddf.compose(&zero.pair(v).pair(&u.pair(w))), ddf.compose(&zero.pair(u).pair(&v.pair(w))))?;
        // D-curry
        same_curry(f, a)?;
        Ok(13)
    }
}

/// `∂(λf) = λ(∂f ∘ ⟨π₁ × 0, π₂ × id⟩)` for `f : R^a × R^b -> R^m`: the
/// curried arrow keeps the last `b` inputs as parameters.
fn same_curry(f: &PolyArrow, a: usize) -> Result<(), AxiomFailure> {
    let b = f.dom - a;
    let params: Vec<Poly> = (0..b).map(|_| Poly::var(fresh_var())).collect();
    let inputs: Vec<Poly> = (0..a).map(|i| Poly::var(i as Var)).chain(params.iter().cloned()).collect();
    let curried = f.compose(&PolyArrow::new(a, inputs));
    let lhs = curried.derive();
    let mut arg: Vec<Poly> = (0..a).map(|i| Poly::var(i as Var)).collect();
    arg.extend((0..b).map(|_| Poly::zero()));
    arg.extend((0..a).map(|i| Poly::var((a + i) as Var)));
    arg.extend(params.iter().cloned());
    let rhs = f.derive().compose(&PolyArrow::new(2 * a, arg));
    same("D-curry", lhs, rhs)
}
