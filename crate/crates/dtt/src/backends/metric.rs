//! Pseudo-metric spaces with rescaling. A difference is a nonnegative real
//! bound, measured in the units of the underlying (scale-free) type.

use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde_json::{json, Value as Json};

use crate::error::EvalError;
use crate::semantics::env::{json_real, real_eq, render_real, Carriers, ConstSpec, EnvSpec, TypeSpec};
use crate::semantics::{dvalue_from_json, Backend, EvalResult, LeafRequest, Value};
use crate::subexp::forget_ty;
use crate::syntax::{Pred, RuleSet, Ty};

const TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Metric {
    pub env: EnvSpec,
    pub carriers: Carriers,
    tables: BTreeMap<String, Vec<Vec<f64>>>,
}

fn scale(r: &Rational64) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Metric {
    /// Builds the model, checking the pseudo-metric axioms on every finite
    /// distance table.
    pub fn new(env: EnvSpec) -> EvalResult<Self> {
        let mut tables = BTreeMap::new();
        for (name, t) in &env.types {
            if let TypeSpec::Finite(f) = t {
                let n = f.points.len();
                let table = match &f.dist {
                    Some(d) => d.clone(),
                    None => (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect(),
                };
                check_pms(name, &table)?;
                if table.len() != n {
                    return Err(EvalError::Other(format!("distance table of `{name}` has the wrong size")));
                }
                tables.insert(name.clone(), table);
            }
        }
        Ok(Metric { carriers: Carriers::new(env.types.clone()), env, tables })
    }

    fn base_dist(&self, n: &str, a: &Value, b: &Value) -> EvalResult<f64> {
        match self.carriers.base(n)? {
            TypeSpec::Finite(_) => {
                let t = &self.tables[n];
                let (i, j) = (a.as_point()?, b.as_point()?);
                t.get(i).and_then(|r| r.get(j)).copied().ok_or_else(|| EvalError::shape("point outside its carrier"))
            }
            TypeSpec::Bags { .. } => Err(EvalError::Unsupported { backend: "metric", what: "bag carriers".into() }),
            _ => Ok((a.as_real()? - b.as_real()?).abs()),
        }
    }

    /// Distance in the rescaled space: `!_s` multiplies, tensors and
    /// products add, function spaces take the sup over the sampled domain.
    pub fn dist(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<f64> {
        match ty {
            Ty::Base(n) => self.base_dist(n, a, b),
            Ty::Bang(s, t) => {
                let s = scale(s);
                if s == 0.0 {
                    return Ok(0.0);
                }
                Ok(s * self.dist(t, a, b)?)
            }
            Ty::Product(l, r) | Ty::Tensor(l, r) => {
                let ((a1, a2), (b1, b2)) = (a.as_pair()?, b.as_pair()?);
                Ok(self.dist(l, a1, b1)? + self.dist(r, a2, b2)?)
            }
            Ty::Arrow(d, c) | Ty::Lolli(d, c) => {
                let mut sup: f64 = 0.0;
                for p in self.carriers.points(d)? {
                    sup = sup.max(self.dist(c, &a.apply(p.clone())?, &b.apply(p)?)?);
                }
                Ok(sup)
            }
        }
    }

    /// Largest factor by which the rescaled distance can exceed the
    /// scale-free one.
    pub fn lip(ty: &Ty) -> f64 {
        match ty {
            Ty::Base(_) => 1.0,
            Ty::Bang(s, t) => scale(s) * Self::lip(t),
            Ty::Product(l, r) | Ty::Tensor(l, r) => Self::lip(l).max(Self::lip(r)),
            Ty::Arrow(_, c) | Ty::Lolli(_, c) => Self::lip(c),
        }
    }

    /// Smallest such factor.
    pub fn low(ty: &Ty) -> f64 {
        match ty {
            Ty::Base(_) => 1.0,
            Ty::Bang(s, t) => scale(s) * Self::low(t),
            Ty::Product(l, r) | Ty::Tensor(l, r) => Self::low(l).min(Self::low(r)),
            Ty::Arrow(_, c) | Ty::Lolli(_, c) => Self::low(c),
        }
    }

    /// `dist(f x, f y) <= dist(x, y)` at the declared (rescaled) domain, on
    /// all sampled pairs. Carriers too large to enumerate are skipped.
    pub fn check_lipschitz(&self, name: &str, ty: &Ty, f: &Value) -> EvalResult<usize> {
        let Some((dom, cod)) = ty.as_function() else { return Ok(0) };
        let Ok(pts) = self.carriers.points(dom) else { return Ok(0) };
        if pts.len() > 64 || cod.as_function().is_some() {
            return Ok(0);
        }
        let outs: Vec<Value> = pts.iter().map(|p| f.apply(p.clone())).collect::<EvalResult<_>>()?;
        let mut n = 0;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let (dx, dy) = (self.dist(dom, &pts[i], &pts[j])?, self.dist(cod, &outs[i], &outs[j])?);
                n += 1;
                if dy > dx + TOL * (1.0 + dx) {
                    return Err(EvalError::Unsound(format!(
                        "`{name}` is not nonexpansive: inputs at distance {dx} map to distance {dy}"
                    )));
                }
            }
        }
        Ok(n)
    }

    /// Pseudo-metric axioms of the composite space on its enumeration.
    pub fn check_space(&self, ty: &Ty) -> EvalResult<usize> {
        let pts = self.carriers.points(ty)?;
        let n = pts.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                d[i][j] = self.dist(ty, &pts[i], &pts[j])?;
            }
        }
        check_pms(&crate::pretty::ty(ty), &d)?;
        Ok(n * n * n)
    }
}

fn check_pms(name: &str, d: &[Vec<f64>]) -> EvalResult<()> {
    let n = d.len();
    let bad = |m: String| Err(EvalError::Other(format!("`{name}` is not a pseudo-metric: {m}")));
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return bad(format!("row {i} has length {}", row.len()));
        }
        if row[i] != 0.0 {
            return bad(format!("d({i},{i}) = {}", row[i]));
        }
        for j in 0..n {
            if d[i][j] < 0.0 || !real_eq(d[i][j], d[j][i]) {
                return bad(format!("d({i},{j}) is negative or asymmetric"));
            }
            for k in 0..n {
                if d[i][j] > d[i][k] + d[k][j] + TOL {
                    return bad(format!("triangle inequality fails at ({i},{k},{j})"));
                }
            }
        }
    }
    Ok(())
}

impl Backend for Metric {
    fn name(&self) -> &'static str {
        "metric"
    }

    fn monoidal(&self) -> bool {
        true
    }

    fn constant(&self, name: &str, ty: &Ty) -> EvalResult<Value> {
        let spec = self.env.consts.get(name);
        if let Some(ConstSpec::Table { .. } | ConstSpec::Poly { .. } | ConstSpec::Builtin { .. }) = spec {
            let v = self.carriers.constant(name, spec, ty)?;
            self.check_lipschitz(name, ty, &v)?;
            return Ok(v);
        }
        self.carriers.constant(name, spec, ty)
    }

    fn dconst(&self, name: &str, pred: &Pred) -> EvalResult<Value> {
        let j = self.env.dconsts.get(name).ok_or_else(|| EvalError::UnboundConst(name.to_string()))?;
        dvalue_from_json(pred, j, &|_, j| {
            json_real(j)
                .filter(|x| *x >= 0.0)
                .map(Value::Real)
                .ok_or_else(|| EvalError::Other(format!("`{name}`: a distance bound must be a nonnegative real")))
        })
    }

    fn refl(&self, _: &Ty, _: &Value) -> EvalResult<Value> {
        Ok(Value::Real(0.0))
    }

    fn closed_refl(&self, _: &Ty, _: &Value) -> EvalResult<Value> {
        Ok(Value::Real(0.0))
    }

    fn fill_leaf(&self, req: &LeafRequest<'_>) -> EvalResult<Value> {
        let c = req.c.as_real()?;
        let eps = req.diff.as_real()?;
        if eps == 0.0 {
            return Ok(Value::Real(c));
        }
        let l = Self::lip(req.carrier) / Self::low(req.z);
        Ok(Value::Real(c + l * eps))
    }

    fn holds(&self, ty: &Ty, t: &Value, u: &Value, d: &Value) -> EvalResult<bool> {
        let d = d.as_real()?;
        let dist = self.dist(&forget_ty(ty), t, u)?;
        Ok(d >= 0.0 && d + TOL * (1.0 + d.abs()) >= dist)
    }

    fn points(&self, ty: &Ty) -> EvalResult<Vec<Value>> {
        self.carriers.points(ty)
    }

    fn diffs(&self, ty: &Ty, x: &Value, y: &Value) -> EvalResult<Vec<Value>> {
        let d = self.dist(&forget_ty(ty), x, y)?;
        if d.is_infinite() {
            return Ok(vec![Value::Real(d)]);
        }
        Ok(vec![Value::Real(d), Value::Real(d + 0.5)])
    }

    fn value_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        self.carriers.eq(ty, a, b)
    }

    fn diff_eq(&self, _: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        Ok(real_eq(a.as_real()?, b.as_real()?))
    }

    fn render(&self, ty: &Ty, v: &Value) -> Json {
        self.carriers.render(ty, v)
    }

    fn render_diff(&self, _: &Ty, v: &Value) -> Json {
        v.as_real().map(render_real).unwrap_or_else(|e| json!(format!("error: {e}")))
    }

    fn sound_rules(&self) -> RuleSet {
        RuleSet { eta: true, betad: true, etad: true, dchain: true, ..RuleSet::default() }
    }
}

/// The averaging example with loop perforation of index 2, for `n + 1`
/// samples of an `r`-Lipschitz `f : !r Nat -o Real`. Returns the source and
/// its environment; the difference definition is `perf`.
pub fn perforation(n: usize, r: Rational64) -> (String, EnvSpec) {
    let m = 2 * (n / 2 + 1);
    let q = Rational64::new(1, n as i64 + 1);
    let real_m = nest(&vec!["Real".to_string(); m], " ** ");
    let idx = |i: usize| if i.is_multiple_of(2) { format!("{i}") } else { format!("(succ {})", i - 1) };
    let xs: Vec<String> = (0..m).map(|i| format!("f {}", idx(i))).collect();
    let ys: Vec<String> = (0..m).map(|i| format!("f {}", i - i % 2)).collect();
    let ds: Vec<String> = (0..m)
        .map(|i| {
            if i % 2 == 0 {
                format!("refl (f {i})")
            } else {
                let k = i - 1;
                format!("symm (f {k}) (f (succ {k})) (Der f {k} (succ {k}) (unit {k}))")
            }
        })
        .collect();
    let chain = tensor_chain(&xs, &ys, &ds);
    let (x, y) = (nest(&xs, ", "), nest(&ys, ", "));
    let src = format!(
        "calculus fuzz
type Nat
type Real
numerals Nat
const succ : Nat -o Nat
const f : !{r} Nat -o Real
const havg : !{q} {real_m} -o Real
dconst unit : Pi x : Nat. D[Nat](x, succ x)
def symm : Pi x y : Real. D[Real](x, y) -> D[Real](y, x) :=
  fun x y e => J[u v. D[Real](v, u)](x, y, e, [z] refl z)
def perf : D[Real](havg {x}, havg {y}) :=
  Der havg {x} {y}
    ({chain})
"
    );
    let env = json!({
        "types": {
            "Nat": {"kind": "naturals", "max": m + 1},
            "Real": {"kind": "real", "min": -4.0, "max": 4.0, "step": 0.5},
        },
        "consts": {
            "succ": {"kind": "builtin", "name": "succ"},
            "f": {"kind": "poly", "components": [[[r.to_string(), [1]]]]},
            "havg": {"kind": "builtin", "name": "scaled_sum", "scale": q.to_string()},
        },
        "dconsts": {"unit": 1},
    });
    (src, serde_json::from_value(env).expect("perforation environment"))
}

fn nest(items: &[String], sep: &str) -> String {
    match items {
        [] => String::new(),
        [x] => x.clone(),
        [x, rest @ ..] => format!("({x}{sep}{})", nest(rest, sep)),
    }
}

/// A difference between two right-nested tuples from componentwise
/// differences, by nested eliminations.
fn tensor_chain(xs: &[String], ys: &[String], ds: &[String]) -> String {
    if xs.len() == 1 {
        return ds[0].clone();
    }
    let ty = nest(&vec!["Real".to_string(); xs.len()], " ** ");
    let (xr, yr) = (nest(&xs[1..], ", "), nest(&ys[1..], ", "));
    let rest = tensor_chain(&xs[1..], &ys[1..], &ds[1..]);
    format!(
        "J[u v. D[{ty}]((u, {xr}), (v, {yr}))]({x0}, {y0}, {d0}, [z] J[u v. D[{ty}]((z, u), (z, v))]({xr}, {yr}, {rest}, [w] refl (z, w)))",
        x0 = xs[0],
        y0 = ys[0],
        d0 = ds[0],
    )
}
