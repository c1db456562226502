//! Environment files: base carriers, constants and difference constants.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::value::{Bag, EvalResult, Value};
use crate::backends::cdc::poly::{parse_rat, Mono, Poly};
use crate::error::{EnvError, EvalError};
use crate::syntax::{is_numeral, Ty};
use num_traits::ToPrimitive;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnvSpec {
    #[serde(default)]
    pub types: BTreeMap<String, TypeSpec>,
    #[serde(default)]
    pub consts: BTreeMap<String, ConstSpec>,
    #[serde(default)]
    pub dconsts: BTreeMap<String, Json>,
}

impl EnvSpec {
    pub fn from_json(s: &str) -> Result<Self, EnvError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypeSpec {
    /// The real line, sampled on a grid.
    #[serde(alias = "euclidean")]
    Real { min: f64, max: f64, step: f64 },
    Naturals { max: u64 },
    Integers { min: i64, max: i64 },
    Finite(FiniteSpec),
    /// Bags over `0..=universe` with at most `max_size` elements.
    Bags { universe: u64, max_size: u64 },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FiniteSpec {
    pub points: Vec<String>,
    /// Metric backend: distance table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<f64>>>,
    /// Discrete metric when no table is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    /// DLR backend: triples `[x, l, y]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<[String; 3]>>,
    /// Change backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changes: Option<ChangeTableSpec>,
}

/// A finite lattice given by its Hasse diagram: `[a, b]` means `b` covers `a`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub elements: Vec<String>,
    pub covers: Vec<[String; 2]>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ChangeTableSpec {
    pub names: Vec<String>,
    /// `[x, dx, x ⊕ dx]`.
    pub oplus: Vec<[String; 3]>,
    /// `[y, x, y ⊖ x]`.
    pub ominus: Vec<[String; 3]>,
    #[serde(default)]
    pub unique: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstSpec {
    /// Output components, each a list of `[coefficient, exponents]`; the
    /// variables are the flattened arguments.
    Poly { components: Vec<Vec<(String, Vec<u32>)>> },
    /// Keys are the comma-joined argument keys.
    Table { map: BTreeMap<String, Json> },
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<String>,
    },
    Value { value: Json },
}

impl ConstSpec {
    pub fn polys(&self) -> Option<Vec<Poly>> {
        let ConstSpec::Poly { components } = self else { return None };
        components
            .iter()
            .map(|c| {
                c.iter()
                    .map(|(k, e)| parse_rat(k).map(|r| (Mono::from_exps(e), r)))
                    .collect::<Option<Vec<_>>>()
                    .map(Poly::from_terms)
            })
            .collect()
    }
}

/// Argument types and final result type of a (curried) function type.
pub fn spine(ty: &Ty) -> (Vec<Ty>, Ty) {
    let mut args = Vec::new();
    let mut cur = ty.clone();
    while let Some((a, b)) = cur.unbang().as_function() {
        args.push(a.clone());
        let b = b.clone();
        cur = b;
    }
    (args, cur)
}

pub type NaryFn = Arc<dyn Fn(&[Value]) -> EvalResult<Value> + Send + Sync>;

/// Curries an n-ary function.
pub fn curry(n: usize, f: NaryFn) -> EvalResult<Value> {
    fn go(left: usize, acc: Vec<Value>, f: NaryFn) -> EvalResult<Value> {
        if left == 0 {
            return f(&acc);
        }
        Ok(Value::fun(move |a| {
            let mut acc = acc.clone();
            acc.push(a);
            go(left - 1, acc, f.clone())
        }))
    }
    go(n, Vec::new(), f)
}

pub fn rational_f64(s: &str) -> EvalResult<f64> {
    parse_rat(s)
        .and_then(|r| r.to_f64())
        .ok_or_else(|| EvalError::Other(format!("not a number: `{s}`")))
}

/// Base carriers of the numeric backends.
#[derive(Clone, Debug)]
pub struct Carriers {
    pub types: BTreeMap<String, TypeSpec>,
    /// Largest enumeration accepted for products and function spaces.
    pub limit: usize,
}

pub const REAL_TOL: f64 = 1e-9;

impl Carriers {
    pub fn new(types: BTreeMap<String, TypeSpec>) -> Self {
        Carriers { types, limit: 4096 }
    }

    pub fn base(&self, n: &str) -> EvalResult<&TypeSpec> {
        self.types.get(n).ok_or_else(|| EvalError::UnboundBase(n.to_string()))
    }

    pub fn finite(&self, n: &str) -> EvalResult<&FiniteSpec> {
        match self.base(n)? {
            TypeSpec::Finite(f) => Ok(f),
            _ => Err(EvalError::Other(format!("`{n}` is not a finite carrier"))),
        }
    }

    pub fn base_points(&self, n: &str) -> EvalResult<Vec<Value>> {
        Ok(match self.base(n)? {
            TypeSpec::Real { min, max, step } => grid(*min, *max, *step).into_iter().map(Value::Real).collect(),
            TypeSpec::Naturals { max } => (0..=*max as i64).map(Value::Int).collect(),
            TypeSpec::Integers { min, max } => (*min..=*max).map(Value::Int).collect(),
            TypeSpec::Finite(f) => (0..f.points.len()).map(Value::Point).collect(),
            TypeSpec::Bags { universe, max_size } => all_bags(*universe, *max_size).into_iter().map(Value::Bag).collect(),
        })
    }

    /// Enumerates (or grid-samples) a carrier. Function spaces are
    /// enumerated when both sides are finite and small.
    pub fn points(&self, ty: &Ty) -> EvalResult<Vec<Value>> {
        match ty {
            Ty::Base(n) => self.base_points(n),
            Ty::Bang(_, a) => self.points(a),
            Ty::Product(a, b) | Ty::Tensor(a, b) => {
                let (xs, ys) = (self.points(a)?, self.points(b)?);
                if xs.len() * ys.len() > self.limit {
                    return Err(EvalError::Domain(format!("{} points exceed the enumeration limit", xs.len() * ys.len())));
                }
                Ok(xs.iter().flat_map(|x| ys.iter().map(move |y| Value::pair(x.clone(), y.clone()))).collect())
            }
            Ty::Arrow(a, b) | Ty::Lolli(a, b) => {
                let dom = self.points(a)?;
                let cod = self.points(b)?;
                let keys: Vec<String> = dom
                    .iter()
                    .map(|v| v.key().ok_or_else(|| EvalError::Domain("function space over an infinite domain".into())))
                    .collect::<EvalResult<_>>()?;
                let count = (cod.len() as f64).powi(dom.len() as i32);
                if count > self.limit as f64 {
                    return Err(EvalError::Domain(format!("function space of size {count} exceeds the enumeration limit")));
                }
                let mut out = Vec::new();
                if cod.is_empty() && !dom.is_empty() {
                    return Ok(out);
                }
                let mut idx = vec![0usize; dom.len()];
                loop {
                    let table: BTreeMap<String, Value> =
                        keys.iter().zip(&idx).map(|(k, i)| (k.clone(), cod[*i].clone())).collect();
                    out.push(table_fun(table));
                    let mut k = 0;
                    loop {
                        if k == idx.len() {
                            return Ok(out);
                        }
                        idx[k] += 1;
                        if idx[k] < cod.len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                }
            }
        }
    }

    pub fn scalar(&self, ty: &Ty, x: f64) -> EvalResult<Value> {
        Ok(match ty.unbang() {
            Ty::Base(n) => match self.base(n)? {
                TypeSpec::Naturals { .. } | TypeSpec::Integers { .. } => Value::Int(x.round() as i64),
                _ => Value::Real(x),
            },
            _ => Value::Real(x),
        })
    }

    /// Reads a first-order literal.
    pub fn literal(&self, ty: &Ty, j: &Json) -> EvalResult<Value> {
        let bad = || EvalError::Other(format!("literal {j} does not fit type {}", crate::pretty::ty(ty)));
        match ty {
            Ty::Bang(_, a) => self.literal(a, j),
            Ty::Product(a, b) | Ty::Tensor(a, b) => match j.as_array().map(Vec::as_slice) {
                Some([x, y]) => Ok(Value::pair(self.literal(a, x)?, self.literal(b, y)?)),
                _ => Err(bad()),
            },
            Ty::Arrow(..) | Ty::Lolli(..) => Err(EvalError::Other("function literals are not supported".into())),
            Ty::Base(n) => match self.base(n)? {
                TypeSpec::Real { .. } => json_real(j).map(Value::Real).ok_or_else(bad),
                TypeSpec::Naturals { .. } | TypeSpec::Integers { .. } => j.as_i64().map(Value::Int).ok_or_else(bad),
                TypeSpec::Finite(f) => {
                    let s = j.as_str().ok_or_else(bad)?;
                    f.points.iter().position(|p| p == s).map(Value::Point).ok_or_else(bad)
                }
                TypeSpec::Bags { .. } => {
                    let xs: Option<Vec<u64>> = j.as_array().and_then(|a| a.iter().map(Json::as_u64).collect());
                    xs.map(|x| Value::Bag(Bag::of(&x))).ok_or_else(bad)
                }
            },
        }
    }

    /// Table key of a value: point names on finite carriers.
    pub fn key(&self, ty: &Ty, v: &Value) -> Option<String> {
        match (ty, v) {
            (Ty::Bang(_, a), v) => self.key(a, v),
            (Ty::Product(a, b) | Ty::Tensor(a, b), Value::Pair(x, y)) => Some(format!("({},{})", self.key(a, x)?, self.key(b, y)?)),
            (Ty::Base(n), Value::Point(i)) => match self.base(n) {
                Ok(TypeSpec::Finite(f)) => f.points.get(*i).cloned(),
                _ => v.key(),
            },
            _ => v.key(),
        }
    }

    pub fn render(&self, ty: &Ty, v: &Value) -> Json {
        match (ty, v) {
            (Ty::Bang(_, a), v) => self.render(a, v),
            (Ty::Product(a, b) | Ty::Tensor(a, b), Value::Pair(x, y)) => json!([self.render(a, x), self.render(b, y)]),
            (Ty::Base(n), Value::Point(i)) => match self.base(n) {
                Ok(TypeSpec::Finite(f)) => json!(f.points.get(*i).cloned().unwrap_or_else(|| format!("#{i}"))),
                _ => json!(format!("#{i}")),
            },
            (Ty::Arrow(a, b) | Ty::Lolli(a, b), Value::Fun(_)) => self.render_fun(a, b, v),
            (_, v) => render_plain(v),
        }
    }

    fn render_fun(&self, a: &Ty, b: &Ty, f: &Value) -> Json {
        let Ok(pts) = self.points(a) else { return json!("<function>") };
        if pts.len() > 64 {
            return json!("<function>");
        }
        let mut m = serde_json::Map::new();
        for p in pts {
            let k = match self.render(a, &p) {
                Json::String(s) => s,
                other => other.to_string(),
            };
            let v = f.apply(p).map(|r| self.render(b, &r)).unwrap_or_else(|e| json!(format!("error: {e}")));
            m.insert(k, v);
        }
        Json::Object(m)
    }

    /// Extensional equality: tolerance on reals, pointwise on functions.
    pub fn eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        match ty {
            Ty::Bang(_, t) => self.eq(t, a, b),
            Ty::Product(l, r) | Ty::Tensor(l, r) => {
                let ((a1, a2), (b1, b2)) = (a.as_pair()?, b.as_pair()?);
                Ok(self.eq(l, a1, b1)? && self.eq(r, a2, b2)?)
            }
            Ty::Arrow(d, c) | Ty::Lolli(d, c) => {
                for p in self.points(d)? {
                    if !self.eq(c, &a.apply(p.clone())?, &b.apply(p)?)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Ty::Base(_) => plain_eq(a, b),
        }
    }

    /// Semantics of a numeric constant.
    pub fn constant(&self, name: &str, spec: Option<&ConstSpec>, ty: &Ty) -> EvalResult<Value> {
        let Some(spec) = spec else {
            if is_numeral(name) {
                let x = rational_f64(name)?;
                return self.scalar(ty, x);
            }
            return Err(EvalError::UnboundConst(name.to_string()));
        };
        let (args, res) = spine(ty);
        let this = self.clone();
        match spec {
            ConstSpec::Value { value } => self.literal(ty, value),
            ConstSpec::Poly { .. } => {
                let polys = spec.polys().ok_or_else(|| EvalError::Other(format!("bad polynomial for `{name}`")))?;
                let res2 = res.clone();
                let f: NaryFn = Arc::new(move |xs: &[Value]| {
                    let leaves: Vec<f64> =
                        xs.iter().flat_map(Value::flatten).map(|v| v.as_real()).collect::<EvalResult<_>>()?;
                    let outs: Vec<f64> = polys.iter().map(|p| p.eval_f64(&|v| leaves.get(v as usize).copied().unwrap_or(f64::NAN))).collect();
                    let mut it = outs.into_iter();
                    this.unflatten(&res2, &mut it)
                });
                curry(args.len(), f)
            }
            ConstSpec::Table { map } => {
                let (map, arg_tys) = (map.clone(), args.clone());
                let f: NaryFn = Arc::new(move |xs: &[Value]| {
                    let key: Vec<String> = xs
                        .iter()
                        .zip(&arg_tys)
                        .map(|(v, t)| this.key(t, v).ok_or_else(|| EvalError::Domain("table lookup on an infinite carrier".into())))
                        .collect::<EvalResult<_>>()?;
                    let key = key.join(",");
                    let j = map.get(&key).or_else(|| map.get("*")).ok_or_else(|| EvalError::Domain(format!("no table entry for {key}")))?;
                    this.literal(&res, j)
                });
                curry(args.len(), f)
            }
            ConstSpec::Builtin { name: b, scale } => {
                let scale = match scale {
                    Some(s) => rational_f64(s)?,
                    None => 1.0,
                };
                let b = b.clone();
                let f: NaryFn = Arc::new(move |xs: &[Value]| builtin(&this, &b, scale, &res, xs));
                curry(args.len(), f)
            }
        }
    }

    fn unflatten(&self, ty: &Ty, it: &mut impl Iterator<Item = f64>) -> EvalResult<Value> {
        match ty.unbang() {
            Ty::Product(a, b) | Ty::Tensor(a, b) => Ok(Value::pair(self.unflatten(a, it)?, self.unflatten(b, it)?)),
            t => {
                let x = it.next().ok_or_else(|| EvalError::shape("too few polynomial components"))?;
                self.scalar(t, x)
            }
        }
    }
}

fn builtin(c: &Carriers, name: &str, scale: f64, res: &Ty, xs: &[Value]) -> EvalResult<Value> {
    let leaves = || -> EvalResult<Vec<f64>> { xs.iter().flat_map(Value::flatten).map(|v| v.as_real()).collect() };
    match name {
        "id" => xs.first().cloned().ok_or_else(|| EvalError::shape("id needs an argument")),
        "succ" => match xs.first() {
            Some(Value::Int(n)) => Ok(Value::Int(n + 1)),
            Some(v) => Ok(Value::Real(v.as_real()? + 1.0)),
            None => Err(EvalError::shape("succ needs an argument")),
        },
        "case" => match xs {
            [b, x, y] => Ok(if b.as_point()? == 0 { x.clone() } else { y.clone() }),
            _ => Err(EvalError::shape("case needs three arguments")),
        },
        "sum" | "scaled_sum" => c.scalar(res, scale * leaves()?.iter().sum::<f64>()),
        "max" => c.scalar(res, scale * leaves()?.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        "bag_sum" => Ok(Value::Int(xs.first().ok_or_else(|| EvalError::shape("bag_sum needs a bag"))?.as_bag()?.sum())),
        "bag_size" => Ok(Value::Int(xs.first().ok_or_else(|| EvalError::shape("bag_size needs a bag"))?.as_bag()?.size() as i64)),
        other => Err(EvalError::Other(format!("unknown builtin `{other}`"))),
    }
}

fn table_fun(table: BTreeMap<String, Value>) -> Value {
    Value::fun(move |a| {
        let k = a.key().ok_or_else(|| EvalError::Domain("table function applied to an infinite value".into()))?;
        table.get(&k).cloned().ok_or_else(|| EvalError::Domain(format!("argument {k} outside the enumerated domain")))
    })
}

pub fn grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || max < min {
        return vec![min];
    }
    let n = ((max - min) / step + 1e-9).floor() as i64;
    (0..=n).map(|i| min + i as f64 * step).map(|x| (x * 1e9).round() / 1e9).collect()
}

fn all_bags(universe: u64, max_size: u64) -> Vec<Bag> {
    let mut out = vec![Bag::default()];
    let mut frontier = vec![(Bag::default(), 0u64)];
    for _ in 0..max_size {
        let mut next = Vec::new();
        for (b, lo) in &frontier {
            for e in *lo..=universe {
                let nb = b.union(&Bag::of(&[e]));
                out.push(nb.clone());
                next.push((nb, e));
            }
        }
        frontier = next;
    }
    out
}

pub fn json_real(j: &Json) -> Option<f64> {
    match j {
        Json::String(s) if s == "inf" => Some(f64::INFINITY),
        Json::String(s) => rational_f64(s).ok(),
        _ => j.as_f64(),
    }
}

pub fn render_real(x: f64) -> Json {
    if x.is_infinite() {
        json!("inf")
    } else {
        json!((x * 1e12).round() / 1e12)
    }
}

pub fn render_plain(v: &Value) -> Json {
    match v {
        Value::Unit => json!(null),
        Value::Real(x) => render_real(*x),
        Value::Int(n) => json!(n),
        Value::Point(i) => json!(format!("#{i}")),
        Value::Bag(b) => json!(b.elems()),
        Value::BagChange(c) => json!({"remove": c.remove.elems(), "add": c.add.elems()}),
        Value::Poly(p) => json!(p.to_string()),
        Value::Pair(a, b) => json!([render_plain(a), render_plain(b)]),
        Value::Fun(_) => json!("<function>"),
    }
}

pub fn plain_eq(a: &Value, b: &Value) -> EvalResult<bool> {
    Ok(match (a, b) {
        (Value::Unit, Value::Unit) => true,
        (Value::Real(x), Value::Real(y)) => real_eq(*x, *y),
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Real(_), Value::Int(_)) | (Value::Int(_), Value::Real(_)) => real_eq(a.as_real()?, b.as_real()?),
        (Value::Point(x), Value::Point(y)) => x == y,
        (Value::Bag(x), Value::Bag(y)) => x == y,
        (Value::BagChange(x), Value::BagChange(y)) => x == y,
        (Value::Poly(x), Value::Poly(y)) => x == y,
        (Value::Pair(a1, a2), Value::Pair(b1, b2)) => plain_eq(a1, b1)? && plain_eq(a2, b2)?,
        (Value::Fun(_), _) | (_, Value::Fun(_)) => {
            return Err(EvalError::Other("functions need a type to be compared".into()))
        }
        _ => false,
    })
}

pub fn real_eq(x: f64, y: f64) -> bool {
    x == y || (x - y).abs() <= REAL_TOL * (1.0 + x.abs().max(y.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(grid(0.0, 1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn bag_enumeration() {
        // multisets over {0,1} of size <= 2: {}, {0}, {1}, {0,0}, {0,1}, {1,1}
        assert_eq!(all_bags(1, 2).len(), 6);
    }

    #[test]
    fn finite_function_space() {
        let mut types = BTreeMap::new();
        types.insert("B".into(), TypeSpec::Finite(FiniteSpec { points: vec!["a".into(), "b".into()], ..Default::default() }));
        let c = Carriers::new(types);
        let fs = c.points(&Ty::arrow(Ty::base("B"), Ty::base("B"))).unwrap();
        assert_eq!(fs.len(), 4);
    }

    #[test]
    fn poly_constant_evaluates() {
        let mut types = BTreeMap::new();
        types.insert("Real".into(), TypeSpec::Real { min: 0.0, max: 1.0, step: 0.5 });
        let c = Carriers::new(types);
        let spec: ConstSpec = serde_json::from_str(r#"{"kind":"poly","components":[[["1",[2]],["1/2",[0]]]]}"#).unwrap();
        let r = Ty::base("Real");
        let f = c.constant("sq", Some(&spec), &Ty::arrow(r.clone(), r)).unwrap();
        assert_eq!(f.apply(Value::Real(3.0)).unwrap().as_real().unwrap(), 9.5);
    }
}
