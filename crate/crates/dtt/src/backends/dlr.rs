//! Differential logical relations: a carrier, a lattice of distances and a
//! relation `ρ(x, ε, y)`. Finite relations are read upward closed; the
//! real line and the naturals carry the Euclidean relation `ε ≥ |x - y|`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value as Json};

use crate::error::EvalError;
use crate::semantics::env::{json_real, real_eq, render_real, Carriers, EnvSpec, FiniteSpec, LatticeSpec, TypeSpec};
use crate::semantics::{dvalue_from_json, Backend, EvalResult, LeafRequest, Value};
use crate::syntax::{Pred, RuleSet, Ty};

const TOL: f64 = 1e-9;

/// A finite lattice with precomputed joins and meets.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub names: Vec<String>,
    leq: Vec<Vec<bool>>,
    join: Vec<Vec<usize>>,
    meet: Vec<Vec<usize>>,
    pub top: usize,
    pub bottom: usize,
}

impl Lattice {
    /// From a Hasse diagram: `[a, b]` means `b` covers `a`.
    pub fn from_spec(spec: &LatticeSpec) -> EvalResult<Lattice> {
        let n = spec.elements.len();
        if n == 0 {
            return Err(EvalError::Other("empty lattice".into()));
        }
        let idx = |s: &str| spec.elements.iter().position(|e| e == s).ok_or_else(|| EvalError::Other(format!("unknown lattice element `{s}`")));
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for [a, b] in &spec.covers {
            leq[idx(a)?][idx(b)?] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if leq[i][k] && leq[k][j] {
                        leq[i][j] = true;
                    }
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| (0..n).any(|j| i != j && leq[i][j] && leq[j][i])) {
            return Err(EvalError::Other(format!("lattice order has a cycle through `{}`", spec.elements[i])));
        }
        let bound = |i: usize, j: usize, up: bool| -> EvalResult<usize> {
            let cands: Vec<usize> = (0..n).filter(|&k| if up { leq[i][k] && leq[j][k] } else { leq[k][i] && leq[k][j] }).collect();
            cands
                .iter()
                .copied()
                .find(|&k| cands.iter().all(|&m| if up { leq[k][m] } else { leq[m][k] }))
                .ok_or_else(|| {
                    EvalError::Other(format!(
                        "`{}` and `{}` have no {} in the lattice",
                        spec.elements[i],
                        spec.elements[j],
                        if up { "join" } else { "meet" }
                    ))
                })
        };
        let mut join = vec![vec![0; n]; n];
        let mut meet = vec![vec![0; n]; n];
        for i in 0..n {
            for j in 0..n {
                join[i][j] = bound(i, j, true)?;
                meet[i][j] = bound(i, j, false)?;
            }
        }
        let top = (0..n).fold(0, |a, b| join[a][b]);
        let bottom = (0..n).fold(0, |a, b| meet[a][b]);
        Ok(Lattice { names: spec.elements.clone(), leq, join, meet, top, bottom })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn join(&self, a: usize, b: usize) -> usize {
        self.join[a][b]
    }

    pub fn meet(&self, a: usize, b: usize) -> usize {
        self.meet[a][b]
    }

    fn two_point() -> Lattice {
        Lattice::from_spec(&LatticeSpec { elements: vec!["0".into(), "1".into()], covers: vec![["0".into(), "1".into()]] })
            .expect("two-point lattice")
    }
}

/// A finite DLR: `rel[x][l][y]` is the upward-closed relation.
#[derive(Clone, Debug)]
pub struct FiniteDlr {
    pub points: Vec<String>,
    pub lattice: Lattice,
    rel: Vec<Vec<Vec<bool>>>,
    dist: Vec<Vec<usize>>,
}

impl FiniteDlr {
    pub fn from_spec(name: &str, f: &FiniteSpec) -> EvalResult<FiniteDlr> {
        let n = f.points.len();
        let (lattice, triples) = match (&f.lattice, &f.rho) {
            (Some(l), Some(rho)) => (Lattice::from_spec(l)?, rho.clone()),
            (None, None) => {
                let mut t = Vec::new();
                for x in &f.points {
                    for y in &f.points {
                        t.push([x.clone(), "1".to_string(), y.clone()]);
                    }
                    t.push([x.clone(), "0".to_string(), x.clone()]);
                }
                (Lattice::two_point(), t)
            }
            _ => return Err(EvalError::Other(format!("`{name}`: a lattice needs a relation and vice versa"))),
        };
        let pt = |s: &str| f.points.iter().position(|p| p == s).ok_or_else(|| EvalError::Other(format!("`{name}`: unknown point `{s}`")));
        let el = |s: &str| lattice.names.iter().position(|p| p == s).ok_or_else(|| EvalError::Other(format!("`{name}`: unknown lattice element `{s}`")));
        let mut raw = Vec::new();
        for [x, l, y] in &triples {
            raw.push((pt(x)?, el(l)?, pt(y)?));
        }
        let m = lattice.len();
        let mut rel = vec![vec![vec![false; n]; m]; n];
        for &(x, l, y) in &raw {
            for (k, row) in rel[x].iter_mut().enumerate() {
                if lattice.leq(l, k) {
                    row[y] = true;
                }
            }
        }
        let mut dist = vec![vec![lattice.top; n]; n];
        for x in 0..n {
            for y in 0..n {
                dist[x][y] = (0..m).filter(|&l| rel[x][l][y]).fold(lattice.top, |a, b| lattice.meet(a, b));
            }
        }
        Ok(FiniteDlr { points: f.points.clone(), lattice, rel, dist })
    }

    pub fn rel(&self, x: usize, l: usize, y: usize) -> bool {
        self.rel[x][l][y]
    }

    pub fn dist(&self, x: usize, y: usize) -> usize {
        self.dist[x][y]
    }

    /// `||x|| ∈ ρ̃(x, y)` only for `y = x`.
    pub fn separated(&self) -> Result<(), String> {
        let n = self.points.len();
        for x in 0..n {
            for y in 0..n {
                if x != y && self.rel(x, self.dist(x, x), y) {
                    return Err(format!("||{}|| relates {} to {}", self.points[x], self.points[x], self.points[y]));
                }
            }
        }
        Ok(())
    }

    /// Every non-empty `ρ̃(x, y)` contains its meet.
    pub fn attains_meets(&self) -> Result<(), String> {
        let n = self.points.len();
        for x in 0..n {
            for y in 0..n {
                let any = (0..self.lattice.len()).any(|l| self.rel(x, l, y));
                if any && !self.rel(x, self.dist(x, y), y) {
                    return Err(format!("||{}, {}|| is not itself a distance between them", self.points[x], self.points[y]));
                }
            }
        }
        Ok(())
    }

    /// `sup{||x, y|| : ρ(x, ε, y)} = ε` for every `x` and `ε`.
    pub fn complete(&self) -> bool {
        let (n, m) = (self.points.len(), self.lattice.len());
        (0..n).all(|x| {
            (0..m).all(|e| {
                let s = (0..n).filter(|&y| self.rel(x, e, y)).fold(self.lattice.bottom, |a, y| self.lattice.join(a, self.dist(x, y)));
                s == e
            })
        })
    }
}

struct Inner {
    env: EnvSpec,
    carriers: Carriers,
    finite: BTreeMap<String, FiniteDlr>,
}

#[derive(Clone)]
pub struct Dlr(Arc<Inner>);

impl std::fmt::Debug for Dlr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dlr").field("finite", &self.0.finite.keys().collect::<Vec<_>>()).finish()
    }
}

impl Dlr {
    /// Builds the model; finite relations must be separated and attain
    /// their meets.
    pub fn new(env: EnvSpec) -> EvalResult<Self> {
        let d = Self::new_unchecked(env)?;
        for (name, f) in &d.0.finite {
            f.separated().map_err(|e| EvalError::Other(format!("`{name}` is not separated: {e}")))?;
            f.attains_meets().map_err(|e| EvalError::Other(format!("`{name}`: {e}")))?;
        }
        Ok(d)
    }

    pub fn new_unchecked(env: EnvSpec) -> EvalResult<Self> {
        let mut finite = BTreeMap::new();
        for (name, t) in &env.types {
            match t {
                TypeSpec::Finite(f) => {
                    finite.insert(name.clone(), FiniteDlr::from_spec(name, f)?);
                }
                TypeSpec::Bags { .. } => return Err(EvalError::Unsupported { backend: "dlr", what: "bag carriers".into() }),
                _ => {}
            }
        }
        Ok(Dlr(Arc::new(Inner { carriers: Carriers::new(env.types.clone()), env, finite })))
    }

    pub fn finite(&self, n: &str) -> Option<&FiniteDlr> {
        self.0.finite.get(n)
    }

    pub fn complete(&self) -> bool {
        self.0.finite.values().all(FiniteDlr::complete)
    }

    fn base(&self, n: &str) -> EvalResult<Option<&FiniteDlr>> {
        self.0.carriers.base(n)?;
        Ok(self.0.finite.get(n))
    }

    pub fn bottom(&self, ty: &Ty) -> EvalResult<Value> {
        Ok(match ty {
            Ty::Bang(_, a) => self.bottom(a)?,
            Ty::Base(n) => match self.base(n)? {
                Some(f) => Value::Point(f.lattice.bottom),
                None => Value::Real(0.0),
            },
            Ty::Product(a, b) | Ty::Tensor(a, b) => Value::pair(self.bottom(a)?, self.bottom(b)?),
            Ty::Arrow(_, b) | Ty::Lolli(_, b) => {
                let v = self.bottom(b)?;
                Value::fun3(move |_, _, _| Ok(v.clone()))
            }
        })
    }

    pub fn join(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<Value> {
        Ok(match ty {
            Ty::Bang(_, t) => self.join(t, a, b)?,
            Ty::Base(n) => match self.base(n)? {
                Some(f) => Value::Point(f.lattice.join(a.as_point()?, b.as_point()?)),
                None => Value::Real(a.as_real()?.max(b.as_real()?)),
            },
            Ty::Product(l, r) | Ty::Tensor(l, r) => Value::pair(self.join(l, &a.fst()?, &b.fst()?)?, self.join(r, &a.snd()?, &b.snd()?)?),
            Ty::Arrow(_, c) | Ty::Lolli(_, c) => {
                let (me, c, a, b) = (self.clone(), (**c).clone(), a.clone(), b.clone());
                Value::fun3(move |x, y, e| me.join(&c, &a.apply3(x.clone(), y.clone(), e.clone())?, &b.apply3(x, y, e)?))
            }
        })
    }

    /// `ρ(x, ε, y)` at any type.
    pub fn rel(&self, ty: &Ty, x: &Value, e: &Value, y: &Value) -> EvalResult<bool> {
        match ty {
            Ty::Bang(_, t) => self.rel(t, x, e, y),
            Ty::Base(n) => Ok(match self.base(n)? {
                Some(f) => f.rel(x.as_point()?, e.as_point()?, y.as_point()?),
                None => {
                    let e = e.as_real()?;
                    e + TOL * (1.0 + e.abs()) >= (x.as_real()? - y.as_real()?).abs()
                }
            }),
            Ty::Product(l, r) | Ty::Tensor(l, r) => {
                Ok(self.rel(l, &x.fst()?, &e.fst()?, &y.fst()?)? && self.rel(r, &x.snd()?, &e.snd()?, &y.snd()?)?)
            }
            Ty::Arrow(d, c) | Ty::Lolli(d, c) => {
                let (f, g, phi) = (x, y, e);
                let pts = self.0.carriers.points(d)?;
                for a in &pts {
                    for b in &pts {
                        for eps in self.candidates(d, a, b)? {
                            let m = phi.apply3(a.clone(), b.clone(), eps)?;
                            let (fa, fb, ga, gb) = (f.apply(a.clone())?, f.apply(b.clone())?, g.apply(a.clone())?, g.apply(b.clone())?);
                            for (p, q) in [(&fa, &fb), (&fa, &gb), (&ga, &fb), (&ga, &gb)] {
                                if !self.rel(c, p, &m, q)? {
                                    return Ok(false);
                                }
                            }
                        }
                    }
                }
                Ok(true)
            }
        }
    }

    /// Distances `ε` with `ρ(x, ε, y)` used when quantifying over them:
    /// every such lattice element for finite carriers, `|x - y|` and a
    /// looser bound on the line.
    pub fn candidates(&self, ty: &Ty, x: &Value, y: &Value) -> EvalResult<Vec<Value>> {
        match ty {
            Ty::Bang(_, t) => self.candidates(t, x, y),
            Ty::Base(n) => Ok(match self.base(n)? {
                Some(f) => {
                    let (p, q) = (x.as_point()?, y.as_point()?);
                    (0..f.lattice.len()).filter(|&l| f.rel(p, l, q)).map(Value::Point).collect()
                }
                None => {
                    let d = (x.as_real()? - y.as_real()?).abs();
                    vec![Value::Real(d), Value::Real(d + 1.0)]
                }
            }),
            Ty::Product(l, r) | Ty::Tensor(l, r) => {
                let (ls, rs) = (self.candidates(l, &x.fst()?, &y.fst()?)?, self.candidates(r, &x.snd()?, &y.snd()?)?);
                Ok(ls.iter().flat_map(|a| rs.iter().map(move |b| Value::pair(a.clone(), b.clone()))).collect())
            }
            Ty::Arrow(..) | Ty::Lolli(..) => Ok(vec![self.dist(ty, x, y)?]),
        }
    }

    /// `||x, y|| = inf ρ̃(x, y)`; top when the set is empty.
    pub fn dist(&self, ty: &Ty, x: &Value, y: &Value) -> EvalResult<Value> {
        Ok(match ty {
            Ty::Bang(_, t) => self.dist(t, x, y)?,
            Ty::Base(n) => match self.base(n)? {
                Some(f) => Value::Point(f.dist(x.as_point()?, y.as_point()?)),
                None => Value::Real((x.as_real()? - y.as_real()?).abs()),
            },
            Ty::Product(l, r) | Ty::Tensor(l, r) => Value::pair(self.dist(l, &x.fst()?, &y.fst()?)?, self.dist(r, &x.snd()?, &y.snd()?)?),
            Ty::Arrow(d, c) | Ty::Lolli(d, c) => {
                let (me, d, c, f, g) = (self.clone(), (**d).clone(), (**c).clone(), x.clone(), y.clone());
                Value::fun3(move |a, b, e| {
                    if !me.rel(&d, &a, &e, &b)? {
                        return me.bottom(&c);
                    }
                    let (fa, fb, ga, gb) = (f.apply(a.clone())?, f.apply(b.clone())?, g.apply(a)?, g.apply(b)?);
                    let mut acc = me.dist(&c, &fa, &fb)?;
                    for (p, q) in [(&fa, &gb), (&ga, &fb), (&ga, &gb)] {
                        acc = me.join(&c, &acc, &me.dist(&c, p, q)?)?;
                    }
                    Ok(acc)
                })
            }
        })
    }

    /// `sup{c, ||f(x, w), g(x, w)|| : ρ(x, ε, w)}` over the enumerated
    /// carrier.
    #[allow(clippy::too_many_arguments)]
    pub fn filler(&self, carrier: &Ty, z: &Ty, x: &Value, eps: &Value, c: &Value, f: &dyn Fn(&Value) -> EvalResult<Value>, g: &dyn Fn(&Value) -> EvalResult<Value>) -> EvalResult<Value> {
        let mut acc = c.clone();
        for w in self.0.carriers.points(carrier)? {
            if self.rel(carrier, x, eps, &w)? {
                acc = self.join(z, &acc, &self.dist(z, &f(&w)?, &g(&w)?)?)?;
            }
        }
        Ok(acc)
    }

    /// A self-difference on the diagonal that the identity filler moves,
    /// if any: `(x, y, ε, j)`.
    pub fn eta_counterexample(&self, ty: &Ty) -> EvalResult<Option<(Value, Value, Value, Value)>> {
        let pts = self.0.carriers.points(ty)?;
        for x in &pts {
            for y in &pts {
                for e in self.candidates(ty, x, y)? {
                    let r = self.dist(ty, x, x)?;
                    let j = self.filler(ty, ty, x, &e, &r, &|_| Ok(x.clone()), &|w| Ok(w.clone()))?;
                    if !self.diff_eq(ty, &j, &e)? {
                        return Ok(Some((x.clone(), y.clone(), e, j)));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Self-distance by scanning the lattice for the least related
    /// element, without the precomputed tables.
    fn scan_self(&self, ty: &Ty, v: &Value) -> EvalResult<Value> {
        match ty {
            Ty::Bang(_, t) => self.scan_self(t, v),
            Ty::Base(n) => match self.base(n)? {
                Some(f) => {
                    let p = v.as_point()?;
                    let rel: Vec<usize> = (0..f.lattice.len()).filter(|&l| f.rel(p, l, p)).collect();
                    let least = rel.iter().copied().find(|&l| rel.iter().all(|&m| f.lattice.leq(l, m)));
                    Ok(Value::Point(least.unwrap_or(f.lattice.top)))
                }
                None => Ok(Value::Real(0.0)),
            },
            Ty::Product(a, b) | Ty::Tensor(a, b) => Ok(Value::pair(self.scan_self(a, &v.fst()?)?, self.scan_self(b, &v.snd()?)?)),
            Ty::Arrow(..) | Ty::Lolli(..) => self.refl(ty, v),
        }
    }

    fn literal(&self, ty: &Ty, j: &Json) -> EvalResult<Value> {
        let err = || EvalError::Other(format!("{j} is not a distance for {}", crate::pretty::ty(ty)));
        match ty {
            Ty::Bang(_, a) => self.literal(a, j),
            Ty::Product(a, b) | Ty::Tensor(a, b) => match j.as_array().map(Vec::as_slice) {
                Some([x, y]) => Ok(Value::pair(self.literal(a, x)?, self.literal(b, y)?)),
                _ => Err(err()),
            },
            Ty::Arrow(..) | Ty::Lolli(..) => Err(EvalError::Other("function distances cannot be given as literals".into())),
            Ty::Base(n) => match self.base(n)? {
                Some(f) => {
                    let s = j.as_str().ok_or_else(err)?;
                    f.lattice.names.iter().position(|e| e == s).map(Value::Point).ok_or_else(err)
                }
                None => json_real(j).filter(|x| *x >= 0.0).map(Value::Real).ok_or_else(err),
            },
        }
    }
}

impl Backend for Dlr {
    fn name(&self) -> &'static str {
        "dlr"
    }

    fn constant(&self, name: &str, ty: &Ty) -> EvalResult<Value> {
        self.0.carriers.constant(name, self.0.env.consts.get(name), ty)
    }

    fn dconst(&self, name: &str, pred: &Pred) -> EvalResult<Value> {
        let j = self.0.env.dconsts.get(name).ok_or_else(|| EvalError::UnboundConst(name.to_string()))?;
        dvalue_from_json(pred, j, &|ty, j| self.literal(ty, j))
    }

    /// `||v||` at first order; at function types the derivative
    /// `(x, y, ε) ↦ sup{||v x||, ||v x, v z|| : ρ(x, ε, z)}`.
    fn refl(&self, ty: &Ty, v: &Value) -> EvalResult<Value> {
        match ty {
            Ty::Bang(_, t) => self.refl(t, v),
            Ty::Arrow(d, c) | Ty::Lolli(d, c) => {
                let (me, d, c, f) = (self.clone(), (**d).clone(), (**c).clone(), v.clone());
                Ok(Value::fun3(move |x, _, e| {
                    let fx = f.apply(x.clone())?;
                    let r = me.refl(&c, &fx)?;
                    me.filler(&d, &c, &x, &e, &r, &|_| Ok(fx.clone()), &|w| f.apply(w.clone()))
                }))
            }
            Ty::Product(a, b) | Ty::Tensor(a, b) => Ok(Value::pair(self.refl(a, &v.fst()?)?, self.refl(b, &v.snd()?)?)),
            Ty::Base(_) => self.dist(ty, v, v),
        }
    }

    fn closed_refl(&self, ty: &Ty, v: &Value) -> EvalResult<Value> {
        self.scan_self(ty, v)
    }

    fn fill_leaf(&self, req: &LeafRequest<'_>) -> EvalResult<Value> {
        let x = req.x;
        self.filler(req.carrier, req.z, x, req.diff, req.c, &|w| (req.f)(x, w), &|w| (req.g)(x, w))
    }

    fn holds(&self, ty: &Ty, t: &Value, u: &Value, d: &Value) -> EvalResult<bool> {
        self.rel(ty, t, d, u)
    }

    fn points(&self, ty: &Ty) -> EvalResult<Vec<Value>> {
        self.0.carriers.points(ty)
    }

    fn diffs(&self, ty: &Ty, x: &Value, y: &Value) -> EvalResult<Vec<Value>> {
        self.candidates(ty, x, y)
    }

    fn value_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        self.0.carriers.eq(ty, a, b)
    }

    fn diff_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        match ty {
            Ty::Bang(_, t) => self.diff_eq(t, a, b),
            Ty::Base(n) => Ok(match self.base(n)? {
                Some(_) => a.as_point()? == b.as_point()?,
                None => real_eq(a.as_real()?, b.as_real()?),
            }),
            Ty::Product(l, r) | Ty::Tensor(l, r) => Ok(self.diff_eq(l, &a.fst()?, &b.fst()?)? && self.diff_eq(r, &a.snd()?, &b.snd()?)?),
            Ty::Arrow(d, c) | Ty::Lolli(d, c) => {
                let pts = self.0.carriers.points(d)?;
                for x in pts.iter().take(24) {
                    for y in pts.iter().take(24) {
                        for e in self.candidates(d, x, y)? {
                            let (p, q) = (a.apply3(x.clone(), y.clone(), e.clone())?, b.apply3(x.clone(), y.clone(), e)?);
                            if !self.diff_eq(c, &p, &q)? {
                                return Ok(false);
                            }
                        }
                    }
                }
                Ok(true)
            }
        }
    }

    fn render(&self, ty: &Ty, v: &Value) -> Json {
        self.0.carriers.render(ty, v)
    }

    fn render_diff(&self, ty: &Ty, v: &Value) -> Json {
        match (ty, v) {
            (Ty::Bang(_, a), v) => self.render_diff(a, v),
            (Ty::Base(n), Value::Point(i)) => json!(self.0.finite.get(n.as_str()).and_then(|f| f.lattice.names.get(*i)).cloned().unwrap_or_else(|| format!("#{i}"))),
            (_, Value::Real(x)) => render_real(*x),
            (Ty::Product(a, b) | Ty::Tensor(a, b), Value::Pair(x, y)) => json!([self.render_diff(a, x), self.render_diff(b, y)]),
            _ => json!("<function>"),
        }
    }

    fn sound_rules(&self) -> RuleSet {
        RuleSet { eta: true, betad: true, cext: true, fext2: true, etad: self.complete(), ..RuleSet::default() }
    }
}
