//! Change structures: carriers with `⊕`/`⊖`, differences as changes.

use std::collections::BTreeMap;

use serde_json::{json, Value as Json};

use crate::error::EvalError;
use crate::semantics::env::{json_real, plain_eq, render_real, Carriers, EnvSpec, TypeSpec};
use crate::semantics::{dvalue_from_json, Backend, BagChange, EvalResult, LeafRequest, Value};
use crate::syntax::{Pred, RuleSet, Ty};

/// A finite change structure read from an environment table.
#[derive(Clone, Debug)]
pub struct ChangeTable {
    pub names: Vec<String>,
    oplus: BTreeMap<(usize, usize), usize>,
    ominus: BTreeMap<(usize, usize), usize>,
    pub unique: bool,
}

impl ChangeTable {
    pub fn changes_at(&self, x: usize) -> Vec<usize> {
        self.oplus.keys().filter(|(p, _)| *p == x).map(|(_, d)| *d).collect()
    }

    /// Whether every change is the canonical one, `dx = (x ⊕ dx) ⊖ x`.
    pub fn is_unique(&self) -> bool {
        self.oplus.iter().all(|(&(x, dx), &y)| self.ominus.get(&(y, x)) == Some(&dx))
    }
}

#[derive(Clone, Debug)]
pub struct Change {
    pub env: EnvSpec,
    pub carriers: Carriers,
    tables: BTreeMap<String, ChangeTable>,
}

fn bad(m: impl Into<String>) -> EvalError {
    EvalError::Other(m.into())
}

impl Change {
    /// Builds the model, checking both change-structure axioms and the
    /// declared uniqueness flag on every finite table.
    pub fn new(env: EnvSpec) -> EvalResult<Self> {
        let mut tables = BTreeMap::new();
        for (name, t) in &env.types {
            let TypeSpec::Finite(f) = t else { continue };
            let Some(cs) = &f.changes else {
                return Err(bad(format!("finite carrier `{name}` has no change table")));
            };
            let pt = |s: &str| f.points.iter().position(|p| p == s).ok_or_else(|| bad(format!("`{name}`: unknown point `{s}`")));
            let ch = |s: &str| cs.names.iter().position(|p| p == s).ok_or_else(|| bad(format!("`{name}`: unknown change `{s}`")));
            let mut oplus = BTreeMap::new();
            for [x, d, y] in &cs.oplus {
                oplus.insert((pt(x)?, ch(d)?), pt(y)?);
            }
            let mut ominus = BTreeMap::new();
            for [y, x, d] in &cs.ominus {
                ominus.insert((pt(y)?, pt(x)?), ch(d)?);
            }
            let table = ChangeTable { names: cs.names.clone(), oplus, ominus, unique: cs.unique };
            let n = f.points.len();
            for x in 0..n {
                for y in 0..n {
                    let d = *table.ominus.get(&(y, x)).ok_or_else(|| bad(format!("`{name}`: {} ⊖ {} is undefined", f.points[y], f.points[x])))?;
                    if table.oplus.get(&(x, d)) != Some(&y) {
                        return Err(bad(format!("`{name}`: {} ⊕ ({} ⊖ {}) is not {}", f.points[x], f.points[y], f.points[x], f.points[y])));
                    }
                }
            }
            if table.unique && !table.is_unique() {
                return Err(bad(format!("`{name}` is declared with unique changes but has several changes between two points")));
            }
            tables.insert(name.clone(), table);
        }
        Ok(Change { carriers: Carriers::new(env.types.clone()), env, tables })
    }

    pub fn table(&self, n: &str) -> Option<&ChangeTable> {
        self.tables.get(n)
    }

    /// Whether `y ⊖ x` is the only change between any two points of every
    /// base carrier.
    pub fn unique(&self) -> bool {
        self.tables.values().all(|t| t.unique)
    }

    pub fn oplus(&self, ty: &Ty, x: &Value, dx: &Value) -> EvalResult<Value> {
        match ty {
            Ty::Bang(_, a) => self.oplus(a, x, dx),
            Ty::Base(n) => match self.carriers.base(n)? {
                TypeSpec::Real { .. } => Ok(Value::Real(x.as_real()? + dx.as_real()?)),
                TypeSpec::Naturals { .. } => {
                    let y = x.as_int()? + dx.as_int()?;
                    if y < 0 {
                        return Err(EvalError::NotAChange(format!("{} at {}", dx.as_int()?, x.as_int()?)));
                    }
                    Ok(Value::Int(y))
                }
                TypeSpec::Integers { .. } => Ok(Value::Int(x.as_int()? + dx.as_int()?)),
                TypeSpec::Bags { .. } => {
                    let (b, Value::BagChange(c)) = (x.as_bag()?, dx) else {
                        return Err(EvalError::shape(format!("expected a bag change, found {}", dx.kind())));
                    };
                    let kept = b.minus(&c.remove).ok_or_else(|| EvalError::NotAChange("removal of absent elements".into()))?;
                    Ok(Value::Bag(kept.union(&c.add)))
                }
                TypeSpec::Finite(_) => {
                    let t = &self.tables[n];
                    let (p, d) = (x.as_point()?, dx.as_point()?);
                    t.oplus.get(&(p, d)).map(|y| Value::Point(*y)).ok_or_else(|| {
                        EvalError::NotAChange(format!("{} is not a change at point #{p}", t.names.get(d).cloned().unwrap_or_default()))
                    })
                }
            },
            Ty::Product(a, b) | Ty::Tensor(a, b) => {
                Ok(Value::pair(self.oplus(a, &x.fst()?, &dx.fst()?)?, self.oplus(b, &x.snd()?, &dx.snd()?)?))
            }
            Ty::Arrow(a, b) | Ty::Lolli(a, b) => {
                let (me, a, b, f, phi) = (self.clone(), (**a).clone(), (**b).clone(), x.clone(), dx.clone());
                Ok(Value::fun(move |x| {
                    let z = me.nil(&a, &x)?;
                    me.oplus(&b, &f.apply(x.clone())?, &phi.apply(x)?.apply(z)?)
                }))
            }
        }
    }

    /// `y ⊖ x`, a change at `x`.
    pub fn ominus(&self, ty: &Ty, y: &Value, x: &Value) -> EvalResult<Value> {
        match ty {
            Ty::Bang(_, a) => self.ominus(a, y, x),
            Ty::Base(n) => match self.carriers.base(n)? {
                TypeSpec::Real { .. } => Ok(Value::Real(y.as_real()? - x.as_real()?)),
                TypeSpec::Naturals { .. } | TypeSpec::Integers { .. } => Ok(Value::Int(y.as_int()? - x.as_int()?)),
                TypeSpec::Bags { .. } => {
                    let (yb, xb) = (y.as_bag()?, x.as_bag()?);
                    let common = yb.meet(xb);
                    let rem = xb.minus(&common).expect("meet is contained");
                    let add = yb.minus(&common).expect("meet is contained");
                    Ok(Value::BagChange(BagChange::new(rem, add)))
                }
                TypeSpec::Finite(_) => {
                    let t = &self.tables[n];
                    let (q, p) = (y.as_point()?, x.as_point()?);
                    t.ominus.get(&(q, p)).map(|d| Value::Point(*d)).ok_or_else(|| EvalError::shape("ominus outside the table"))
                }
            },
            Ty::Product(a, b) | Ty::Tensor(a, b) => {
                Ok(Value::pair(self.ominus(a, &y.fst()?, &x.fst()?)?, self.ominus(b, &y.snd()?, &x.snd()?)?))
            }
            Ty::Arrow(a, b) | Ty::Lolli(a, b) => {
                let (me, a, b, g, f) = (self.clone(), (**a).clone(), (**b).clone(), y.clone(), x.clone());
                Ok(Value::fun(move |x| {
                    let (me, a, b, g, f) = (me.clone(), a.clone(), b.clone(), g.clone(), f.clone());
                    Ok(Value::fun(move |dx| {
                        let moved = me.oplus(&a, &x, &dx)?;
                        me.ominus(&b, &g.apply(moved)?, &f.apply(x.clone())?)
                    }))
                }))
            }
        }
    }

    /// `0_x = x ⊖ x`.
    pub fn nil(&self, ty: &Ty, x: &Value) -> EvalResult<Value> {
        self.ominus(ty, x, x)
    }

    /// `∂x + ∂y = ((x ⊕ ∂x) ⊕ ∂y) ⊖ x`.
    pub fn compose(&self, ty: &Ty, x: &Value, dx: &Value, dy: &Value) -> EvalResult<Value> {
        let y = self.oplus(ty, x, dx)?;
        let z = self.oplus(ty, &y, dy)?;
        self.ominus(ty, &z, x)
    }

    /// `∂f(x, ∂x) = f(x ⊕ ∂x) ⊖ f(x)`.
    pub fn derivative(&self, dom: &Ty, cod: &Ty, f: &Value, x: &Value, dx: &Value) -> EvalResult<Value> {
        let moved = self.oplus(dom, x, dx)?;
        self.ominus(cod, &f.apply(moved)?, &f.apply(x.clone())?)
    }

    /// Whether `dx` is a change at `x` (first-order carriers only).
    pub fn is_change(&self, ty: &Ty, x: &Value, dx: &Value) -> EvalResult<bool> {
        match ty {
            Ty::Arrow(..) | Ty::Lolli(..) => Ok(matches!(dx, Value::Fun(_))),
            Ty::Bang(_, a) => self.is_change(a, x, dx),
            Ty::Product(a, b) | Ty::Tensor(a, b) => {
                Ok(self.is_change(a, &x.fst()?, &dx.fst()?)? && self.is_change(b, &x.snd()?, &dx.snd()?)?)
            }
            Ty::Base(_) => match self.oplus(ty, x, dx) {
                Ok(_) => Ok(true),
                Err(EvalError::NotAChange(_)) => Ok(false),
                Err(e) => Err(e),
            },
        }
    }

    /// All changes at `x` that reach enumerated points.
    pub fn changes_from(&self, ty: &Ty, x: &Value) -> EvalResult<Vec<Value>> {
        let mut out = Vec::new();
        for y in self.carriers.points(ty)? {
            out.extend(self.diffs(ty, x, &y)?);
        }
        Ok(out)
    }

    /// Both change-structure axioms, `x ⊖ y ∈ Δ y` and `x ⊕ (y ⊖ x) = y`,
    /// on every enumerated pair; also `x ⊕ 0_x = x`.
    pub fn check_axioms(&self, ty: &Ty) -> EvalResult<usize> {
        let pts = self.carriers.points(ty)?;
        let mut n = 0;
        for x in &pts {
            let z = self.nil(ty, x)?;
            if !self.carriers.eq(ty, &self.oplus(ty, x, &z)?, x)? {
                return Err(EvalError::Unsound(format!("x ⊕ 0_x differs from x at {}", self.carriers.render(ty, x))));
            }
            for y in &pts {
                n += 1;
                let d = self.ominus(ty, y, x)?;
                if !self.is_change(ty, x, &d)? || !self.carriers.eq(ty, &self.oplus(ty, x, &d)?, y)? {
                    return Err(EvalError::Unsound(format!(
                        "x ⊕ (y ⊖ x) differs from y at x = {}, y = {}",
                        self.carriers.render(ty, x),
                        self.carriers.render(ty, y)
                    )));
                }
            }
        }
        Ok(n)
    }

    /// A change that the diagonal filler does not return unchanged, if any:
    /// `(x, dx, (x ⊕ dx) ⊖ x)`.
    pub fn eta_counterexample(&self, ty: &Ty) -> EvalResult<Option<(Value, Value, Value)>> {
        for x in self.carriers.points(ty)? {
            for dx in self.changes_from(ty, &x)? {
                let back = self.ominus(ty, &self.oplus(ty, &x, &dx)?, &x)?;
                if !self.diff_eq(ty, &back, &dx)? {
                    return Ok(Some((x, dx, back)));
                }
            }
        }
        Ok(None)
    }

    fn literal_change(&self, ty: &Ty, j: &Json) -> EvalResult<Value> {
        let err = || bad(format!("{j} is not a change literal for {}", crate::pretty::ty(ty)));
        match ty {
            Ty::Bang(_, a) => self.literal_change(a, j),
            Ty::Product(a, b) | Ty::Tensor(a, b) => match j.as_array().map(Vec::as_slice) {
                Some([x, y]) => Ok(Value::pair(self.literal_change(a, x)?, self.literal_change(b, y)?)),
                _ => Err(err()),
            },
            Ty::Arrow(..) | Ty::Lolli(..) => Err(bad("function changes cannot be given as literals")),
            Ty::Base(n) => match self.carriers.base(n)? {
                TypeSpec::Real { .. } => json_real(j).map(Value::Real).ok_or_else(err),
                TypeSpec::Naturals { .. } | TypeSpec::Integers { .. } => j.as_i64().map(Value::Int).ok_or_else(err),
                TypeSpec::Bags { .. } => {
                    let side = |k: &str| -> Option<Vec<u64>> {
                        j.get(k).map_or(Some(vec![]), |a| a.as_array().and_then(|a| a.iter().map(Json::as_u64).collect()))
                    };
                    let (r, a) = (side("remove").ok_or_else(err)?, side("add").ok_or_else(err)?);
                    Ok(Value::BagChange(BagChange::new(crate::semantics::Bag::of(&r), crate::semantics::Bag::of(&a))))
                }
                TypeSpec::Finite(_) => {
                    let s = j.as_str().ok_or_else(err)?;
                    self.tables[n].names.iter().position(|c| c == s).map(Value::Point).ok_or_else(err)
                }
            },
        }
    }
}

impl Backend for Change {
    fn name(&self) -> &'static str {
        "change"
    }

    fn constant(&self, name: &str, ty: &Ty) -> EvalResult<Value> {
        self.carriers.constant(name, self.env.consts.get(name), ty)
    }

    fn dconst(&self, name: &str, pred: &Pred) -> EvalResult<Value> {
        let j = self.env.dconsts.get(name).ok_or_else(|| EvalError::UnboundConst(name.to_string()))?;
        dvalue_from_json(pred, j, &|ty, j| self.literal_change(ty, j))
    }

    fn refl(&self, ty: &Ty, v: &Value) -> EvalResult<Value> {
        self.nil(ty, v)
    }

    fn closed_refl(&self, ty: &Ty, v: &Value) -> EvalResult<Value> {
        match ty {
            Ty::Bang(_, a) => self.closed_refl(a, v),
            Ty::Product(a, b) | Ty::Tensor(a, b) => Ok(Value::pair(self.closed_refl(a, &v.fst()?)?, self.closed_refl(b, &v.snd()?)?)),
            Ty::Base(n) => Ok(match self.carriers.base(n)? {
                TypeSpec::Real { .. } => Value::Real(0.0),
                TypeSpec::Naturals { .. } | TypeSpec::Integers { .. } => Value::Int(0),
                TypeSpec::Bags { .. } => Value::BagChange(BagChange::default()),
                TypeSpec::Finite(_) => self.nil(ty, v)?,
            }),
            Ty::Arrow(..) | Ty::Lolli(..) => self.nil(ty, v),
        }
    }

    fn fill_leaf(&self, req: &LeafRequest<'_>) -> EvalResult<Value> {
        let (x, y, z) = (req.x, req.y, req.z);
        let p = (req.f)(x, y)?;
        let d1 = self.ominus(z, &(req.f)(x, x)?, &p)?;
        let d3 = self.ominus(z, &(req.g)(x, y)?, &(req.g)(x, x)?)?;
        let q = self.oplus(z, &self.oplus(z, &self.oplus(z, &p, &d1)?, req.c)?, &d3)?;
        self.ominus(z, &q, &p)
    }

    fn holds(&self, ty: &Ty, t: &Value, u: &Value, d: &Value) -> EvalResult<bool> {
        if !self.is_change(ty, t, d)? {
            return Ok(false);
        }
        self.carriers.eq(ty, &self.oplus(ty, t, d)?, u)
    }

    fn points(&self, ty: &Ty) -> EvalResult<Vec<Value>> {
        self.carriers.points(ty)
    }

    fn diffs(&self, ty: &Ty, x: &Value, y: &Value) -> EvalResult<Vec<Value>> {
        match ty.unbang() {
            Ty::Base(n) if self.tables.contains_key(n.as_str()) => {
                let t = &self.tables[n.as_str()];
                let (p, q) = (x.as_point()?, y.as_point()?);
                Ok(t.changes_at(p).into_iter().filter(|d| t.oplus.get(&(p, *d)) == Some(&q)).map(Value::Point).collect())
            }
            _ => Ok(vec![self.ominus(ty, y, x)?]),
        }
    }

    fn value_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        self.carriers.eq(ty, a, b)
    }

    fn diff_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool> {
        match ty {
            Ty::Bang(_, t) => self.diff_eq(t, a, b),
            Ty::Product(l, r) | Ty::Tensor(l, r) => Ok(self.diff_eq(l, &a.fst()?, &b.fst()?)? && self.diff_eq(r, &a.snd()?, &b.snd()?)?),
            Ty::Arrow(d, c) | Ty::Lolli(d, c) => {
                for x in self.carriers.points(d)?.into_iter().take(32) {
                    let (fa, fb) = (a.apply(x.clone())?, b.apply(x.clone())?);
                    for dx in self.changes_from(d, &x)?.into_iter().take(32) {
                        if !self.diff_eq(c, &fa.apply(dx.clone())?, &fb.apply(dx)?)? {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            }
            Ty::Base(_) => plain_eq(a, b),
        }
    }

    fn render(&self, ty: &Ty, v: &Value) -> Json {
        self.carriers.render(ty, v)
    }

    fn render_diff(&self, ty: &Ty, v: &Value) -> Json {
        match (ty, v) {
            (Ty::Bang(_, a), v) => self.render_diff(a, v),
            (Ty::Product(a, b) | Ty::Tensor(a, b), Value::Pair(x, y)) => json!([self.render_diff(a, x), self.render_diff(b, y)]),
            (Ty::Base(n), Value::Point(i)) => json!(self.tables.get(n.as_str()).and_then(|t| t.names.get(*i)).cloned().unwrap_or_else(|| format!("#{i}"))),
            (_, Value::Int(d)) => json!(format!("{d:+}")),
            (_, Value::Real(d)) => render_real(*d),
            (_, Value::BagChange(c)) => json!({"remove": c.remove.elems(), "add": c.add.elems()}),
            _ => json!("<change>"),
        }
    }

    fn sound_rules(&self) -> RuleSet {
        RuleSet { eta: true, betad: true, dchain: true, cext: true, etad: self.unique(), ..RuleSet::default() }
    }
}
