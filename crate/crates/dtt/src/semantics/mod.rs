//! Interpretation of checked terms in a difference-category backend.
//!
//! Program terms become values; difference terms become values shaped by
//! their predicate: a backend difference at `D_A(t, u)`, pairs at products,
//! functions at both Pi forms. `J` is interpreted through the purified
//! motive: the generic code descends the pure predicate and hands each
//! `D`-leaf to the backend filler.

pub mod env;
pub mod value;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use crate::checker::{purify, Checker};
use crate::error::EvalError;
use crate::pretty;
use crate::syntax::{Calculus, Context, DTerm, Pred, RuleSet, Side, Term, Ty};

pub use env::{Carriers, ConstSpec, EnvSpec, TypeSpec};
pub use value::{Bag, BagChange, EvalResult, Func, Value};

/// An index arrow of a motive leaf, as a function of the two carrier points.
pub type Index = Arc<dyn Fn(&Value, &Value) -> EvalResult<Value> + Send + Sync>;

/// A filler request at one `D_Z`-leaf of a purified motive.
pub struct LeafRequest<'a> {
    pub carrier: &'a Ty,
    pub z: &'a Ty,
    pub x: &'a Value,
    pub y: &'a Value,
    pub diff: &'a Value,
    /// The branch at `x`, restricted to this leaf.
    pub c: &'a Value,
    pub f: &'a Index,
    pub g: &'a Index,
}

/// The contract every backend supplies.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Monoidal backends interpret only the sub-exponential calculus.
    fn monoidal(&self) -> bool {
        false
    }

    fn constant(&self, name: &str, ty: &Ty) -> EvalResult<Value>;

    fn dconst(&self, name: &str, pred: &Pred) -> EvalResult<Value>;

    /// `r`: the self-difference of `v`.
    fn refl(&self, ty: &Ty, v: &Value) -> EvalResult<Value>;

    /// The closed form of the self-difference stated for this model,
    /// computed independently of `refl`.
    fn closed_refl(&self, ty: &Ty, v: &Value) -> EvalResult<Value>;

    /// `j` at a leaf.
    fn fill_leaf(&self, req: &LeafRequest<'_>) -> EvalResult<Value>;

    /// Whether `d` is a difference from `t` to `u`.
    fn holds(&self, ty: &Ty, t: &Value, u: &Value, d: &Value) -> EvalResult<bool>;

    /// Enumeration, grid or symbolic sample of a carrier.
    fn points(&self, ty: &Ty) -> EvalResult<Vec<Value>>;

    /// Some differences from `x` to `y`.
    fn diffs(&self, ty: &Ty, x: &Value, y: &Value) -> EvalResult<Vec<Value>>;

    fn value_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool>;

    fn diff_eq(&self, ty: &Ty, a: &Value, b: &Value) -> EvalResult<bool>;

    fn render(&self, ty: &Ty, v: &Value) -> Json;

    fn render_diff(&self, ty: &Ty, v: &Value) -> Json;

    /// Rewrite rules this model validates.
    fn sound_rules(&self) -> RuleSet;
}

/// Structure of a pure predicate.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Leaf(Ty),
    Prod(Arc<Shape>, Arc<Shape>),
    Point(Ty, Arc<Shape>),
    DiffPi(Ty, Arc<Shape>),
}

impl Shape {
    pub fn of(p: &Pred) -> Shape {
        match p {
            Pred::Diff(z, ..) => Shape::Leaf(z.clone()),
            Pred::Prod(a, b) => Shape::Prod(Arc::new(Shape::of(a)), Arc::new(Shape::of(b))),
            Pred::PiPoint(b, q) => Shape::Point(b.clone(), Arc::new(Shape::of(q))),
            Pred::PiDiff(b, q) => Shape::DiffPi(b.clone(), Arc::new(Shape::of(q))),
        }
    }
}

struct At {
    carrier: Ty,
    x: Value,
    y: Value,
    diff: Value,
}

fn map_index(f: &Index, k: impl Fn(Value) -> EvalResult<Value> + Send + Sync + 'static) -> Index {
    let f = f.clone();
    Arc::new(move |a, b| k(f(a, b)?))
}

/// Descends a pure predicate, building the filler value leafwise.
fn fill(be: &Arc<dyn Backend>, shape: &Arc<Shape>, at: &Arc<At>, c: Value, f: Index, g: Index) -> EvalResult<Value> {
    match shape.as_ref() {
        Shape::Leaf(z) => be.fill_leaf(&LeafRequest {
            carrier: &at.carrier,
            z,
            x: &at.x,
            y: &at.y,
            diff: &at.diff,
            c: &c,
            f: &f,
            g: &g,
        }),
        Shape::Prod(l, r) => {
            let (c1, c2) = (c.fst()?, c.snd()?);
            let a = fill(be, l, at, c1, map_index(&f, |v| v.fst()), map_index(&g, |v| v.fst()))?;
            let b = fill(be, r, at, c2, map_index(&f, |v| v.snd()), map_index(&g, |v| v.snd()))?;
            Ok(Value::pair(a, b))
        }
        Shape::Point(_, s) => {
            let (be, s, at) = (be.clone(), s.clone(), at.clone());
            Ok(Value::fun(move |b| {
                let b2 = b.clone();
                let b3 = b.clone();
                fill(&be, &s, &at, c.apply(b)?, map_index(&f, move |v| v.apply(b2.clone())), map_index(&g, move |v| v.apply(b3.clone())))
            }))
        }
        Shape::DiffPi(_, s) => {
            let (be, s, at) = (be.clone(), s.clone(), at.clone());
            Ok(Value::fun3(move |b1, b2, d| {
                let (p1, p2) = (b1.clone(), b2.clone());
                let (q1, q2) = (b1.clone(), b2.clone());
                fill(
                    &be,
                    &s,
                    &at,
                    c.apply3(b1, b2, d)?,
                    map_index(&f, move |v| v.apply(p1.clone())?.apply(p2.clone())),
                    map_index(&g, move |v| v.apply(q1.clone())?.apply(q2.clone())),
                )
            }))
        }
    }
}

// ---------------------------------------------------------------------------
// compiled terms

enum PNode {
    Var(usize),
    Val(Value),
    Lam(Arc<PNode>),
    App(Box<PNode>, Box<PNode>),
    Pair(Box<PNode>, Box<PNode>),
    Proj(Side, Box<PNode>),
    Let(Box<PNode>, Arc<PNode>),
    LetPair(Box<PNode>, Arc<PNode>),
}

fn lookup(env: &[Value], i: usize) -> EvalResult<Value> {
    env.len()
        .checked_sub(i + 1)
        .map(|k| env[k].clone())
        .ok_or_else(|| EvalError::shape(format!("unbound variable #{i} during evaluation")))
}

fn run(n: &PNode, env: &[Value]) -> EvalResult<Value> {
    match n {
        PNode::Var(i) => lookup(env, *i),
        PNode::Val(v) => Ok(v.clone()),
        PNode::Lam(body) => {
            let (body, env) = (body.clone(), env.to_vec());
            Ok(Value::fun(move |a| {
                let mut e = env.clone();
                e.push(a);
                run(&body, &e)
            }))
        }
        PNode::App(f, a) => run(f, env)?.apply(run(a, env)?),
        PNode::Pair(a, b) => Ok(Value::pair(run(a, env)?, run(b, env)?)),
        PNode::Proj(Side::Fst, p) => run(p, env)?.fst(),
        PNode::Proj(Side::Snd, p) => run(p, env)?.snd(),
        PNode::Let(s, u) => {
            let mut e = env.to_vec();
            e.push(run(s, env)?);
            run(u, &e)
        }
        PNode::LetPair(s, u) => {
            let v = run(s, env)?;
            let mut e = env.to_vec();
            e.push(v.fst()?);
            e.push(v.snd()?);
            run(u, &e)
        }
    }
}

struct JNode {
    carrier: Ty,
    shape: Arc<Shape>,
    f: Arc<PNode>,
    g: Arc<PNode>,
    lhs: PNode,
    rhs: PNode,
    diff: DNode,
    branch: DNode,
}

enum DNode {
    Var(usize),
    Val(Value),
    LamPoint(Arc<DNode>),
    AppPoint(Box<DNode>, PNode),
    LamDiff(Arc<DNode>),
    AppDiff(Box<DNode>, PNode, PNode, Box<DNode>),
    Pair(Box<DNode>, Box<DNode>),
    Proj(Side, Box<DNode>),
    Refl(Ty, PNode),
    J(Box<JNode>),
}

#[derive(Clone, Default)]
struct DEnv {
    prog: Vec<Value>,
    diff: Vec<Value>,
}

fn run_d(be: &Arc<dyn Backend>, n: &DNode, env: &DEnv) -> EvalResult<Value> {
    match n {
        DNode::Var(i) => lookup(&env.diff, *i),
        DNode::Val(v) => Ok(v.clone()),
        DNode::LamPoint(body) => {
            let (be, body, env) = (be.clone(), body.clone(), env.clone());
            Ok(Value::fun(move |a| {
                let mut e = env.clone();
                e.prog.push(a);
                run_d(&be, &body, &e)
            }))
        }
        DNode::AppPoint(f, t) => run_d(be, f, env)?.apply(run(t, &env.prog)?),
        DNode::LamDiff(body) => {
            let (be, body, env) = (be.clone(), body.clone(), env.clone());
            Ok(Value::fun3(move |x, y, d| {
                let mut e = env.clone();
                e.prog.push(x);
                e.prog.push(y);
                e.diff.push(d);
                run_d(&be, &body, &e)
            }))
        }
        DNode::AppDiff(f, t, u, d) => {
            run_d(be, f, env)?.apply3(run(t, &env.prog)?, run(u, &env.prog)?, run_d(be, d, env)?)
        }
        DNode::Pair(a, b) => Ok(Value::pair(run_d(be, a, env)?, run_d(be, b, env)?)),
        DNode::Proj(Side::Fst, p) => run_d(be, p, env)?.fst(),
        DNode::Proj(Side::Snd, p) => run_d(be, p, env)?.snd(),
        DNode::Refl(ty, t) => be.refl(ty, &run(t, &env.prog)?),
        DNode::J(j) => {
            let x = run(&j.lhs, &env.prog)?;
            let y = run(&j.rhs, &env.prog)?;
            let diff = run_d(be, &j.diff, env)?;
            let mut e = env.clone();
            e.prog.push(x.clone());
            let c = run_d(be, &j.branch, &e)?;
            let index = |node: &Arc<PNode>| -> Index {
                let (node, prog) = (node.clone(), env.prog.clone());
                Arc::new(move |a: &Value, b: &Value| {
                    let mut p = prog.clone();
                    p.push(a.clone());
                    p.push(b.clone());
                    run(&node, &p)
                })
            };
            let at = Arc::new(At { carrier: j.carrier.clone(), x, y, diff });
            fill(be, &j.shape, &at, c, index(&j.f), index(&j.g))
        }
    }
}

// ---------------------------------------------------------------------------
// interpreter

/// Outcome of an extensional check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Verdict {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 8 {
            self.failures.push(msg);
        }
    }

    fn merge(&mut self, o: Verdict) {
        self.checked += o.checked;
        for f in o.failures {
            self.fail(f);
        }
    }
}

pub struct Interp {
    pub backend: Arc<dyn Backend>,
    pub checker: Checker,
    /// Largest number of sample points per quantifier.
    pub samples: usize,
    pub seed: u64,
}

impl Interp {
    pub fn new(backend: Arc<dyn Backend>, checker: Checker) -> Self {
        Interp { backend, checker, samples: 24, seed: 42 }
    }

    pub fn with_samples(mut self, samples: usize, seed: u64) -> Self {
        self.samples = samples.max(1);
        self.seed = seed;
        self
    }

    /// Monoidal backends only accept programs of the sub-exponential
    /// calculus.
    pub fn admits(&self) -> EvalResult<()> {
        if self.backend.monoidal() && self.checker.calculus != Calculus::Fuzz {
            return Err(EvalError::Unsupported {
                backend: self.backend.name(),
                what: "programs outside the sub-exponential calculus".into(),
            });
        }
        Ok(())
    }

    fn compile(&self, t: &Term, consts: &mut BTreeMap<String, Value>) -> EvalResult<PNode> {
        let b = Box::new;
        Ok(match t {
            Term::Var(i) => PNode::Var(*i),
            Term::Const(c) => {
                if let Some(v) = consts.get(c) {
                    return Ok(PNode::Val(v.clone()));
                }
                let ty = self.checker.sig.const_ty(c).ok_or_else(|| EvalError::UnboundConst(c.clone()))?;
                let v = self.backend.constant(c, &ty)?;
                consts.insert(c.clone(), v.clone());
                PNode::Val(v)
            }
            Term::Lam(_, body) => PNode::Lam(Arc::new(self.compile(body, consts)?)),
            Term::App(f, a) => PNode::App(b(self.compile(f, consts)?), b(self.compile(a, consts)?)),
            Term::Pair(x, y) | Term::Tensor(x, y) => PNode::Pair(b(self.compile(x, consts)?), b(self.compile(y, consts)?)),
            Term::Proj(s, p) => PNode::Proj(*s, b(self.compile(p, consts)?)),
            Term::Bang(x) => self.compile(x, consts)?,
            Term::LetBang(s, u) => PNode::Let(b(self.compile(s, consts)?), Arc::new(self.compile(u, consts)?)),
            Term::LetTensor(s, u) => PNode::LetPair(b(self.compile(s, consts)?), Arc::new(self.compile(u, consts)?)),
        })
    }

    fn compile_d(&self, ctx: &mut Context, a: &DTerm, consts: &mut BTreeMap<String, Value>) -> EvalResult<DNode> {
        let b = Box::new;
        let terr = |e: crate::error::TypeError| EvalError::Other(format!("ill-typed term: {e}"));
        Ok(match a {
            DTerm::Var(i) => DNode::Var(*i),
            DTerm::Const(c) => {
                let p = self.checker.sig.dconsts.get(c).ok_or_else(|| EvalError::UnboundConst(c.clone()))?;
                DNode::Val(self.backend.dconst(c, p)?)
            }
            DTerm::LamPoint(ty, body) => {
                ctx.push_prog("x", ty.clone());
                let r = self.compile_d(ctx, body, consts);
                ctx.pop_prog();
                DNode::LamPoint(Arc::new(r?))
            }
            DTerm::AppPoint(f, t) => DNode::AppPoint(b(self.compile_d(ctx, f, consts)?), self.compile(t, consts)?),
            DTerm::LamDiff(ty, body) => {
                ctx.push_prog("x", ty.clone());
                ctx.push_prog("y", ty.clone());
                ctx.push_diff("e", Pred::Diff(ty.clone(), Term::Var(1), Term::Var(0)));
                let r = self.compile_d(ctx, body, consts);
                ctx.pop_diff();
                ctx.pop_prog();
                ctx.pop_prog();
                DNode::LamDiff(Arc::new(r?))
            }
            DTerm::AppDiff(f, t, u, d) => DNode::AppDiff(
                b(self.compile_d(ctx, f, consts)?),
                self.compile(t, consts)?,
                self.compile(u, consts)?,
                b(self.compile_d(ctx, d, consts)?),
            ),
            DTerm::Pair(x, y) => DNode::Pair(b(self.compile_d(ctx, x, consts)?), b(self.compile_d(ctx, y, consts)?)),
            DTerm::Proj(s, x) => DNode::Proj(*s, b(self.compile_d(ctx, x, consts)?)),
            DTerm::Refl(t) => {
                let ty = self.checker.infer_program(ctx, t).map_err(terr)?;
                DNode::Refl(ty, self.compile(t, consts)?)
            }
            DTerm::J(j) => {
                let pf = purify(&j.motive.body);
                let lhs = self.compile(&j.lhs, consts)?;
                let rhs = self.compile(&j.rhs, consts)?;
                let diff = self.compile_d(ctx, &j.diff, consts)?;
                ctx.push_prog("z", j.motive.carrier.clone());
                let branch = self.compile_d(ctx, &j.branch, consts);
                ctx.pop_prog();
                DNode::J(Box::new(JNode {
                    carrier: j.motive.carrier.clone(),
                    shape: Arc::new(Shape::of(&pf.pure)),
                    f: Arc::new(self.compile(&pf.lhs, consts)?),
                    g: Arc::new(self.compile(&pf.rhs, consts)?),
                    lhs,
                    rhs,
                    diff,
                    branch: branch?,
                }))
            }
        })
    }

    /// Evaluates a program term under values for its free variables
    /// (index 0 is the last).
    pub fn eval_term_in(&self, env: &[Value], t: &Term) -> EvalResult<Value> {
        let node = self.compile(t, &mut BTreeMap::new())?;
        run(&node, env)
    }

    pub fn eval_term(&self, t: &Term) -> EvalResult<Value> {
        self.eval_term_in(&[], t)
    }

    /// Evaluates a closed difference term.
    pub fn eval_dterm(&self, a: &DTerm) -> EvalResult<Value> {
        let node = self.compile_d(&mut Context::new(), a, &mut BTreeMap::new())?;
        run_d(&self.backend, &node, &DEnv::default())
    }

    /// Deterministic sample of a carrier.
    pub fn sample(&self, ty: &Ty) -> EvalResult<Vec<Value>> {
        let pts = self.backend.points(ty)?;
        Ok(self.subsample(pts, &pretty::ty(ty)))
    }

    fn subsample<T: Clone>(&self, xs: Vec<T>, salt: &str) -> Vec<T> {
        if xs.len() <= self.samples {
            return xs;
        }
        let h = salt.bytes().fold(self.seed ^ 0x9e37_79b9_7f4a_7c15, |h, b| h.rotate_left(5) ^ b as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let mut idx = sample(&mut rng, xs.len(), self.samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| xs[i].clone()).collect()
    }

    /// Sampled pairs of points with the differences between them.
    fn diff_triples(&self, ty: &Ty) -> EvalResult<Vec<(Value, Value, Value)>> {
        let pts = self.sample(ty)?;
        let mut pairs = Vec::new();
        for x in &pts {
            for y in &pts {
                pairs.push((x.clone(), y.clone()));
            }
        }
        let pairs = self.subsample(pairs, &format!("pairs {}", pretty::ty(ty)));
        let mut out = Vec::new();
        for (x, y) in pairs {
            for d in self.backend.diffs(ty, &x, &y)? {
                out.push((x.clone(), y.clone(), d));
            }
        }
        Ok(out)
    }

    /// Checks that `v` inhabits the closed predicate `p`.
    pub fn holds_pred(&self, p: &Pred, v: &Value) -> EvalResult<Verdict> {
        self.holds_in(&mut Vec::new(), p, v)
    }

    fn holds_in(&self, env: &mut Vec<Value>, p: &Pred, v: &Value) -> EvalResult<Verdict> {
        let mut out = Verdict::default();
        match p {
            Pred::Diff(a, t, u) => {
                let (tv, uv) = (self.eval_term_in(env, t)?, self.eval_term_in(env, u)?);
                out.checked = 1;
                if !self.backend.holds(a, &tv, &uv, v)? {
                    out.fail(format!(
                        "{} is not a difference from {} to {}",
                        self.backend.render_diff(a, v),
                        self.backend.render(a, &tv),
                        self.backend.render(a, &uv)
                    ));
                }
            }
            Pred::Prod(l, r) => {
                out.merge(self.holds_in(env, l, &v.fst()?)?);
                out.merge(self.holds_in(env, r, &v.snd()?)?);
            }
            Pred::PiPoint(b, q) => {
                for x in self.sample(b)? {
                    env.push(x.clone());
                    let r = v.apply(x).and_then(|w| self.holds_in(env, q, &w));
                    env.pop();
                    out.merge(r?);
                }
            }
            Pred::PiDiff(b, q) => {
                for (x, y, d) in self.diff_triples(b)? {
                    env.push(x.clone());
                    env.push(y.clone());
                    let r = v.apply3(x, y, d).and_then(|w| self.holds_in(env, q, &w));
                    env.pop();
                    env.pop();
                    out.merge(r?);
                }
            }
        }
        Ok(out)
    }

    /// Compares two values of the closed predicate `p`.
    pub fn same_at_pred(&self, p: &Pred, v: &Value, w: &Value) -> EvalResult<Verdict> {
        self.same_in(p, v, w)
    }

    fn same_in(&self, p: &Pred, v: &Value, w: &Value) -> EvalResult<Verdict> {
        let mut out = Verdict::default();
        match p {
            Pred::Diff(a, ..) => {
                out.checked = 1;
                if !self.backend.diff_eq(a, v, w)? {
                    out.fail(format!("{} differs from {}", self.backend.render_diff(a, v), self.backend.render_diff(a, w)));
                }
            }
            Pred::Prod(l, r) => {
                out.merge(self.same_in(l, &v.fst()?, &w.fst()?)?);
                out.merge(self.same_in(r, &v.snd()?, &w.snd()?)?);
            }
            Pred::PiPoint(b, q) => {
                for x in self.sample(b)? {
                    out.merge(self.same_in(q, &v.apply(x.clone())?, &w.apply(x)?)?);
                }
            }
            Pred::PiDiff(b, q) => {
                for (x, y, d) in self.diff_triples(b)? {
                    let (a1, a2) = (v.apply3(x.clone(), y.clone(), d.clone())?, w.apply3(x, y, d)?);
                    out.merge(self.same_in(q, &a1, &a2)?);
                }
            }
        }
        Ok(out)
    }

    /// Renders a difference value along its closed predicate.
    pub fn render_at_pred(&self, p: &Pred, v: &Value) -> Json {
        self.render_in(p, v, 0).unwrap_or_else(|e| json!(format!("error: {e}")))
    }

    fn render_in(&self, p: &Pred, v: &Value, depth: usize) -> EvalResult<Json> {
        Ok(match p {
            Pred::Diff(a, ..) => self.backend.render_diff(a, v),
            Pred::Prod(l, r) => json!([self.render_in(l, &v.fst()?, depth)?, self.render_in(r, &v.snd()?, depth)?]),
            Pred::PiPoint(b, q) => {
                if depth > 1 {
                    return Ok(json!("<function>"));
                }
                let mut rows = Vec::new();
                for x in self.sample(b)?.into_iter().take(8) {
                    let w = v.apply(x.clone())?;
                    rows.push(json!({"at": self.backend.render(b, &x), "value": self.render_in(q, &w, depth + 1)?}));
                }
                Json::Array(rows)
            }
            Pred::PiDiff(b, q) => {
                if depth > 1 {
                    return Ok(json!("<function>"));
                }
                let mut rows = Vec::new();
                for (x, y, d) in self.diff_triples(b)?.into_iter().take(8) {
                    let w = v.apply3(x.clone(), y.clone(), d.clone())?;
                    rows.push(json!({
                        "x": self.backend.render(b, &x),
                        "y": self.backend.render(b, &y),
                        "d": self.backend.render_diff(b, &d),
                        "value": self.render_in(q, &w, depth + 1)?,
                    }));
                }
                Json::Array(rows)
            }
        })
    }

    /// `U f = p ∘ i` with `i(x) = ((x, f x), r(f x))` and `p` the second
    /// projection of the base pair.
    pub fn factorize(&self, cod: &Ty, f: &Value) -> (Value, Value) {
        let (be, cod, f) = (self.backend.clone(), cod.clone(), f.clone());
        let i = Value::fun(move |x| {
            let fx = f.apply(x.clone())?;
            let r = be.refl(&cod, &fx)?;
            Ok(Value::pair(Value::pair(x, fx), r))
        });
        let p = Value::fun(|w| w.fst()?.snd());
        (i, p)
    }

    /// Checks `p ∘ i = f` and the closed form of `i` on sampled inputs.
    pub fn check_factorization(&self, ty: &Ty, f: &Value) -> EvalResult<Verdict> {
        let Some((dom, cod)) = ty.unbang().as_function() else {
            return Err(EvalError::Other(format!("{} is not a function type", pretty::ty(ty))));
        };
        let (i, p) = self.factorize(cod, f);
        let mut out = Verdict::default();
        for x in self.sample(dom)? {
            out.checked += 1;
            let ix = i.apply(x.clone())?;
            let fx = f.apply(x.clone())?;
            if !self.backend.value_eq(cod, &p.apply(ix.clone())?, &fx)? {
                out.fail(format!("p(i({})) differs from f", self.backend.render(dom, &x)));
            }
            let (base, r) = ix.as_pair()?;
            let ok_base = self.backend.value_eq(dom, &base.fst()?, &x)? && self.backend.value_eq(cod, &base.snd()?, &fx)?;
            let closed = self.backend.closed_refl(cod, &fx)?;
            if !ok_base || !self.backend.diff_eq(cod, r, &closed)? {
                out.fail(format!("i({}) does not have the closed form", self.backend.render(dom, &x)));
            }
        }
        Ok(out)
    }
}

/// Reads a difference-constant value along its predicate: pairs at
/// products, constant functions at both Pi forms.
pub fn dvalue_from_json(p: &Pred, j: &Json, leaf: &dyn Fn(&Ty, &Json) -> EvalResult<Value>) -> EvalResult<Value> {
    match p {
        Pred::Diff(a, ..) => leaf(a, j),
        Pred::Prod(l, r) => match j.as_array().map(Vec::as_slice) {
            Some([x, y]) => Ok(Value::pair(dvalue_from_json(l, x, leaf)?, dvalue_from_json(r, y, leaf)?)),
            _ => Err(EvalError::Other(format!("expected a pair literal, found {j}"))),
        },
        Pred::PiPoint(_, q) => {
            let v = dvalue_from_json(q, j, leaf)?;
            Ok(Value::fun(move |_| Ok(v.clone())))
        }
        Pred::PiDiff(_, q) => {
            let v = dvalue_from_json(q, j, leaf)?;
            Ok(Value::fun3(move |_, _, _| Ok(v.clone())))
        }
    }
}
