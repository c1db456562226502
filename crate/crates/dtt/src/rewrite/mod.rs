//! Directed rewriting and normalization for both term sorts.

pub mod term;

use std::collections::{HashSet, VecDeque};

use crate::error::RewriteError;
use crate::syntax::{app, der, proj, var, Context, DTerm, Equation, JElim, Motive, Pred, RuleSet, Side, Term, Ty};

pub const DEFAULT_FUEL: usize = 10_000;

/// Fuel default, overridable through `DTTC_FUEL`.
pub fn default_fuel() -> usize {
    std::env::var("DTTC_FUEL").ok().and_then(|s| s.parse().ok()).filter(|n| *n > 0).unwrap_or(DEFAULT_FUEL)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    #[default]
    Outermost,
    Innermost,
}

/// Type information some rules need (the projection and fext2 rules).
pub trait Typer {
    fn infer_program(&self, ctx: &Context, t: &Term) -> Option<Ty>;
    fn infer_diff(&self, ctx: &Context, a: &DTerm) -> Option<Pred>;
}

#[derive(Clone, Copy)]
pub struct Rewriter<'a> {
    pub rules: RuleSet,
    pub fuel: usize,
    pub strategy: Strategy,
    pub typer: Option<&'a dyn Typer>,
    pub equations: &'a [Equation],
}

type Rule<'a> = fn(&Rewriter<'a>, &Context, &DTerm) -> Option<DTerm>;

struct Budget {
    left: usize,
    used: usize,
    last: &'static str,
}

impl Budget {
    fn new(fuel: usize) -> Self {
        Budget { left: fuel, used: 0, last: "none" }
    }
    fn spend(&mut self, name: &'static str) -> Result<(), RewriteError> {
        self.last = name;
        if self.left == 0 {
            return Err(RewriteError::FuelExhausted { steps: self.used, last: name.to_string() });
        }
        self.left -= 1;
        self.used += 1;
        Ok(())
    }
}

/// Full βη normalization of a program term.
pub fn conv_term(t: &Term, fuel: usize) -> Result<Term, RewriteError> {
    conv_term_with(t, &[], fuel)
}

/// βη normalization plus the declared constant equations.
pub fn conv_term_with(t: &Term, eqs: &[Equation], fuel: usize) -> Result<Term, RewriteError> {
    let mut b = Budget::new(fuel);
    conv_with(t, eqs, &mut b)
}

fn conv_with(t: &Term, eqs: &[Equation], b: &mut Budget) -> Result<Term, RewriteError> {
    let mut cur = t.clone();
    while let Some((next, name)) = term::step_with(&cur, true, eqs) {
        b.spend(name)?;
        cur = next;
    }
    Ok(cur)
}

impl<'a> Rewriter<'a> {
    pub fn new(rules: RuleSet) -> Self {
        Rewriter { rules, fuel: default_fuel(), strategy: Strategy::Outermost, typer: None, equations: &[] }
    }

    pub fn with_fuel(mut self, fuel: usize) -> Self {
        self.fuel = fuel;
        self
    }

    pub fn with_strategy(mut self, s: Strategy) -> Self {
        self.strategy = s;
        self
    }

    pub fn with_typer(mut self, t: &'a dyn Typer) -> Self {
        self.typer = Some(t);
        self
    }

    pub fn with_equations(mut self, eqs: &'a [Equation]) -> Self {
        self.equations = eqs;
        self
    }

    fn conv(&self, t: &Term) -> Option<Term> {
        conv_term_with(t, self.equations, self.fuel).ok()
    }

    fn same(&self, t: &Term, u: &Term) -> bool {
        t == u || matches!((self.conv(t), self.conv(u)), (Some(a), Some(b)) if a == b)
    }

    pub fn normalize_term(&self, t: &Term) -> Result<Term, RewriteError> {
        conv_term_with(t, self.equations, self.fuel)
    }

    pub fn equal_term(&self, t: &Term, u: &Term) -> Result<bool, RewriteError> {
        Ok(self.normalize_term(t)? == self.normalize_term(u)?)
    }

    // ------------------------------------------------------------ predicates

    pub fn normalize_pred(&self, p: &Pred) -> Result<Pred, RewriteError> {
        let mut b = Budget::new(self.fuel);
        self.norm_pred(p, &mut b)
    }

    fn norm_pred(&self, p: &Pred, b: &mut Budget) -> Result<Pred, RewriteError> {
        Ok(match p {
            Pred::Diff(a, t, u) => {
                let (t, u) = (conv_with(t, self.equations, b)?, conv_with(u, self.equations, b)?);
                match a {
                    Ty::Product(a1, a2) | Ty::Tensor(a1, a2) if self.rules.cext => {
                        b.spend("cext")?;
                        let l = Pred::Diff(a1.as_ref().clone(), proj(Side::Fst, t.clone()), proj(Side::Fst, u.clone()));
                        let r = Pred::Diff(a2.as_ref().clone(), proj(Side::Snd, t), proj(Side::Snd, u));
                        Pred::prod(self.norm_pred(&l, b)?, self.norm_pred(&r, b)?)
                    }
                    Ty::Arrow(a1, b1) | Ty::Lolli(a1, b1) if self.rules.fext1 => {
                        b.spend("fext1")?;
                        let body = Pred::Diff(b1.as_ref().clone(), app(t.shift(1, 0), var(0)), app(u.shift(1, 0), var(0)));
                        Pred::PiPoint(a1.as_ref().clone(), Box::new(self.norm_pred(&body, b)?))
                    }
                    Ty::Arrow(a1, b1) | Ty::Lolli(a1, b1) if self.rules.fext2 => {
                        b.spend("fext2")?;
                        let body = Pred::Diff(b1.as_ref().clone(), app(t.shift(2, 0), var(1)), app(u.shift(2, 0), var(0)));
                        Pred::PiDiff(a1.as_ref().clone(), Box::new(self.norm_pred(&body, b)?))
                    }
                    _ => Pred::Diff(a.clone(), t, u),
                }
            }
            Pred::Prod(p, q) => Pred::prod(self.norm_pred(p, b)?, self.norm_pred(q, b)?),
            Pred::PiPoint(a, p) => Pred::PiPoint(a.clone(), Box::new(self.norm_pred(p, b)?)),
            Pred::PiDiff(a, p) => Pred::PiDiff(a.clone(), Box::new(self.norm_pred(p, b)?)),
        })
    }

    pub fn equal_pred(&self, p: &Pred, q: &Pred) -> Result<bool, RewriteError> {
        Ok(p == q || self.normalize_pred(p)? == self.normalize_pred(q)?)
    }

    // ------------------------------------------------------- difference terms

    fn rules_list(&self) -> Vec<(&'static str, Rule<'a>)> {
        let r = &self.rules;
        let mut v: Vec<(&'static str, Rule<'a>)> = vec![("beta", Self::r_beta)];
        if r.betad {
            v.push(("betad", Self::r_betad));
        }
        if r.etad {
            v.push(("etad", Self::r_etad));
        }
        if r.jw {
            v.push(("jw", Self::r_jw));
        }
        if r.dchain {
            v.push(("dchain", Self::r_dchain));
        }
        if r.cext {
            v.push(("jxa", Self::r_jxa));
            v.push(("jxb", Self::r_jxb));
            v.push(("jxc", Self::r_jxc));
        }
        if r.fext1 {
            v.push(("jl1a", Self::r_jl1a));
            if r.cext {
                v.push(("jl1b", Self::r_jl1b));
            }
        }
        if r.fext2 {
            v.push(("jl2a", Self::r_jl2a));
            if r.cext {
                v.push(("jl2b", Self::r_jl2b));
            }
        }
        if r.eta {
            v.push(("eta", Self::r_eta));
        }
        if r.jeta_plus {
            v.push(("jeta-plus", Self::r_jeta_plus_eps));
            v.push(("jeta-plus", Self::r_jeta_plus_point));
        }
        v
    }

    fn root(&self, ctx: &Context, a: &DTerm) -> Option<(DTerm, &'static str)> {
        self.rules_list().into_iter().find_map(|(n, f)| f(self, ctx, a).map(|r| (r, n)))
    }

    /// One step under the configured strategy.
    pub fn step(&self, ctx: &Context, a: &DTerm) -> Option<(DTerm, &'static str)> {
        let mut ctx = ctx.clone();
        match self.strategy {
            Strategy::Outermost => self.root(&ctx, a).or_else(|| self.step_children(&mut ctx, a)),
            Strategy::Innermost => self.step_children(&mut ctx, a).or_else(|| self.root(&ctx, a)),
        }
    }

    fn step_in(&self, ctx: &mut Context, a: &DTerm) -> Option<(DTerm, &'static str)> {
        match self.strategy {
            Strategy::Outermost => self.root(ctx, a).or_else(|| self.step_children(ctx, a)),
            Strategy::Innermost => self.step_children(ctx, a).or_else(|| self.root(ctx, a)),
        }
    }

    /// Normalizes a program subterm in one go; falls back to a single step
    /// when that runs out of fuel so the outer budget reports it.
    fn term_step(&self, t: &Term) -> Option<Term> {
        match self.conv(t) {
            Some(n) => (n != *t).then_some(n),
            None => term::step_with(t, true, self.equations).map(|r| r.0),
        }
    }

    fn pred_step(&self, p: &Pred) -> Option<Pred> {
        match self.normalize_pred(p) {
            Ok(n) => (n != *p).then_some(n),
            Err(_) => pred_single_step(p, self.equations),
        }
    }

    fn step_children(&self, ctx: &mut Context, a: &DTerm) -> Option<(DTerm, &'static str)> {
        let b = Box::new;
        match a {
            DTerm::Var(_) | DTerm::Const(_) => None,
            DTerm::Refl(t) => self.term_step(t).map(|t| (DTerm::Refl(t), "beta")),
            DTerm::LamPoint(ty, body) => {
                ctx.push_prog("x", ty.clone());
                let r = self.step_in(ctx, body);
                ctx.pop_prog();
                r.map(|(x, n)| (DTerm::LamPoint(ty.clone(), b(x)), n))
            }
            DTerm::LamDiff(ty, body) => {
                push_diff_binder(ctx, ty);
                let r = self.step_in(ctx, body);
                pop_diff_binder(ctx);
                r.map(|(x, n)| (DTerm::LamDiff(ty.clone(), b(x)), n))
            }
            DTerm::AppPoint(f, t) => {
                if let Some((f2, n)) = self.step_in(ctx, f) {
                    return Some((DTerm::AppPoint(b(f2), t.clone()), n));
                }
                self.term_step(t).map(|t| (DTerm::AppPoint(f.clone(), t), "beta"))
            }
            DTerm::AppDiff(f, t, u, d) => {
                if let Some((f2, n)) = self.step_in(ctx, f) {
                    return Some((DTerm::AppDiff(b(f2), t.clone(), u.clone(), d.clone()), n));
                }
                if let Some(t2) = self.term_step(t) {
                    return Some((DTerm::AppDiff(f.clone(), t2, u.clone(), d.clone()), "beta"));
                }
                if let Some(u2) = self.term_step(u) {
                    return Some((DTerm::AppDiff(f.clone(), t.clone(), u2, d.clone()), "beta"));
                }
                self.step_in(ctx, d).map(|(d2, n)| (DTerm::AppDiff(f.clone(), t.clone(), u.clone(), b(d2)), n))
            }
            DTerm::Pair(x, y) => {
                if let Some((x2, n)) = self.step_in(ctx, x) {
                    return Some((DTerm::Pair(b(x2), y.clone()), n));
                }
                self.step_in(ctx, y).map(|(y2, n)| (DTerm::Pair(x.clone(), b(y2)), n))
            }
            DTerm::Proj(s, x) => self.step_in(ctx, x).map(|(x2, n)| (DTerm::Proj(*s, b(x2)), n)),
            DTerm::J(j) => {
                let with = |f: &dyn Fn(&mut JElim)| {
                    let mut k = j.as_ref().clone();
                    f(&mut k);
                    DTerm::J(Box::new(k))
                };
                if let Some(p) = self.pred_step(&j.motive.body) {
                    return Some((with(&|k| k.motive.body = p.clone()), "pred"));
                }
                if let Some(t) = self.term_step(&j.lhs) {
                    return Some((with(&|k| k.lhs = t.clone()), "beta"));
                }
                if let Some(t) = self.term_step(&j.rhs) {
                    return Some((with(&|k| k.rhs = t.clone()), "beta"));
                }
                if let Some((d, n)) = self.step_in(ctx, &j.diff) {
                    return Some((with(&|k| k.diff = d.clone()), n));
                }
                ctx.push_prog("z", j.motive.carrier.clone());
                let r = self.step_in(ctx, &j.branch);
                ctx.pop_prog();
                r.map(|(br, n)| (with(&|k| k.branch = br.clone()), n))
            }
        }
    }

    pub fn normalize(&self, ctx: &Context, a: &DTerm) -> Result<DTerm, RewriteError> {
        self.normalize_traced(ctx, a).map(|(t, _)| t)
    }

    /// Normal form plus the names of the rules fired, in order.
    pub fn normalize_traced(&self, ctx: &Context, a: &DTerm) -> Result<(DTerm, Vec<&'static str>), RewriteError> {
        let mut b = Budget::new(self.fuel);
        let mut cur = a.clone();
        let mut trace = Vec::new();
        let mut ctx = ctx.clone();
        while let Some((next, name)) = self.step_in(&mut ctx, &cur) {
            b.spend(name)?;
            trace.push(name);
            cur = next;
        }
        Ok((cur, trace))
    }

    pub fn equal_dterm(&self, ctx: &Context, a: &DTerm, c: &DTerm) -> Result<bool, RewriteError> {
        Ok(a == c || self.normalize(ctx, a)? == self.normalize(ctx, c)?)
    }

    /// All one-step reducts, at every position and under every enabled rule.
    pub fn reducts(&self, ctx: &Context, a: &DTerm) -> Vec<(DTerm, &'static str)> {
        let mut ctx = ctx.clone();
        self.reducts_in(&mut ctx, a)
    }

    fn reducts_in(&self, ctx: &mut Context, a: &DTerm) -> Vec<(DTerm, &'static str)> {
        let mut out: Vec<(DTerm, &'static str)> =
            self.rules_list().into_iter().filter_map(|(n, f)| f(self, ctx, a).map(|r| (r, n))).collect();
        let b = Box::new;
        match a {
            DTerm::Var(_) | DTerm::Const(_) => {}
            DTerm::Refl(t) => out.extend(self.term_step(t).map(|t| (DTerm::Refl(t), "beta"))),
            DTerm::LamPoint(ty, body) => {
                ctx.push_prog("x", ty.clone());
                for (x, n) in self.reducts_in(ctx, body) {
                    out.push((DTerm::LamPoint(ty.clone(), b(x)), n));
                }
                ctx.pop_prog();
            }
            DTerm::LamDiff(ty, body) => {
                push_diff_binder(ctx, ty);
                for (x, n) in self.reducts_in(ctx, body) {
                    out.push((DTerm::LamDiff(ty.clone(), b(x)), n));
                }
                pop_diff_binder(ctx);
            }
            DTerm::AppPoint(f, t) => {
                for (f2, n) in self.reducts_in(ctx, f) {
                    out.push((DTerm::AppPoint(b(f2), t.clone()), n));
                }
                out.extend(self.term_step(t).map(|t| (DTerm::AppPoint(f.clone(), t), "beta")));
            }
            DTerm::AppDiff(f, t, u, d) => {
                for (f2, n) in self.reducts_in(ctx, f) {
                    out.push((DTerm::AppDiff(b(f2), t.clone(), u.clone(), d.clone()), n));
                }
                if let Some(t2) = self.term_step(t) {
                    out.push((DTerm::AppDiff(f.clone(), t2, u.clone(), d.clone()), "beta"));
                }
                if let Some(u2) = self.term_step(u) {
                    out.push((DTerm::AppDiff(f.clone(), t.clone(), u2, d.clone()), "beta"));
                }
                for (d2, n) in self.reducts_in(ctx, d) {
                    out.push((DTerm::AppDiff(f.clone(), t.clone(), u.clone(), b(d2)), n));
                }
            }
            DTerm::Pair(x, y) => {
                for (x2, n) in self.reducts_in(ctx, x) {
                    out.push((DTerm::Pair(b(x2), y.clone()), n));
                }
                for (y2, n) in self.reducts_in(ctx, y) {
                    out.push((DTerm::Pair(x.clone(), b(y2)), n));
                }
            }
            DTerm::Proj(s, x) => {
                for (x2, n) in self.reducts_in(ctx, x) {
                    out.push((DTerm::Proj(*s, b(x2)), n));
                }
            }
            DTerm::J(j) => {
                let with = |f: &mut dyn FnMut(&mut JElim)| {
                    let mut k = j.as_ref().clone();
                    f(&mut k);
                    DTerm::J(Box::new(k))
                };
                if let Some(p) = self.pred_step(&j.motive.body) {
                    out.push((with(&mut |k| k.motive.body = p.clone()), "pred"));
                }
                if let Some(t) = self.term_step(&j.lhs) {
                    out.push((with(&mut |k| k.lhs = t.clone()), "beta"));
                }
                if let Some(t) = self.term_step(&j.rhs) {
                    out.push((with(&mut |k| k.rhs = t.clone()), "beta"));
                }
                for (d, n) in self.reducts_in(ctx, &j.diff) {
                    out.push((with(&mut |k| k.diff = d.clone()), n));
                }
                ctx.push_prog("z", j.motive.carrier.clone());
                for (br, n) in self.reducts_in(ctx, &j.branch) {
                    out.push((with(&mut |k| k.branch = br.clone()), n));
                }
                ctx.pop_prog();
            }
        }
        out
    }

    /// Breadth-first search over all rewrite sequences from `a`; true when
    /// `target` is reachable within `limit` distinct terms.
    pub fn reachable(&self, ctx: &Context, a: &DTerm, target: &DTerm, limit: usize) -> bool {
        let mut seen: HashSet<DTerm> = HashSet::new();
        let mut queue = VecDeque::from([a.clone()]);
        seen.insert(a.clone());
        while let Some(cur) = queue.pop_front() {
            if &cur == target {
                return true;
            }
            if seen.len() > limit {
                break;
            }
            for (next, _) in self.reducts(ctx, &cur) {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        false
    }

    // ------------------------------------------------------------------ rules

    fn r_beta(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        match a {
            DTerm::AppPoint(f, t) => match &**f {
                DTerm::LamPoint(_, body) => Some(body.subst_prog(0, t)),
                _ => None,
            },
            DTerm::AppDiff(f, t, u, d) => match &**f {
                DTerm::LamDiff(_, body) => {
                    Some(body.subst_diff(0, &d.shift_prog(2, 0)).substitute_top_prog(2, &[u.clone(), t.clone()], 0))
                }
                _ => None,
            },
            DTerm::Proj(s, p) => match &**p {
                DTerm::Pair(x, y) => Some(if *s == Side::Fst { x.as_ref().clone() } else { y.as_ref().clone() }),
                _ => None,
            },
            _ => None,
        }
    }

    fn r_betad(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        let DTerm::Refl(s) = &j.diff else { return None };
        (self.same(&j.lhs, &j.rhs) && self.same(s, &j.lhs)).then(|| j.branch.subst_prog(0, &j.lhs))
    }

    fn r_etad(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        is_diagonal(&j.motive).then_some(())?;
        (j.branch == DTerm::Refl(var(0))).then(|| j.diff.clone())
    }

    fn r_jw(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        (!j.branch.has_prog_var(0)).then(|| j.branch.shift_prog(-1, 0))
    }

    /// Recognizes `J[x y. D_B(S[x], S[y])](.., [z] ∂(S[z]))`.
    fn der_shape(&self, j: &JElim) -> Option<(Ty, Term)> {
        let DTerm::Refl(s) = &j.branch else { return None };
        let Pred::Diff(b, l, r) = &j.motive.body else { return None };
        (self.same(l, &s.shift(1, 0)) && self.same(r, &s.shift(1, 1))).then(|| (b.clone(), s.clone()))
    }

    fn r_dchain(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(outer) = a else { return None };
        let DTerm::J(inner) = &outer.diff else { return None };
        let (c, s2) = self.der_shape(outer)?;
        let (b, s1) = self.der_shape(inner)?;
        if outer.motive.carrier != b {
            return None;
        }
        if !self.same(&outer.lhs, &s1.instantiate(&inner.lhs)) || !self.same(&outer.rhs, &s1.instantiate(&inner.rhs)) {
            return None;
        }
        let s = s2.shift(1, 1).subst(0, &s1);
        let s = self.conv(&s)?;
        Some(DTerm::j(
            Motive { carrier: inner.motive.carrier.clone(), body: Pred::Diff(c, s.shift(1, 0), s.shift(1, 1)) },
            inner.lhs.clone(),
            inner.rhs.clone(),
            inner.diff.clone(),
            DTerm::Refl(s),
        ))
    }

    fn r_jxa(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        match a {
            DTerm::Refl(Term::Pair(t, u)) => {
                Some(DTerm::pair(DTerm::Refl(t.as_ref().clone()), DTerm::Refl(u.as_ref().clone())))
            }
            _ => None,
        }
    }

    fn r_jxb(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        let DTerm::Pair(b, c) = &j.branch else { return None };
        let Pred::Prod(c1, c2) = &j.motive.body else { return None };
        let mk = |body: &Pred, br: &DTerm| {
            DTerm::j(
                Motive { carrier: j.motive.carrier.clone(), body: body.clone() },
                j.lhs.clone(),
                j.rhs.clone(),
                j.diff.clone(),
                br.clone(),
            )
        };
        Some(DTerm::pair(mk(c1, b), mk(c2, c)))
    }

    fn r_jxc(&self, ctx: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        let DTerm::Proj(side, b) = &j.branch else { return None };
        let typer = self.typer?;
        let mut inner = ctx.clone();
        inner.push_prog("z", j.motive.carrier.clone());
        let ty = self.normalize_pred(&typer.infer_diff(&inner, b)?).ok()?;
        let Pred::Prod(p1, p2) = ty else { return None };
        let body = match side {
            Side::Fst => Pred::prod(j.motive.body.clone(), p2.shift(1, 0)),
            Side::Snd => Pred::prod(p1.shift(1, 0), j.motive.body.clone()),
        };
        Some(DTerm::Proj(
            *side,
            Box::new(DTerm::j(
                Motive { carrier: j.motive.carrier.clone(), body },
                j.lhs.clone(),
                j.rhs.clone(),
                j.diff.clone(),
                b.as_ref().clone(),
            )),
        ))
    }

    fn r_jl1a(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        match a {
            DTerm::Refl(Term::Lam(ty, t)) => Some(DTerm::lam_point(ty.clone(), DTerm::Refl(t.as_ref().clone()))),
            _ => None,
        }
    }

    fn r_jl1b(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        let DTerm::LamPoint(bty, b) = &j.branch else { return None };
        let Pred::PiPoint(_, c) = &j.motive.body else { return None };
        let at = j.motive.carrier.clone();
        let pair_ty = Ty::product(at, bty.clone());
        let p = |s: Side, i: usize| proj(s, var(i));
        // C'(x, x', y') over (Γ, y, z, z'): x := π₁z, x' := π₁z', y' := π₂z
        let body = c.substitute_top(3, &[p(Side::Snd, 1), p(Side::Fst, 0), p(Side::Fst, 1)], 3);
        let branch = b.substitute_top_prog(2, &[p(Side::Snd, 0), p(Side::Fst, 0)], 2);
        let pair = |x: Term, y: Term| Term::Pair(Box::new(x), Box::new(y));
        Some(DTerm::lam_point(
            bty.clone(),
            DTerm::j(
                Motive { carrier: pair_ty, body },
                pair(j.lhs.shift(1, 0), var(0)),
                pair(j.rhs.shift(1, 0), var(0)),
                DTerm::pair(j.diff.shift_prog(1, 0), DTerm::Refl(var(0))),
                branch,
            ),
        ))
    }

    fn r_jl2a(&self, ctx: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::Refl(f @ Term::Lam(dom, body)) = a else { return None };
        let typer = self.typer?;
        let mut inner = ctx.clone();
        inner.push_prog("x", dom.clone());
        let cod = typer.infer_program(&inner, body)?;
        Some(der(f, dom, &cod))
    }

    fn r_jl2b(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        let DTerm::LamDiff(bty, b) = &j.branch else { return None };
        let Pred::PiDiff(_, c) = &j.motive.body else { return None };
        let pair_ty = Ty::product(j.motive.carrier.clone(), bty.clone());
        let p = |s: Side, i: usize| proj(s, var(i));
        // C'(x, x', y, y') over (Γ, y, y', z, z')
        let body = c.substitute_top(4, &[p(Side::Snd, 0), p(Side::Snd, 1), p(Side::Fst, 0), p(Side::Fst, 1)], 4);
        // b over (Γ, x, y, y' | Δ, δ) into (Γ, y, y', z | Δ, δ)
        let branch = b
            .substitute_top_prog(3, &[p(Side::Snd, 0), p(Side::Snd, 0), p(Side::Fst, 0)], 3)
            .subst_diff(0, &DTerm::Refl(p(Side::Snd, 0)))
            .shift_diff(1, 0);
        let pair = |x: Term, y: Term| Term::Pair(Box::new(x), Box::new(y));
        Some(DTerm::lam_diff(
            bty.clone(),
            DTerm::j(
                Motive { carrier: pair_ty, body },
                pair(j.lhs.shift(2, 0), var(1)),
                pair(j.rhs.shift(2, 0), var(0)),
                DTerm::pair(j.diff.shift_prog(2, 0).shift_diff(1, 0), DTerm::Var(0)),
                branch,
            ),
        ))
    }

    fn r_eta(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        match a {
            DTerm::LamPoint(_, body) => match &**body {
                DTerm::AppPoint(f, Term::Var(0)) if !f.has_prog_var(0) => Some(f.shift_prog(-1, 0)),
                _ => None,
            },
            DTerm::LamDiff(_, body) => match &**body {
                DTerm::AppDiff(f, Term::Var(1), Term::Var(0), d)
                    if **d == DTerm::Var(0) && !f.has_prog_var(0) && !f.has_prog_var(1) && !f.has_diff_var(0) =>
                {
                    Some(f.shift_prog(-2, 0).shift_diff(-1, 0))
                }
                _ => None,
            },
            DTerm::Pair(x, y) => match (&**x, &**y) {
                (DTerm::Proj(Side::Fst, p), DTerm::Proj(Side::Snd, q)) if p == q => Some(p.as_ref().clone()),
                _ => None,
            },
            _ => None,
        }
    }

    /// The forbidden rule, instance `c(x, y, ε) = ε`.
    fn r_jeta_plus_eps(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        (j.branch == DTerm::Refl(var(0))).then(|| j.diff.clone())
    }

    /// The forbidden rule, instance `c(x, y, ε) = b[x]`.
    fn r_jeta_plus_point(&self, _: &Context, a: &DTerm) -> Option<DTerm> {
        let DTerm::J(j) = a else { return None };
        Some(j.branch.subst_prog(0, &j.lhs))
    }
}

fn pred_single_step(p: &Pred, eqs: &[Equation]) -> Option<Pred> {
    match p {
        Pred::Diff(a, t, u) => match term::step_with(t, true, eqs) {
            Some((t2, _)) => Some(Pred::Diff(a.clone(), t2, u.clone())),
            None => term::step_with(u, true, eqs).map(|(u2, _)| Pred::Diff(a.clone(), t.clone(), u2)),
        },
        Pred::Prod(x, y) => match pred_single_step(x, eqs) {
            Some(x2) => Some(Pred::prod(x2, y.as_ref().clone())),
            None => pred_single_step(y, eqs).map(|y2| Pred::prod(x.as_ref().clone(), y2)),
        },
        Pred::PiPoint(a, q) => pred_single_step(q, eqs).map(|q| Pred::PiPoint(a.clone(), Box::new(q))),
        Pred::PiDiff(a, q) => pred_single_step(q, eqs).map(|q| Pred::PiDiff(a.clone(), Box::new(q))),
    }
}

pub fn is_diagonal(m: &Motive) -> bool {
    matches!(&m.body, Pred::Diff(c, Term::Var(1), Term::Var(0)) if *c == m.carrier)
}

pub(crate) fn push_diff_binder(ctx: &mut Context, ty: &Ty) {
    ctx.push_prog("x", ty.clone());
    ctx.push_prog("y", ty.clone());
    ctx.push_diff("e", Pred::Diff(ty.clone(), var(1), var(0)));
}

pub(crate) fn pop_diff_binder(ctx: &mut Context) {
    ctx.pop_diff();
    ctx.pop_prog();
    ctx.pop_prog();
}

/// Jη⁺ trivialization witness: from `a ∈ D_A(t,t)` both `a` and `∂(t)` are
/// reachable from `J[x y. D_A(x,y)](t, t, a, [x] ∂(x))`.
pub fn trivialization_witness(rules: RuleSet, carrier: &Ty, t: &Term, a: &DTerm, ctx: &Context) -> bool {
    let rw = Rewriter::new(rules);
    let witness = DTerm::j(
        Motive { carrier: carrier.clone(), body: Pred::Diff(carrier.clone(), var(1), var(0)) },
        t.clone(),
        t.clone(),
        a.clone(),
        DTerm::Refl(var(0)),
    );
    let refl = DTerm::Refl(t.clone());
    rw.reachable(ctx, &witness, a, 2000) && rw.reachable(ctx, &witness, &refl, 2000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::*;

    fn a() -> Ty {
        Ty::base("A")
    }

    fn rw(spec: &str) -> Rewriter<'static> {
        Rewriter::new(RuleSet::parse(spec).unwrap())
    }

    #[test]
    fn j_beta_base() {
        let t = cnst("t");
        let j = DTerm::j(
            Motive { carrier: a(), body: diff(a(), var(1), var(0)) },
            t.clone(),
            t.clone(),
            DTerm::Refl(t.clone()),
            DTerm::Refl(app(cnst("f"), var(0))),
        );
        let n = rw("betad").normalize(&Context::new(), &j).unwrap();
        assert_eq!(n, DTerm::Refl(app(cnst("f"), t)));
    }

    #[test]
    fn symmetry_combinator_is_normal() {
        let sym = DTerm::j(
            Motive { carrier: a(), body: diff(a(), var(0), var(1)) },
            cnst("t"),
            cnst("u"),
            DTerm::Const("a".into()),
            DTerm::Refl(var(0)),
        );
        let r = rw("eta,betad,etad,dchain,jw,cext");
        assert_eq!(r.normalize(&Context::new(), &sym).unwrap(), sym);
    }

    #[test]
    fn cext_on_refl_pair() {
        let d = DTerm::Refl(pair(cnst("t"), cnst("u")));
        let n = rw("cext").normalize(&Context::new(), &d).unwrap();
        assert_eq!(n, DTerm::pair(DTerm::Refl(cnst("t")), DTerm::Refl(cnst("u"))));
    }

    #[test]
    fn fext1_on_refl_lam() {
        let d = DTerm::Refl(lam(a(), app(cnst("f"), var(0))));
        let n = rw("fext1").normalize(&Context::new(), &d).unwrap();
        assert_eq!(n, DTerm::lam_point(a(), DTerm::Refl(app(cnst("f"), var(0)))));
    }

    #[test]
    fn fuel_is_reported() {
        let omega = lam(a(), app(var(0), var(0)));
        let d = DTerm::Refl(app(omega.clone(), omega));
        let err = rw("beta").with_fuel(50).normalize(&Context::new(), &d).unwrap_err();
        assert!(matches!(err, RewriteError::FuelExhausted { .. }));
    }

    #[test]
    fn forbidden_rule_trivializes() {
        let ctx = Context::new();
        let t = cnst("t");
        let ax = DTerm::Const("ax".into());
        assert!(!trivialization_witness(RuleSet::parse("all").unwrap(), &a(), &t, &ax, &ctx));
        assert!(trivialization_witness(RuleSet::parse("jeta-plus").unwrap(), &a(), &t, &ax, &ctx));
    }
}
