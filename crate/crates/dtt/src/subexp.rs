//! The sub-exponential fragment: sensitivity contexts, the graded checker and
//! the forgetful translation into plain simply typed terms.

use num_rational::Rational64;
use num_traits::{One, Zero};
use std::fmt;
use std::ops::{Add, Mul};

use crate::error::SubexpError;
use crate::syntax::{lam, Context, DTerm, JElim, Motive, Pred, Side, Signature, Term, Ty};

/// A sensitivity: a nonnegative rational or ∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sens {
    Fin(Rational64),
    Inf,
}

impl Sens {
    pub fn zero() -> Self {
        Sens::Fin(Rational64::zero())
    }
    pub fn one() -> Self {
        Sens::Fin(Rational64::one())
    }
    pub fn is_zero(&self) -> bool {
        matches!(self, Sens::Fin(r) if r.is_zero())
    }
}

impl PartialOrd for Sens {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Sens {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        match (self, o) {
            (Sens::Fin(a), Sens::Fin(b)) => a.cmp(b),
            (Sens::Inf, Sens::Inf) => std::cmp::Ordering::Equal,
            (Sens::Inf, _) => std::cmp::Ordering::Greater,
            (_, Sens::Inf) => std::cmp::Ordering::Less,
        }
    }
}

impl Add for Sens {
    type Output = Sens;
    fn add(self, o: Sens) -> Sens {
        match (self, o) {
            (Sens::Fin(a), Sens::Fin(b)) => Sens::Fin(a + b),
            _ => Sens::Inf,
        }
    }
}

impl Mul for Sens {
    type Output = Sens;
    /// `0 · ∞ = 0`.
    fn mul(self, o: Sens) -> Sens {
        if self.is_zero() || o.is_zero() {
            return Sens::zero();
        }
        match (self, o) {
            (Sens::Fin(a), Sens::Fin(b)) => Sens::Fin(a * b),
            _ => Sens::Inf,
        }
    }
}

impl From<Rational64> for Sens {
    fn from(r: Rational64) -> Self {
        Sens::Fin(r)
    }
}

impl fmt::Display for Sens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sens::Fin(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Sens::Fin(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Sens::Inf => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensEntry {
    pub name: String,
    pub ty: Ty,
    pub sens: Sens,
}

/// `x₁ ∈_{r₁} A₁, …, xₙ ∈_{rₙ} Aₙ`; the last entry is de Bruijn index 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SensContext {
    pub entries: Vec<SensEntry>,
}

impl SensContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, ty: Ty, sens: Sens) -> Self {
        self.entries.push(SensEntry { name: name.into(), ty, sens });
        self
    }

    pub fn get(&self, name: &str) -> Option<&SensEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Entry-order-insensitive equality.
    pub fn same_entries(&self, o: &SensContext) -> bool {
        self.entries.len() == o.entries.len() && self.entries.iter().all(|e| o.get(&e.name) == Some(e))
    }
}

impl fmt::Display for SensContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.entries.iter().map(|e| format!("{} ∈_{} {}", e.name, e.sens, crate::pretty::ty(&e.ty))).collect();
        write!(f, "({})", parts.join(", "))
    }
}

pub fn ctx_add(a: &SensContext, b: &SensContext) -> Result<SensContext, SubexpError> {
    let mut out = a.clone();
    for e in &b.entries {
        match out.entries.iter_mut().find(|x| x.name == e.name) {
            Some(x) if x.ty != e.ty => return Err(SubexpError::ContextClash(e.name.clone())),
            Some(x) => x.sens = x.sens + e.sens,
            None => out.entries.push(e.clone()),
        }
    }
    Ok(out)
}

pub fn ctx_scale(s: Sens, a: &SensContext) -> SensContext {
    SensContext {
        entries: a.entries.iter().map(|e| SensEntry { name: e.name.clone(), ty: e.ty.clone(), sens: s * e.sens }).collect(),
    }
}

/// Result of the graded checker: the type and the least context that
/// derives it.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    pub ty: Ty,
    pub used: SensContext,
}

/// Usage vector, one sensitivity per context entry (index 0 = innermost).
type Usage = Vec<Sens>;

fn zeros(n: usize) -> Usage {
    vec![Sens::zero(); n]
}

fn add_usage(a: &Usage, b: &Usage) -> Usage {
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

fn scale_usage(s: Sens, a: &Usage) -> Usage {
    a.iter().map(|x| s * *x).collect()
}

struct Graded<'a> {
    sig: &'a Signature,
    /// (name, type, available sensitivity), outermost first.
    env: Vec<(String, Ty, Sens)>,
}

fn mismatch(expected: &Ty, actual: &Ty) -> SubexpError {
    SubexpError::Mismatch { expected: crate::pretty::ty(expected), actual: crate::pretty::ty(actual) }
}

/// Splits a binder domain `!_r A` into `(A, r)`; other domains are linear.
pub fn binder_grade(dom: &Ty) -> (Ty, Sens) {
    match dom {
        Ty::Bang(r, a) => {
            let (inner, s) = binder_grade(a);
            (inner, Sens::Fin(*r) * s)
        }
        t => (t.clone(), Sens::one()),
    }
}

impl Graded<'_> {
    fn name(&self, i: usize) -> String {
        self.env[self.env.len() - 1 - i].0.clone()
    }

    /// Pops the innermost variable, checking its use against its grade.
    fn bind_check(&self, used: Sens, avail: Sens, i: usize) -> Result<(), SubexpError> {
        if used > avail {
            return Err(SubexpError::SensitivityOverrun {
                name: self.name(i),
                needed: used.to_string(),
                available: avail.to_string(),
            });
        }
        Ok(())
    }

    fn synth(&mut self, t: &Term) -> Result<(Ty, Usage), SubexpError> {
        let n = self.env.len();
        match t {
            Term::Var(i) => {
                let e = self.env.get(n.wrapping_sub(1 + i)).ok_or_else(|| SubexpError::Unbound(format!("#{i}")))?;
                let mut u = zeros(n);
                u[n - 1 - i] = Sens::one();
                Ok((e.1.clone(), u))
            }
            Term::Const(c) => {
                let ty = self.sig.const_ty(c).ok_or_else(|| SubexpError::Unbound(c.clone()))?;
                Ok((ty, zeros(n)))
            }
            Term::Lam(dom, body) => {
                let (inner, avail) = binder_grade(dom);
                self.env.push((format!("x{n}"), inner, avail));
                let r = self.synth(body);
                let (b, mut u) = match r {
                    Ok(x) => x,
                    Err(e) => {
                        self.env.pop();
                        return Err(e);
                    }
                };
                let used = u.pop().unwrap();
                let res = self.bind_check(used, avail, 0);
                self.env.pop();
                res?;
                Ok((Ty::lolli(dom.clone(), b), u))
            }
            Term::App(f, a) => {
                let (ft, u1) = self.synth(f)?;
                let (dom, cod) = match &ft {
                    Ty::Lolli(d, c) => (d.as_ref().clone(), c.as_ref().clone()),
                    other => return Err(SubexpError::NotInFragment(format!("application of {}", crate::pretty::ty(other)))),
                };
                let u2 = self.check(a, &dom)?;
                Ok((cod, add_usage(&u1, &u2)))
            }
            Term::Bang(a) => {
                let (ty, u) = self.synth(a)?;
                Ok((Ty::bang(Rational64::one(), ty), u))
            }
            Term::Tensor(a, b) => {
                let (ta, u1) = self.synth(a)?;
                let (tb, u2) = self.synth(b)?;
                Ok((Ty::tensor(ta, tb), add_usage(&u1, &u2)))
            }
            Term::LetTensor(s, body) => {
                let (st, u1) = self.synth(s)?;
                let Ty::Tensor(a, b) = st else {
                    return Err(SubexpError::Mismatch { expected: "a tensor".into(), actual: crate::pretty::ty(&st) });
                };
                self.env.push((format!("x{n}"), *a, Sens::Inf));
                self.env.push((format!("y{n}"), *b, Sens::Inf));
                let r = self.synth(body);
                self.env.pop();
                self.env.pop();
                let (c, mut u) = r?;
                let uy = u.pop().unwrap();
                let ux = u.pop().unwrap();
                let r = ux.max(uy);
                Ok((c, add_usage(&scale_usage(r, &u1), &u)))
            }
            Term::LetBang(s, body) => {
                let (st, u1) = self.synth(s)?;
                let Ty::Bang(sc, a) = st else {
                    return Err(SubexpError::Mismatch { expected: "a banged type".into(), actual: crate::pretty::ty(&st) });
                };
                let sc = Sens::Fin(sc);
                self.env.push((format!("x{n}"), *a, Sens::Inf));
                let r = self.synth(body);
                self.env.pop();
                let (c, mut u) = r?;
                let q = u.pop().unwrap();
                // x ∈_{r·s}: the least r with q ≤ r·s
                let r = match (q, sc) {
                    (q, _) if q.is_zero() => Sens::zero(),
                    (_, s) if s.is_zero() => {
                        return Err(SubexpError::SensitivityOverrun {
                            name: format!("x{n}"),
                            needed: q.to_string(),
                            available: "0".into(),
                        })
                    }
                    (Sens::Fin(q), Sens::Fin(s)) => Sens::Fin(q / s),
                    _ => Sens::Inf,
                };
                Ok((c, add_usage(&scale_usage(r, &u1), &u)))
            }
            Term::Pair(..) | Term::Proj(..) => {
                Err(SubexpError::NotInFragment("cartesian pairs and projections are not in the fragment".into()))
            }
        }
    }

    /// Checks `t` against `ty`; an argument at `!_s A` costs `s` times its use.
    fn check(&mut self, t: &Term, ty: &Ty) -> Result<Usage, SubexpError> {
        if let Ty::Bang(s, a) = ty {
            let inner = match t {
                Term::Bang(x) => x.as_ref(),
                other => other,
            };
            let u = self.check(inner, a)?;
            return Ok(scale_usage(Sens::Fin(*s), &u));
        }
        if let (Term::Lam(dom, _), Ty::Lolli(d2, _)) = (t, ty) {
            if dom != d2.as_ref() {
                return Err(mismatch(d2, dom));
            }
        }
        let (got, u) = self.synth(t)?;
        if &got != ty {
            return Err(mismatch(ty, &got));
        }
        Ok(u)
    }
}

/// Checks `ctx ⊢ tm : ty` in the graded fragment and returns the least
/// context that derives it.
pub fn check_bang(sig: &Signature, ctx: &SensContext, tm: &Term, ty: &Ty) -> Result<Derivation, SubexpError> {
    let mut g = Graded { sig, env: ctx.entries.iter().map(|e| (e.name.clone(), e.ty.clone(), e.sens)).collect() };
    let u = g.check(tm, ty)?;
    let n = ctx.entries.len();
    for (k, e) in ctx.entries.iter().enumerate() {
        if u[k] > e.sens {
            return Err(SubexpError::SensitivityOverrun {
                name: e.name.clone(),
                needed: u[k].to_string(),
                available: e.sens.to_string(),
            });
        }
    }
    debug_assert_eq!(u.len(), n);
    let used = SensContext {
        entries: ctx
            .entries
            .iter()
            .zip(&u)
            .map(|(e, s)| SensEntry { name: e.name.clone(), ty: e.ty.clone(), sens: *s })
            .collect(),
    };
    Ok(Derivation { ty: ty.clone(), used })
}

/// Synthesizing variant of [`check_bang`].
pub fn infer_bang(sig: &Signature, ctx: &SensContext, tm: &Term) -> Result<Derivation, SubexpError> {
    let mut g = Graded { sig, env: ctx.entries.iter().map(|e| (e.name.clone(), e.ty.clone(), e.sens)).collect() };
    let (ty, _) = g.synth(tm)?;
    check_bang(sig, ctx, tm, &ty)
}

// ---------------------------------------------------------------------------
// forgetful translation

pub fn forget_ty(t: &Ty) -> Ty {
    match t {
        Ty::Base(n) => Ty::Base(n.clone()),
        Ty::Bang(_, a) => forget_ty(a),
        Ty::Arrow(a, b) | Ty::Lolli(a, b) => Ty::arrow(forget_ty(a), forget_ty(b)),
        Ty::Product(a, b) | Ty::Tensor(a, b) => Ty::product(forget_ty(a), forget_ty(b)),
    }
}

/// The forgetful translation on terms. Needs the types of bound variables to
/// annotate the λs it introduces, hence the signature and context.
pub fn forget_term(sig: &Signature, ctx: &[Ty], t: &Term) -> Result<Term, SubexpError> {
    let mut env: Vec<Ty> = ctx.to_vec();
    forget_in(sig, &mut env, t).map(|(t, _)| t)
}

fn forget_in(sig: &Signature, env: &mut Vec<Ty>, t: &Term) -> Result<(Term, Ty), SubexpError> {
    let n = env.len();
    Ok(match t {
        Term::Var(i) => {
            let ty = env.get(n.wrapping_sub(1 + i)).cloned().ok_or_else(|| SubexpError::Unbound(format!("#{i}")))?;
            (Term::Var(*i), forget_ty(&ty))
        }
        Term::Const(c) => (Term::Const(c.clone()), forget_ty(&sig.const_ty(c).ok_or_else(|| SubexpError::Unbound(c.clone()))?)),
        Term::Lam(a, b) => {
            env.push(a.clone());
            let r = forget_in(sig, env, b);
            env.pop();
            let (b, bt) = r?;
            let a = forget_ty(a);
            (lam(a.clone(), b), Ty::arrow(a, bt))
        }
        Term::App(f, a) => {
            let (f, ft) = forget_in(sig, env, f)?;
            let (a, _) = forget_in(sig, env, a)?;
            let cod = match ft {
                Ty::Arrow(_, c) => *c,
                other => return Err(SubexpError::Mismatch { expected: "a function".into(), actual: crate::pretty::ty(&other) }),
            };
            (crate::syntax::app(f, a), cod)
        }
        Term::Pair(a, b) | Term::Tensor(a, b) => {
            let (a, at) = forget_in(sig, env, a)?;
            let (b, bt) = forget_in(sig, env, b)?;
            (crate::syntax::pair(a, b), Ty::product(at, bt))
        }
        Term::Proj(s, p) => {
            let (p, pt) = forget_in(sig, env, p)?;
            let Ty::Product(a, b) = pt else { return Err(SubexpError::Mismatch { expected: "a product".into(), actual: crate::pretty::ty(&pt) }) };
            (crate::syntax::proj(*s, p), if *s == Side::Fst { *a } else { *b })
        }
        Term::Bang(a) => forget_in(sig, env, a)?,
        Term::LetBang(s, u) => {
            // (let !x = t in u)* = (λx.u*) t*
            let (s2, st) = forget_in(sig, env, s)?;
            env.push(st.clone());
            let r = forget_in(sig, env, u);
            env.pop();
            let (u2, ut) = r?;
            (crate::syntax::app(lam(st, u2), s2), ut)
        }
        Term::LetTensor(s, u) => {
            // (let (x,y) = t in u)* = (λxy.u*) π₁(t*) π₂(t*)
            let (s2, st) = forget_in(sig, env, s)?;
            let Ty::Product(a, b) = st else { return Err(SubexpError::Mismatch { expected: "a tensor".into(), actual: crate::pretty::ty(&st) }) };
            env.push(*a.clone());
            env.push(*b.clone());
            let r = forget_in(sig, env, u);
            env.pop();
            env.pop();
            let (u2, ut) = r?;
            let f = lam(*a, lam(*b, u2));
            (crate::syntax::apps(f, [crate::syntax::proj(Side::Fst, s2.clone()), crate::syntax::proj(Side::Snd, s2)]), ut)
        }
    })
}

/// Type-free erasure used for conversion checking: the forgetful translation
/// with the redexes it introduces already contracted.
pub fn erase_term(t: &Term) -> Term {
    match t {
        Term::Var(i) => Term::Var(*i),
        Term::Const(c) => Term::Const(c.clone()),
        Term::Lam(a, b) => lam(forget_ty(a), erase_term(b)),
        Term::App(f, a) => crate::syntax::app(erase_term(f), erase_term(a)),
        Term::Pair(a, b) | Term::Tensor(a, b) => crate::syntax::pair(erase_term(a), erase_term(b)),
        Term::Proj(s, p) => crate::syntax::proj(*s, erase_term(p)),
        Term::Bang(a) => erase_term(a),
        Term::LetBang(s, u) => erase_term(u).instantiate(&erase_term(s)),
        Term::LetTensor(s, u) => {
            let s = erase_term(s);
            erase_term(u).substitute_top(2, &[crate::syntax::proj(Side::Snd, s.clone()), crate::syntax::proj(Side::Fst, s)], 0)
        }
    }
}

pub fn erase_pred(p: &Pred) -> Pred {
    match p {
        Pred::Diff(a, t, u) => Pred::Diff(forget_ty(a), erase_term(t), erase_term(u)),
        Pred::Prod(x, y) => Pred::prod(erase_pred(x), erase_pred(y)),
        Pred::PiPoint(a, q) => Pred::PiPoint(forget_ty(a), Box::new(erase_pred(q))),
        Pred::PiDiff(a, q) => Pred::PiDiff(forget_ty(a), Box::new(erase_pred(q))),
    }
}

pub fn erase_dterm(d: &DTerm) -> DTerm {
    let b = Box::new;
    match d {
        DTerm::Var(i) => DTerm::Var(*i),
        DTerm::Const(c) => DTerm::Const(c.clone()),
        DTerm::Refl(t) => DTerm::Refl(erase_term(t)),
        DTerm::LamPoint(a, x) => DTerm::LamPoint(forget_ty(a), b(erase_dterm(x))),
        DTerm::LamDiff(a, x) => DTerm::LamDiff(forget_ty(a), b(erase_dterm(x))),
        DTerm::AppPoint(f, t) => DTerm::AppPoint(b(erase_dterm(f)), erase_term(t)),
        DTerm::AppDiff(f, t, u, x) => DTerm::AppDiff(b(erase_dterm(f)), erase_term(t), erase_term(u), b(erase_dterm(x))),
        DTerm::Pair(x, y) => DTerm::Pair(b(erase_dterm(x)), b(erase_dterm(y))),
        DTerm::Proj(s, x) => DTerm::Proj(*s, b(erase_dterm(x))),
        DTerm::J(j) => DTerm::J(Box::new(JElim {
            motive: Motive { carrier: forget_ty(&j.motive.carrier), body: erase_pred(&j.motive.body) },
            lhs: erase_term(&j.lhs),
            rhs: erase_term(&j.rhs),
            diff: erase_dterm(&j.diff),
            branch: erase_dterm(&j.branch),
        })),
    }
}

pub fn erase_context(ctx: &Context) -> Context {
    let mut out = ctx.clone();
    for e in &mut out.prog {
        e.ty = forget_ty(&e.ty);
    }
    for e in &mut out.diff {
        e.pred = erase_pred(&e.pred);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::*;

    fn a() -> Ty {
        Ty::base("A")
    }
    fn r(n: i64) -> Rational64 {
        Rational64::from_integer(n)
    }
    fn ctx1(name: &str, n: i64) -> SensContext {
        SensContext::new().with(name, a(), Sens::Fin(r(n)))
    }

    #[test]
    fn add_shared_and_disjoint() {
        assert_eq!(ctx_add(&ctx1("x", 1), &ctx1("x", 2)).unwrap(), ctx1("x", 3));
        assert_eq!(ctx_add(&SensContext::new(), &SensContext::new()).unwrap(), SensContext::new());
        let both = ctx_add(&ctx1("x", 1), &SensContext::new().with("y", Ty::base("B"), Sens::Fin(r(2)))).unwrap();
        assert_eq!(both.entries.len(), 2);
    }

    #[test]
    fn add_clash() {
        let b = SensContext::new().with("x", Ty::base("B"), Sens::one());
        assert!(matches!(ctx_add(&ctx1("x", 1), &b), Err(SubexpError::ContextClash(_))));
    }

    #[test]
    fn scaling() {
        assert_eq!(ctx_scale(Sens::Fin(r(2)), &ctx1("x", 3)), ctx1("x", 6));
        assert_eq!(ctx_scale(Sens::zero(), &ctx1("x", 3)), ctx1("x", 0));
        assert_eq!(ctx_scale(Sens::one(), &ctx1("x", 3)), ctx1("x", 3));
    }

    fn twice(dom: Ty) -> Term {
        // λx y. x (x y)
        lam(dom, lam(a(), app(var(1), app(var(1), var(0)))))
    }

    #[test]
    fn twice_needs_bang_two() {
        let sig = Signature::default();
        let aa = Ty::lolli(a(), a());
        let good = Ty::lolli(Ty::bang(r(2), aa.clone()), aa.clone());
        assert!(check_bang(&sig, &SensContext::new(), &twice(Ty::bang(r(2), aa.clone())), &good).is_ok());
        let bad = Ty::lolli(aa.clone(), aa.clone());
        let err = check_bang(&sig, &SensContext::new(), &twice(aa), &bad).unwrap_err();
        assert!(matches!(err, SubexpError::SensitivityOverrun { .. }));
    }

    #[test]
    fn affine_projection() {
        let sig = Signature::default();
        let t = lam(a(), lam(Ty::base("B"), var(1)));
        let ty = Ty::lolli(a(), Ty::lolli(Ty::base("B"), a()));
        assert!(check_bang(&sig, &SensContext::new(), &t, &ty).is_ok());
    }

    #[test]
    fn forget_bang_and_let() {
        let sig = Signature::default();
        let t = Term::Bang(Box::new(var(0)));
        assert_eq!(forget_term(&sig, &[a()], &t).unwrap(), var(0));
        // let !x = y in x  ~>  (λx.x) y
        let t = Term::LetBang(Box::new(var(0)), Box::new(var(0)));
        let got = forget_term(&sig, &[Ty::bang(r(1), a())], &t).unwrap();
        assert_eq!(got, app(lam(a(), var(0)), var(0)));
    }

    #[test]
    fn forget_let_pair() {
        let sig = Signature::default();
        let t = Term::LetTensor(Box::new(var(0)), Box::new(var(1)));
        let got = forget_term(&sig, &[Ty::tensor(a(), Ty::base("B"))], &t).unwrap();
        let want = apps(lam(a(), lam(Ty::base("B"), var(1))), [proj(Side::Fst, var(0)), proj(Side::Snd, var(0))]);
        assert_eq!(got, want);
    }
}
