//! Typing for program terms, predicates and difference terms, and the
//! purification of predicates.

use crate::error::TypeError;
use crate::pretty;
use crate::rewrite::{default_fuel, Rewriter, Typer};
use crate::subexp::{erase_pred, forget_ty};
use crate::syntax::{app, apps, pair, proj, var, Calculus, Context, DTerm, Pred, RuleSet, Side, Signature, Term, Ty};

#[derive(Clone, Debug)]
pub struct Checker {
    pub sig: Signature,
    pub rules: RuleSet,
    pub calculus: Calculus,
    pub fuel: usize,
}

/// `p = pure[lhs/y, rhs/y']` with `pure` mentioning only `y` (index 1) and
/// `y'` (index 0).
#[derive(Clone, Debug, PartialEq)]
pub struct PureFactorization {
    pub carrier: Ty,
    pub pure: Pred,
    pub lhs: Term,
    pub rhs: Term,
}

impl PureFactorization {
    pub fn reconstruct(&self) -> Pred {
        self.pure.instantiate2(&self.lhs, &self.rhs)
    }
}

/// Whether `p` is pure for its two top variables: it mentions no other
/// variable.
pub fn is_pure(p: &Pred) -> bool {
    let mut ok = true;
    p.map_vars(0, &mut |i, k| {
        if i >= k + 2 {
            ok = false;
        }
        Term::Var(i)
    });
    ok
}

impl Checker {
    pub fn new(sig: Signature) -> Self {
        Checker { sig, rules: RuleSet::standard(), calculus: Calculus::Stlc, fuel: default_fuel() }
    }

    pub fn with_rules(mut self, rules: RuleSet) -> Self {
        self.rules = rules;
        self
    }

    pub fn with_calculus(mut self, c: Calculus) -> Self {
        self.calculus = c;
        self
    }

    pub fn with_fuel(mut self, fuel: usize) -> Self {
        self.fuel = fuel;
        self
    }

    pub fn rewriter(&self) -> Rewriter<'_> {
        Rewriter::new(self.rules).with_fuel(self.fuel).with_typer(self).with_equations(&self.sig.equations)
    }

    // ---------------------------------------------------------------- types

    pub fn check_type(&self, t: &Ty) -> Result<(), TypeError> {
        match t {
            Ty::Base(n) => {
                if self.sig.base_types.iter().any(|b| b == n) {
                    Ok(())
                } else {
                    Err(TypeError::Other(format!("unknown base type `{n}`")))
                }
            }
            Ty::Arrow(a, b) | Ty::Product(a, b) => {
                self.check_type(a)?;
                self.check_type(b)
            }
            Ty::Lolli(a, b) | Ty::Tensor(a, b) => {
                self.require_fuzz(t)?;
                self.check_type(a)?;
                self.check_type(b)
            }
            Ty::Bang(r, a) => {
                self.require_fuzz(t)?;
                if *r < num_rational::Rational64::from_integer(0) {
                    return Err(TypeError::Other("negative scale".into()));
                }
                self.check_type(a)
            }
        }
    }

    fn require_fuzz(&self, t: &Ty) -> Result<(), TypeError> {
        match self.calculus {
            Calculus::Fuzz => Ok(()),
            Calculus::Stlc => Err(TypeError::WrongCalculus(pretty::ty(t))),
        }
    }

    /// Type equality; the sub-exponential calculus compares modulo the
    /// forgetful translation.
    pub fn ty_eq(&self, a: &Ty, b: &Ty) -> bool {
        a == b || (self.calculus == Calculus::Fuzz && forget_ty(a) == forget_ty(b))
    }

    fn expect_ty(&self, expected: &Ty, actual: &Ty) -> Result<(), TypeError> {
        if self.ty_eq(expected, actual) {
            Ok(())
        } else {
            Err(TypeError::Mismatch { expected: pretty::ty(expected), actual: pretty::ty(actual) })
        }
    }

    // -------------------------------------------------------- program terms

    pub fn infer_program(&self, ctx: &Context, t: &Term) -> Result<Ty, TypeError> {
        let mut ctx = ctx.clone();
        self.infer_in(&mut ctx, t)
    }

    pub fn check_program(&self, ctx: &Context, t: &Term, ty: &Ty) -> Result<(), TypeError> {
        let got = self.infer_program(ctx, t)?;
        self.expect_ty(ty, &got)
    }

    fn infer_in(&self, ctx: &mut Context, t: &Term) -> Result<Ty, TypeError> {
        let fuzz = self.calculus == Calculus::Fuzz;
        match t {
            Term::Var(i) => ctx.prog_ty(*i).cloned().ok_or(TypeError::UnboundVar(*i)),
            Term::Const(c) => self.sig.const_ty(c).ok_or_else(|| TypeError::UnknownConst(c.clone())),
            Term::Lam(a, b) => {
                self.check_type(a)?;
                ctx.push_prog("x", a.clone());
                let r = self.infer_in(ctx, b);
                ctx.pop_prog();
                let b = r?;
                Ok(if fuzz { Ty::lolli(a.clone(), b) } else { Ty::arrow(a.clone(), b) })
            }
            Term::App(f, a) => {
                let ft = self.infer_in(ctx, f)?;
                let (dom, cod) = match ft.unbang().as_function() {
                    Some((d, c)) => (d.clone(), c.clone()),
                    None => return Err(TypeError::NotAFunction(pretty::term(ctx, f))),
                };
                let at = self.infer_in(ctx, a)?;
                self.expect_ty(&dom, &at)?;
                Ok(cod)
            }
            Term::Pair(a, b) => Ok(Ty::product(self.infer_in(ctx, a)?, self.infer_in(ctx, b)?)),
            Term::Proj(s, p) => {
                let pt = self.infer_in(ctx, p)?;
                let pt = if fuzz { pt.unbang().clone() } else { pt };
                match pt {
                    Ty::Product(a, b) => Ok(if *s == Side::Fst { *a } else { *b }),
                    Ty::Tensor(a, b) if fuzz => Ok(if *s == Side::Fst { *a } else { *b }),
                    _ => Err(TypeError::NotAProduct(pretty::term(ctx, p))),
                }
            }
            Term::Bang(a) => {
                if !fuzz {
                    return Err(TypeError::WrongCalculus("!".into()));
                }
                Ok(Ty::bang(num_rational::Rational64::from_integer(1), self.infer_in(ctx, a)?))
            }
            Term::Tensor(a, b) => {
                if !fuzz {
                    return Err(TypeError::WrongCalculus("tensor pair".into()));
                }
                Ok(Ty::tensor(self.infer_in(ctx, a)?, self.infer_in(ctx, b)?))
            }
            Term::LetBang(s, u) => {
                if !fuzz {
                    return Err(TypeError::WrongCalculus("let !".into()));
                }
                let st = self.infer_in(ctx, s)?;
                let Ty::Bang(_, a) = st else {
                    return Err(TypeError::Mismatch { expected: "a banged type".into(), actual: pretty::ty(&st) });
                };
                ctx.push_prog("x", *a);
                let r = self.infer_in(ctx, u);
                ctx.pop_prog();
                r
            }
            Term::LetTensor(s, u) => {
                if !fuzz {
                    return Err(TypeError::WrongCalculus("let pair".into()));
                }
                let st = self.infer_in(ctx, s)?;
                let Some((a, b)) = st.unbang().as_pair() else {
                    return Err(TypeError::NotAProduct(pretty::term(ctx, s)));
                };
                ctx.push_prog("x", a.clone());
                ctx.push_prog("y", b.clone());
                let r = self.infer_in(ctx, u);
                ctx.pop_prog();
                ctx.pop_prog();
                r
            }
        }
    }

    // ----------------------------------------------------------- predicates

    pub fn check_pred(&self, ctx: &Context, p: &Pred) -> Result<(), TypeError> {
        let mut ctx = ctx.clone();
        self.check_pred_in(&mut ctx, p)
    }

    fn check_pred_in(&self, ctx: &mut Context, p: &Pred) -> Result<(), TypeError> {
        match p {
            Pred::Diff(a, t, u) => {
                self.check_type(a)?;
                for x in [t, u] {
                    let xt = self.infer_in(ctx, x)?;
                    if !self.ty_eq(a, &xt) {
                        return Err(TypeError::CarrierMismatch { carrier: pretty::ty(a), actual: pretty::ty(&xt) });
                    }
                }
                Ok(())
            }
            Pred::Prod(x, y) => {
                self.check_pred_in(ctx, x)?;
                self.check_pred_in(ctx, y)
            }
            Pred::PiPoint(a, body) => {
                self.check_type(a)?;
                ctx.push_prog("x", a.clone());
                let r = self.check_pred_in(ctx, body);
                ctx.pop_prog();
                r
            }
            Pred::PiDiff(a, body) => {
                self.check_type(a)?;
                ctx.push_prog("x", a.clone());
                ctx.push_prog("y", a.clone());
                let r = self.check_pred_in(ctx, body);
                ctx.pop_prog();
                ctx.pop_prog();
                r
            }
        }
    }

    /// Predicate equality modulo the active rules (and, in the
    /// sub-exponential calculus, the forgetful translation).
    pub fn pred_eq(&self, p: &Pred, q: &Pred) -> Result<bool, TypeError> {
        if p == q {
            return Ok(true);
        }
        let rw = self.rewriter();
        let (p, q) = (erase_pred(p), erase_pred(q));
        Ok(rw.equal_pred(&p, &q)?)
    }

    /// Unfolds `p` with the extensionality rewrites until its head matches.
    fn expose(&self, p: Pred, want: fn(&Pred) -> bool) -> Result<Pred, TypeError> {
        if want(&p) {
            return Ok(p);
        }
        let n = self.rewriter().normalize_pred(&p)?;
        Ok(if want(&n) { n } else { p })
    }

    // ----------------------------------------------------- difference terms

    pub fn infer_diff(&self, ctx: &Context, a: &DTerm) -> Result<Pred, TypeError> {
        let mut ctx = ctx.clone();
        self.infer_d(&mut ctx, a)
    }

    pub fn check_diff(&self, ctx: &Context, a: &DTerm, p: &Pred) -> Result<(), TypeError> {
        let mut ctx = ctx.clone();
        self.check_d(&mut ctx, a, p)
    }

    fn check_d(&self, ctx: &mut Context, a: &DTerm, p: &Pred) -> Result<(), TypeError> {
        let got = self.infer_d(ctx, a)?;
        if self.pred_eq(&got, p)? {
            Ok(())
        } else {
            Err(TypeError::PredMismatch { expected: pretty::pred(ctx, p), actual: pretty::pred(ctx, &got) })
        }
    }

    fn infer_d(&self, ctx: &mut Context, a: &DTerm) -> Result<Pred, TypeError> {
        match a {
            DTerm::Var(i) => ctx.diff_pred(*i).ok_or(TypeError::UnboundDiffVar(*i)),
            DTerm::Const(c) => {
                let p = self.sig.dconsts.get(c).ok_or_else(|| TypeError::UnknownDiffConst(c.clone()))?;
                Ok(p.clone())
            }
            DTerm::Refl(t) => {
                let ty = self.infer_in(ctx, t)?;
                Ok(Pred::Diff(ty, t.clone(), t.clone()))
            }
            DTerm::LamPoint(ty, body) => {
                self.check_type(ty)?;
                ctx.push_prog("x", ty.clone());
                let r = self.infer_d(ctx, body);
                ctx.pop_prog();
                Ok(Pred::PiPoint(ty.clone(), Box::new(r?)))
            }
            DTerm::AppPoint(f, t) => {
                let fp = self.infer_d(ctx, f)?;
                let fp = self.expose(fp, |p| matches!(p, Pred::PiPoint(..)))?;
                let Pred::PiPoint(dom, body) = fp else {
                    return Err(TypeError::WrongPredShape { expected: "pointwise Pi", actual: pretty::pred(ctx, &fp) });
                };
                let tt = self.infer_in(ctx, t)?;
                self.expect_ty(&dom, &tt)?;
                Ok(body.instantiate(t))
            }
            DTerm::LamDiff(ty, body) => {
                self.check_type(ty)?;
                ctx.push_prog("x", ty.clone());
                ctx.push_prog("y", ty.clone());
                ctx.push_diff("e", Pred::Diff(ty.clone(), var(1), var(0)));
                let r = self.infer_d(ctx, body);
                ctx.pop_diff();
                ctx.pop_prog();
                ctx.pop_prog();
                Ok(Pred::PiDiff(ty.clone(), Box::new(r?)))
            }
            DTerm::AppDiff(f, t, u, d) => {
                let fp = self.infer_d(ctx, f)?;
                let fp = self.expose(fp, |p| matches!(p, Pred::PiDiff(..)))?;
                let Pred::PiDiff(dom, body) = fp else {
                    return Err(TypeError::WrongPredShape { expected: "difference Pi", actual: pretty::pred(ctx, &fp) });
                };
                for x in [t, u] {
                    let xt = self.infer_in(ctx, x)?;
                    self.expect_ty(&dom, &xt)?;
                }
                self.check_d(ctx, d, &Pred::Diff(dom.clone(), t.clone(), u.clone()))?;
                Ok(body.instantiate2(t, u))
            }
            DTerm::Pair(x, y) => Ok(Pred::prod(self.infer_d(ctx, x)?, self.infer_d(ctx, y)?)),
            DTerm::Proj(s, x) => {
                let p = self.infer_d(ctx, x)?;
                let p = self.expose(p, |p| matches!(p, Pred::Prod(..)))?;
                match p {
                    Pred::Prod(l, r) => Ok(if *s == Side::Fst { *l } else { *r }),
                    other => Err(TypeError::WrongPredShape { expected: "product", actual: pretty::pred(ctx, &other) }),
                }
            }
            DTerm::J(j) => {
                let c = &j.motive.carrier;
                self.check_type(c)?;
                ctx.push_prog("x", c.clone());
                ctx.push_prog("y", c.clone());
                let r = self.check_pred_in(ctx, &j.motive.body);
                ctx.pop_prog();
                ctx.pop_prog();
                r?;
                for x in [&j.lhs, &j.rhs] {
                    let xt = self.infer_in(ctx, x)?;
                    if !self.ty_eq(c, &xt) {
                        return Err(TypeError::CarrierMismatch { carrier: pretty::ty(c), actual: pretty::ty(&xt) });
                    }
                }
                let dp = self.infer_d(ctx, &j.diff)?;
                let want = Pred::Diff(c.clone(), j.lhs.clone(), j.rhs.clone());
                if !self.pred_eq(&dp, &want)? {
                    return Err(match dp {
                        Pred::Diff(..) => {
                            TypeError::PredMismatch { expected: pretty::pred(ctx, &want), actual: pretty::pred(ctx, &dp) }
                        }
                        other => TypeError::NotADiff(pretty::pred(ctx, &other)),
                    });
                }
                ctx.push_prog("z", c.clone());
                let r = self.check_d(ctx, &j.branch, &j.motive.diagonal());
                ctx.pop_prog();
                r?;
                Ok(j.motive.instantiate(&j.lhs, &j.rhs))
            }
        }
    }

    // --------------------------------------------------------- purification

    /// Factors `p` through a pure predicate over a single carrier.
    pub fn purify(&self, ctx: &Context, p: &Pred) -> PureFactorization {
        let _ = ctx;
        purify(p)
    }
}

/// Structural purification; total on well-formed predicates.
pub fn purify(p: &Pred) -> PureFactorization {
    match p {
        Pred::Diff(c, t, u) => PureFactorization {
            carrier: c.clone(),
            pure: Pred::Diff(c.clone(), var(1), var(0)),
            lhs: t.clone(),
            rhs: u.clone(),
        },
        Pred::Prod(l, r) => {
            let (a, b) = (purify(l), purify(r));
            let on = |side: Side, q: &Pred| {
                q.substitute_top(2, &[proj(side, var(0)), proj(side, var(1))], 2)
            };
            PureFactorization {
                carrier: Ty::product(a.carrier, b.carrier),
                pure: Pred::prod(on(Side::Fst, &a.pure), on(Side::Snd, &b.pure)),
                lhs: pair(a.lhs, b.lhs),
                rhs: pair(a.rhs, b.rhs),
            }
        }
        Pred::PiPoint(dom, body) => {
            let f = purify(body);
            // under (y, y', w): y = 2, y' = 1, w = 0
            let inner = f.pure.substitute_top(2, &[app(var(1), var(0)), app(var(2), var(0))], 3);
            PureFactorization {
                carrier: Ty::arrow(dom.clone(), f.carrier),
                pure: Pred::PiPoint(dom.clone(), Box::new(inner)),
                lhs: Term::Lam(dom.clone(), Box::new(f.lhs)),
                rhs: Term::Lam(dom.clone(), Box::new(f.rhs)),
            }
        }
        Pred::PiDiff(dom, body) => {
            let f = purify(body);
            // under (y, y', w, w'): y = 3, y' = 2, w = 1, w' = 0
            let inner = f.pure.substitute_top(2, &[apps(var(2), [var(1), var(0)]), apps(var(3), [var(1), var(0)])], 4);
            let lam2 = |t: Term| Term::Lam(dom.clone(), Box::new(Term::Lam(dom.clone(), Box::new(t))));
            PureFactorization {
                carrier: Ty::arrow(dom.clone(), Ty::arrow(dom.clone(), f.carrier)),
                pure: Pred::PiDiff(dom.clone(), Box::new(inner)),
                lhs: lam2(f.lhs),
                rhs: lam2(f.rhs),
            }
        }
    }
}

impl Typer for Checker {
    fn infer_program(&self, ctx: &Context, t: &Term) -> Option<Ty> {
        Checker::infer_program(self, ctx, t).ok()
    }
    fn infer_diff(&self, ctx: &Context, a: &DTerm) -> Option<Pred> {
        Checker::infer_diff(self, ctx, a).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::conv_term;
    use crate::syntax::*;

    fn sig() -> Signature {
        let mut s = Signature::default();
        for b in ["A", "B", "C", "Real"] {
            s.base_types.push(b.into());
        }
        s.consts.insert("f".into(), Ty::arrow(Ty::base("A"), Ty::base("B")));
        s.consts.insert("three".into(), Ty::base("Real"));
        s
    }

    fn a() -> Ty {
        Ty::base("A")
    }

    #[test]
    fn identity_and_self_application() {
        let c = Checker::new(sig());
        assert_eq!(c.infer_program(&Context::new(), &lam(a(), var(0))).unwrap(), Ty::arrow(a(), a()));
        assert!(c.infer_program(&Context::new(), &lam(a(), app(var(0), var(0)))).is_err());
    }

    #[test]
    fn refl_type() {
        let c = Checker::new(sig());
        let p = c.infer_diff(&Context::new(), &DTerm::Refl(cnst("three"))).unwrap();
        assert_eq!(p, Pred::Diff(Ty::base("Real"), cnst("three"), cnst("three")));
    }

    #[test]
    fn der_type() {
        let c = Checker::new(sig());
        let d = der(&cnst("f"), &a(), &Ty::base("B"));
        let p = c.infer_diff(&Context::new(), &d).unwrap();
        let want = Pred::PiDiff(a(), Box::new(Pred::Diff(Ty::base("B"), app(cnst("f"), var(1)), app(cnst("f"), var(0)))));
        assert!(c.pred_eq(&p, &want).unwrap());
    }

    #[test]
    fn carrier_mismatch() {
        let c = Checker::new(sig());
        let p = Pred::Diff(a(), cnst("three"), cnst("three"));
        assert!(matches!(c.check_pred(&Context::new(), &p), Err(TypeError::CarrierMismatch { .. })));
    }

    #[test]
    fn purify_pi_point() {
        // (z, w ∈ A) Πx∈B. D_C(g z x, h z w x)
        let mut s = sig();
        s.consts.insert("g".into(), Ty::arrow(a(), Ty::arrow(Ty::base("B"), Ty::base("C"))));
        s.consts.insert("h".into(), Ty::arrow(a(), Ty::arrow(a(), Ty::arrow(Ty::base("B"), Ty::base("C")))));
        let p = Pred::PiPoint(
            Ty::base("B"),
            Box::new(Pred::Diff(
                Ty::base("C"),
                apps(cnst("g"), [var(2), var(0)]),
                apps(cnst("h"), [var(2), var(1), var(0)]),
            )),
        );
        let f = purify(&p);
        assert_eq!(f.carrier, Ty::arrow(Ty::base("B"), Ty::base("C")));
        assert!(is_pure(&f.pure));
        let back = f.reconstruct();
        let Pred::PiPoint(_, body) = back else { panic!() };
        let Pred::Diff(_, l, r) = *body else { panic!() };
        assert_eq!(conv_term(&l, 1000).unwrap(), apps(cnst("g"), [var(2), var(0)]));
        assert_eq!(conv_term(&r, 1000).unwrap(), apps(cnst("h"), [var(2), var(1), var(0)]));
    }
}
