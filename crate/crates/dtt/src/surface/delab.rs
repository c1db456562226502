//! Kernel syntax back to surface syntax, regenerating names.

use std::collections::BTreeSet;

use super::{Binder, Class, Expr, JExpr};
use crate::syntax::{is_numeral, Context, DTerm, Pred, Side, Term, Ty};

const PROG_NAMES: [&str; 6] = ["x", "y", "z", "w", "v", "u"];
const DIFF_NAMES: [&str; 3] = ["e", "d", "c"];

/// Name supply tracking both zones; the last name of each zone is index 0.
#[derive(Clone, Debug, Default)]
pub struct Namer {
    prog: Vec<String>,
    diff: Vec<String>,
    reserved: BTreeSet<String>,
}

impl Namer {
    pub fn new(ctx: &Context) -> Self {
        Namer {
            prog: ctx.prog.iter().map(|e| e.name.clone()).collect(),
            diff: ctx.diff.iter().map(|e| e.name.clone()).collect(),
            reserved: BTreeSet::new(),
        }
    }

    pub fn reserve<'a>(&mut self, names: impl IntoIterator<Item = &'a str>) {
        self.reserved.extend(names.into_iter().map(String::from));
    }

    fn taken(&self, s: &str) -> bool {
        self.reserved.contains(s) || self.prog.iter().any(|n| n == s) || self.diff.iter().any(|n| n == s)
    }

    fn fresh(&self, pool: &[&str]) -> String {
        for k in 0.. {
            for base in pool {
                let cand = if k == 0 { base.to_string() } else { format!("{base}{k}") };
                if !self.taken(&cand) {
                    return cand;
                }
            }
        }
        unreachable!()
    }

    fn push_prog(&mut self) -> String {
        let n = self.fresh(&PROG_NAMES);
        self.prog.push(n.clone());
        n
    }

    fn push_diff(&mut self) -> String {
        let n = self.fresh(&DIFF_NAMES);
        self.diff.push(n.clone());
        n
    }

    fn prog_name(&self, i: usize) -> String {
        let n = self.prog.len();
        if i < n {
            self.prog[n - 1 - i].clone()
        } else {
            format!("#{i}")
        }
    }

    fn diff_name(&self, i: usize) -> String {
        let n = self.diff.len();
        if i < n {
            self.diff[n - 1 - i].clone()
        } else {
            format!("#d{i}")
        }
    }

    pub fn ty(&self, t: &Ty) -> Class {
        ty(t)
    }

    pub fn term(&mut self, t: &Term) -> Expr {
        let b = Box::new;
        match t {
            Term::Var(i) => Expr::Var(self.prog_name(*i)),
            Term::Const(c) if is_numeral(c) => Expr::Num(c.clone()),
            Term::Const(c) => Expr::Var(c.clone()),
            Term::Lam(a, body) => {
                let x = self.push_prog();
                let body = self.term(body);
                self.prog.pop();
                fun(Binder { names: vec![x], ann: Some(ty(a)) }, body)
            }
            Term::App(f, a) => Expr::app(self.term(f), self.term(a)),
            Term::Pair(x, y) | Term::Tensor(x, y) => Expr::Pair(b(self.term(x)), b(self.term(y))),
            Term::Proj(Side::Fst, p) => Expr::Fst(b(self.term(p))),
            Term::Proj(Side::Snd, p) => Expr::Snd(b(self.term(p))),
            Term::Bang(p) => Expr::Bang(b(self.term(p))),
            Term::LetBang(s, u) => {
                let s = self.term(s);
                let x = self.push_prog();
                let u = self.term(u);
                self.prog.pop();
                Expr::LetBang(x, b(s), b(u))
            }
            Term::LetTensor(s, u) => {
                let s = self.term(s);
                let x = self.push_prog();
                let y = self.push_prog();
                let u = self.term(u);
                self.prog.pop();
                self.prog.pop();
                Expr::LetPair(x, y, b(s), b(u))
            }
        }
    }

    pub fn pred(&mut self, p: &Pred) -> Class {
        let b = Box::new;
        match p {
            Pred::Diff(a, t, u) => Class::Diff(b(ty(a)), self.term(t), self.term(u)),
            Pred::Prod(x, y) => Class::Product(b(self.pred(x)), b(self.pred(y))),
            Pred::PiPoint(a, body) => {
                let x = self.push_prog();
                let body = self.pred(body);
                self.prog.pop();
                Class::Pi(x, b(ty(a)), b(body))
            }
            Pred::PiDiff(a, body) => {
                let x = self.push_prog();
                let y = self.push_prog();
                let body = self.pred(body);
                self.prog.pop();
                self.prog.pop();
                Class::PiDiff(x, y, b(ty(a)), b(body))
            }
        }
    }

    pub fn dterm(&mut self, a: &DTerm) -> Expr {
        let b = Box::new;
        if let Some(f) = der_pattern(a) {
            return Expr::Der(b(self.term(&f)));
        }
        match a {
            DTerm::Var(i) => Expr::Var(self.diff_name(*i)),
            DTerm::Const(c) => Expr::Var(c.clone()),
            DTerm::Refl(t) => Expr::Refl(b(self.term(t))),
            DTerm::LamPoint(t, body) => {
                let x = self.push_prog();
                let body = self.dterm(body);
                self.prog.pop();
                fun(Binder { names: vec![x], ann: Some(ty(t)) }, body)
            }
            DTerm::LamDiff(t, body) => {
                let x = self.push_prog();
                let y = self.push_prog();
                let e = self.push_diff();
                let body = self.dterm(body);
                self.diff.pop();
                self.prog.pop();
                self.prog.pop();
                let dom = ty(t);
                let eb = Binder {
                    names: vec![e],
                    ann: Some(Class::Diff(Box::new(dom.clone()), Expr::Var(x.clone()), Expr::Var(y.clone()))),
                };
                fun(Binder { names: vec![x, y], ann: Some(dom) }, fun(eb, body))
            }
            DTerm::AppPoint(f, t) => Expr::app(self.dterm(f), self.term(t)),
            DTerm::AppDiff(f, t, u, d) => {
                let f = self.dterm(f);
                Expr::apps(f, [self.term(t), self.term(u), self.dterm(d)])
            }
            DTerm::Pair(x, y) => Expr::Pair(b(self.dterm(x)), b(self.dterm(y))),
            DTerm::Proj(Side::Fst, p) => Expr::Fst(b(self.dterm(p))),
            DTerm::Proj(Side::Snd, p) => Expr::Snd(b(self.dterm(p))),
            DTerm::J(j) => {
                let lhs = self.term(&j.lhs);
                let rhs = self.term(&j.rhs);
                let diff = self.dterm(&j.diff);
                let x = self.push_prog();
                let y = self.push_prog();
                let motive = self.pred(&j.motive.body);
                self.prog.pop();
                self.prog.pop();
                let z = self.push_prog();
                let branch = self.dterm(&j.branch);
                self.prog.pop();
                Expr::J(Box::new(JExpr { x, y, carrier: Some(ty(&j.motive.carrier)), motive, lhs, rhs, diff, z, branch }))
            }
        }
    }
}

/// Merges nested `fun` binders into one binder list.
fn fun(b: Binder, body: Expr) -> Expr {
    match body {
        Expr::Fun(mut bs, inner) => {
            if bs[0].ann == b.ann && b.ann.is_some() && !matches!(b.ann, Some(Class::Diff(..))) {
                let mut names = b.names;
                names.append(&mut bs[0].names);
                bs[0].names = names;
            } else {
                bs.insert(0, b);
            }
            Expr::Fun(bs, inner)
        }
        body => Expr::Fun(vec![b], Box::new(body)),
    }
}

pub fn ty(t: &Ty) -> Class {
    let b = Box::new;
    match t {
        Ty::Base(n) => Class::Name(n.clone(), vec![]),
        Ty::Arrow(x, y) => Class::Arrow(b(ty(x)), b(ty(y))),
        Ty::Lolli(x, y) => Class::Lolli(b(ty(x)), b(ty(y))),
        Ty::Product(x, y) => Class::Product(b(ty(x)), b(ty(y))),
        Ty::Tensor(x, y) => Class::Tensor(b(ty(x)), b(ty(y))),
        Ty::Bang(r, x) => Class::Bang(*r, b(ty(x))),
    }
}

/// `t` with all free indices lowered by `d`, if none of `0..d` occurs.
fn unshift(t: &Term, d: usize) -> Option<Term> {
    let mut ok = true;
    t.map_vars(0, &mut |i, depth| {
        if i >= depth && i < depth + d {
            ok = false;
        }
        Term::Var(i)
    });
    ok.then(|| t.shift(-(d as isize), 0))
}

/// Recognizes the expansion of `Der f` and returns `f`.
pub fn der_pattern(a: &DTerm) -> Option<Term> {
    let DTerm::LamDiff(dom, body) = a else { return None };
    let DTerm::J(j) = body.as_ref() else { return None };
    if &j.motive.carrier != dom
        || j.lhs != Term::Var(1)
        || j.rhs != Term::Var(0)
        || j.diff != DTerm::Var(0)
    {
        return None;
    }
    let Pred::Diff(_, Term::App(f1, x1), Term::App(f2, y1)) = &j.motive.body else { return None };
    if **x1 != Term::Var(1) || **y1 != Term::Var(0) || f1 != f2 {
        return None;
    }
    let DTerm::Refl(Term::App(f3, z)) = &j.branch else { return None };
    if **z != Term::Var(0) {
        return None;
    }
    let f = unshift(f1, 4)?;
    (f.shift(3, 0) == **f3).then_some(f)
}

fn consts_in(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Const(c) => {
            out.insert(c.clone());
        }
        Term::Var(_) => {}
        Term::Lam(_, x) | Term::Proj(_, x) | Term::Bang(x) => consts_in(x, out),
        Term::App(x, y) | Term::Pair(x, y) | Term::Tensor(x, y) | Term::LetBang(x, y) | Term::LetTensor(x, y) => {
            consts_in(x, out);
            consts_in(y, out);
        }
    }
}

fn consts_pred(p: &Pred, out: &mut BTreeSet<String>) {
    match p {
        Pred::Diff(_, t, u) => {
            consts_in(t, out);
            consts_in(u, out);
        }
        Pred::Prod(x, y) => {
            consts_pred(x, out);
            consts_pred(y, out);
        }
        Pred::PiPoint(_, x) | Pred::PiDiff(_, x) => consts_pred(x, out),
    }
}

fn consts_dterm(a: &DTerm, out: &mut BTreeSet<String>) {
    match a {
        DTerm::Var(_) => {}
        DTerm::Const(c) => {
            out.insert(c.clone());
        }
        DTerm::Refl(t) => consts_in(t, out),
        DTerm::LamPoint(_, x) | DTerm::LamDiff(_, x) | DTerm::Proj(_, x) => consts_dterm(x, out),
        DTerm::AppPoint(f, t) => {
            consts_dterm(f, out);
            consts_in(t, out);
        }
        DTerm::AppDiff(f, t, u, d) => {
            consts_dterm(f, out);
            consts_in(t, out);
            consts_in(u, out);
            consts_dterm(d, out);
        }
        DTerm::Pair(x, y) => {
            consts_dterm(x, out);
            consts_dterm(y, out);
        }
        DTerm::J(j) => {
            consts_pred(&j.motive.body, out);
            consts_in(&j.lhs, out);
            consts_in(&j.rhs, out);
            consts_dterm(&j.diff, out);
            consts_dterm(&j.branch, out);
        }
    }
}

pub fn term(ctx: &Context, t: &Term) -> Expr {
    let mut r = BTreeSet::new();
    consts_in(t, &mut r);
    let mut n = Namer::new(ctx);
    n.reserved = r;
    n.term(t)
}

pub fn pred(ctx: &Context, p: &Pred) -> Class {
    let mut r = BTreeSet::new();
    consts_pred(p, &mut r);
    let mut n = Namer::new(ctx);
    n.reserved = r;
    n.pred(p)
}

pub fn dterm(ctx: &Context, a: &DTerm) -> Expr {
    let mut r = BTreeSet::new();
    consts_dterm(a, &mut r);
    let mut n = Namer::new(ctx);
    n.reserved = r;
    n.dterm(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Printer;
    use crate::syntax::*;

    #[test]
    fn der_sugar_is_recovered() {
        let d = der(&cnst("f"), &Ty::base("A"), &Ty::base("B"));
        assert_eq!(Printer.expr(&dterm(&Context::new(), &d)), "Der f");
    }

    #[test]
    fn names_avoid_constants() {
        let t = lam(Ty::base("A"), app(cnst("x"), var(0)));
        assert_eq!(Printer.expr(&term(&Context::new(), &t)), "fun (y : A) => x y");
    }

    #[test]
    fn lam_diff_binders() {
        let a = DTerm::lam_diff(Ty::base("A"), DTerm::Var(0));
        assert_eq!(Printer.expr(&dterm(&Context::new(), &a)), "fun (x y : A) (e : D[A](x, y)) => e");
    }
}
