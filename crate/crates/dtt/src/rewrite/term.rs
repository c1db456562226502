//! Program-term reduction: β for functions, pairs and the sub-exponential
//! eliminators, optional η.

use crate::syntax::{Equation, Side, Term};

/// The root redex of `t`, if any.
pub fn root(t: &Term, eta: bool) -> Option<(Term, &'static str)> {
    root_with(t, eta, &[])
}

/// Root step including declared constant equations.
pub fn root_with(t: &Term, eta: bool, eqs: &[Equation]) -> Option<(Term, &'static str)> {
    if let Some(r) = eqs.iter().find_map(|e| e.apply(t)) {
        return Some((r, "delta"));
    }
    match t {
        Term::App(f, a) => match &**f {
            Term::Lam(_, b) => Some((b.instantiate(a), "beta")),
            _ => None,
        },
        Term::Proj(s, p) => match &**p {
            Term::Pair(a, b) | Term::Tensor(a, b) => Some(((if *s == Side::Fst { a } else { b }).as_ref().clone(), "beta")),
            _ => None,
        },
        Term::LetBang(s, u) => match &**s {
            Term::Bang(v) => Some((u.instantiate(v), "beta")),
            _ => None,
        },
        Term::LetTensor(s, u) => match &**s {
            Term::Tensor(a, b) | Term::Pair(a, b) => {
                Some((u.substitute_top(2, &[b.as_ref().clone(), a.as_ref().clone()], 0), "beta"))
            }
            _ => None,
        },
        Term::Lam(_, b) if eta => match &**b {
            Term::App(f, x) if **x == Term::Var(0) && !f.has_var(0) => Some((f.shift(-1, 0), "eta")),
            _ => None,
        },
        Term::Pair(a, b) if eta => match (&**a, &**b) {
            (Term::Proj(Side::Fst, p), Term::Proj(Side::Snd, q)) if p == q => Some((p.as_ref().clone(), "eta")),
            _ => None,
        },
        _ => None,
    }
}

/// One leftmost-outermost step.
pub fn step(t: &Term, eta: bool) -> Option<(Term, &'static str)> {
    step_with(t, eta, &[])
}

pub fn step_with(t: &Term, eta: bool, eqs: &[Equation]) -> Option<(Term, &'static str)> {
    if let Some(r) = root_with(t, eta, eqs) {
        return Some(r);
    }
    let step = |t: &Term, eta: bool| step_with(t, eta, eqs);
    let bx = |t: Term| Box::new(t);
    match t {
        Term::Var(_) | Term::Const(_) => None,
        Term::Lam(a, b) => step(b, eta).map(|(b, n)| (Term::Lam(a.clone(), bx(b)), n)),
        Term::Proj(s, p) => step(p, eta).map(|(p, n)| (Term::Proj(*s, bx(p)), n)),
        Term::Bang(p) => step(p, eta).map(|(p, n)| (Term::Bang(bx(p)), n)),
        Term::App(x, y) | Term::Pair(x, y) | Term::Tensor(x, y) | Term::LetBang(x, y) | Term::LetTensor(x, y) => {
            let rebuild = |x: Term, y: Term| match t {
                Term::App(..) => Term::App(bx(x), bx(y)),
                Term::Pair(..) => Term::Pair(bx(x), bx(y)),
                Term::Tensor(..) => Term::Tensor(bx(x), bx(y)),
                Term::LetBang(..) => Term::LetBang(bx(x), bx(y)),
                _ => Term::LetTensor(bx(x), bx(y)),
            };
            if let Some((x2, n)) = step(x, eta) {
                return Some((rebuild(x2, y.as_ref().clone()), n));
            }
            step(y, eta).map(|(y2, n)| (rebuild(x.as_ref().clone(), y2), n))
        }
    }
}

/// One innermost (rightmost-innermost first) step, used to compare strategies.
pub fn step_inner(t: &Term, eta: bool) -> Option<(Term, &'static str)> {
    let bx = |t: Term| Box::new(t);
    let inner = match t {
        Term::Var(_) | Term::Const(_) => None,
        Term::Lam(a, b) => step_inner(b, eta).map(|(b, n)| (Term::Lam(a.clone(), bx(b)), n)),
        Term::Proj(s, p) => step_inner(p, eta).map(|(p, n)| (Term::Proj(*s, bx(p)), n)),
        Term::Bang(p) => step_inner(p, eta).map(|(p, n)| (Term::Bang(bx(p)), n)),
        Term::App(x, y) | Term::Pair(x, y) | Term::Tensor(x, y) | Term::LetBang(x, y) | Term::LetTensor(x, y) => {
            let rebuild = |x: Term, y: Term| match t {
                Term::App(..) => Term::App(bx(x), bx(y)),
                Term::Pair(..) => Term::Pair(bx(x), bx(y)),
                Term::Tensor(..) => Term::Tensor(bx(x), bx(y)),
                Term::LetBang(..) => Term::LetBang(bx(x), bx(y)),
                _ => Term::LetTensor(bx(x), bx(y)),
            };
            if let Some((y2, n)) = step_inner(y, eta) {
                Some((rebuild(x.as_ref().clone(), y2), n))
            } else {
                step_inner(x, eta).map(|(x2, n)| (rebuild(x2, y.as_ref().clone()), n))
            }
        }
    };
    inner.or_else(|| root(t, eta))
}

/// All one-step reducts at every position.
pub fn reducts(t: &Term, eta: bool) -> Vec<Term> {
    let mut out: Vec<Term> = root(t, eta).into_iter().map(|(r, _)| r).collect();
    let bx = |t: Term| Box::new(t);
    match t {
        Term::Var(_) | Term::Const(_) => {}
        Term::Lam(a, b) => out.extend(reducts(b, eta).into_iter().map(|b| Term::Lam(a.clone(), bx(b)))),
        Term::Proj(s, p) => out.extend(reducts(p, eta).into_iter().map(|p| Term::Proj(*s, bx(p)))),
        Term::Bang(p) => out.extend(reducts(p, eta).into_iter().map(|p| Term::Bang(bx(p)))),
        Term::App(x, y) | Term::Pair(x, y) | Term::Tensor(x, y) | Term::LetBang(x, y) | Term::LetTensor(x, y) => {
            let rebuild = |x: Term, y: Term| match t {
                Term::App(..) => Term::App(bx(x), bx(y)),
                Term::Pair(..) => Term::Pair(bx(x), bx(y)),
                Term::Tensor(..) => Term::Tensor(bx(x), bx(y)),
                Term::LetBang(..) => Term::LetBang(bx(x), bx(y)),
                _ => Term::LetTensor(bx(x), bx(y)),
            };
            for x2 in reducts(x, eta) {
                out.push(rebuild(x2, y.as_ref().clone()));
            }
            for y2 in reducts(y, eta) {
                out.push(rebuild(x.as_ref().clone(), y2));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::*;

    #[test]
    fn beta_identity() {
        let t = app(lam(Ty::base("A"), var(0)), cnst("y"));
        assert_eq!(step(&t, false).unwrap().0, cnst("y"));
    }

    #[test]
    fn eta_needs_flag() {
        let t = lam(Ty::base("A"), app(cnst("f"), var(0)));
        assert!(step(&t, false).is_none());
        assert_eq!(step(&t, true).unwrap().0, cnst("f"));
    }

    #[test]
    fn let_tensor_order() {
        // let (x, y) = (a, b) in (y, x)  ~>  (b, a)
        let t = Term::LetTensor(
            Box::new(Term::Tensor(Box::new(cnst("a")), Box::new(cnst("b")))),
            Box::new(Term::Tensor(Box::new(var(0)), Box::new(var(1)))),
        );
        assert_eq!(step(&t, false).unwrap().0, Term::Tensor(Box::new(cnst("b")), Box::new(cnst("a"))));
    }
}
