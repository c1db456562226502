//! Abstract syntax for types, predicates, program terms and difference terms.
//!
//! Both term sorts use de Bruijn indices. Program variables and difference
//! variables live in separate index spaces.

use num_rational::Rational64;
use std::collections::BTreeMap;

use crate::error::SyntaxError;

pub type Name = String;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Base(Name),
    Arrow(Box<Ty>, Box<Ty>),
    Product(Box<Ty>, Box<Ty>),
    Bang(Rational64, Box<Ty>),
    Lolli(Box<Ty>, Box<Ty>),
    Tensor(Box<Ty>, Box<Ty>),
}

impl Ty {
    pub fn base(n: &str) -> Ty {
        Ty::Base(n.to_string())
    }
    pub fn arrow(a: Ty, b: Ty) -> Ty {
        Ty::Arrow(Box::new(a), Box::new(b))
    }
    pub fn product(a: Ty, b: Ty) -> Ty {
        Ty::Product(Box::new(a), Box::new(b))
    }
    pub fn lolli(a: Ty, b: Ty) -> Ty {
        Ty::Lolli(Box::new(a), Box::new(b))
    }
    pub fn tensor(a: Ty, b: Ty) -> Ty {
        Ty::Tensor(Box::new(a), Box::new(b))
    }
    pub fn bang(r: Rational64, a: Ty) -> Ty {
        Ty::Bang(r, Box::new(a))
    }

    /// Domain and codomain of a function type of either calculus.
    pub fn as_function(&self) -> Option<(&Ty, &Ty)> {
        match self {
            Ty::Arrow(a, b) | Ty::Lolli(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(&Ty, &Ty)> {
        match self {
            Ty::Product(a, b) | Ty::Tensor(a, b) => Some((a, b)),
            _ => None,
        }
    }

    /// Strips outer `!_r` layers.
    pub fn unbang(&self) -> &Ty {
        match self {
            Ty::Bang(_, a) => a.unbang(),
            t => t,
        }
    }

    pub fn is_subexp(&self) -> bool {
        match self {
            Ty::Base(_) => true,
            Ty::Bang(_, a) => a.is_subexp(),
            Ty::Lolli(a, b) | Ty::Tensor(a, b) => a.is_subexp() && b.is_subexp(),
            Ty::Arrow(..) | Ty::Product(..) => false,
        }
    }

    pub fn is_first_order(&self) -> bool {
        match self {
            Ty::Base(_) => true,
            Ty::Bang(_, a) => a.is_first_order(),
            Ty::Product(a, b) | Ty::Tensor(a, b) => a.is_first_order() && b.is_first_order(),
            Ty::Arrow(..) | Ty::Lolli(..) => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Fst,
    Snd,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(usize),
    Lam(Ty, Box<Term>),
    App(Box<Term>, Box<Term>),
    Pair(Box<Term>, Box<Term>),
    Proj(Side, Box<Term>),
    Const(Name),
    Bang(Box<Term>),
    /// `let !x = t in u`; `u` binds one variable.
    LetBang(Box<Term>, Box<Term>),
    Tensor(Box<Term>, Box<Term>),
    /// `let (x, y) = t in u`; `u` binds `x` at index 1 and `y` at index 0.
    LetTensor(Box<Term>, Box<Term>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Pred {
    Diff(Ty, Term, Term),
    Prod(Box<Pred>, Box<Pred>),
    /// Binds one program variable.
    PiPoint(Ty, Box<Pred>),
    /// Binds `x` (index 1) and `y` (index 0); the difference variable is
    /// invisible to predicates.
    PiDiff(Ty, Box<Pred>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Motive {
    pub carrier: Ty,
    /// Binds `x` (index 1) and `y` (index 0).
    pub body: Pred,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JElim {
    pub motive: Motive,
    pub lhs: Term,
    pub rhs: Term,
    pub diff: DTerm,
    /// Binds one program variable.
    pub branch: DTerm,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DTerm {
    Var(usize),
    LamPoint(Ty, Box<DTerm>),
    AppPoint(Box<DTerm>, Term),
    /// Binds program `x` (1), `y` (0) and difference variable 0.
    LamDiff(Ty, Box<DTerm>),
    AppDiff(Box<DTerm>, Term, Term, Box<DTerm>),
    Pair(Box<DTerm>, Box<DTerm>),
    Proj(Side, Box<DTerm>),
    Refl(Term),
    J(Box<JElim>),
    Const(Name),
}

// ---------------------------------------------------------------------------
// constructors

pub fn var(i: usize) -> Term {
    Term::Var(i)
}
pub fn lam(a: Ty, b: Term) -> Term {
    Term::Lam(a, Box::new(b))
}
pub fn app(f: Term, a: Term) -> Term {
    Term::App(Box::new(f), Box::new(a))
}
pub fn apps(f: Term, args: impl IntoIterator<Item = Term>) -> Term {
    args.into_iter().fold(f, app)
}
pub fn pair(a: Term, b: Term) -> Term {
    Term::Pair(Box::new(a), Box::new(b))
}
pub fn proj(s: Side, t: Term) -> Term {
    Term::Proj(s, Box::new(t))
}
pub fn cnst(n: &str) -> Term {
    Term::Const(n.to_string())
}

pub fn diff(a: Ty, t: Term, u: Term) -> Pred {
    Pred::Diff(a, t, u)
}

impl DTerm {
    pub fn refl(t: Term) -> DTerm {
        DTerm::Refl(t)
    }
    pub fn j(motive: Motive, lhs: Term, rhs: Term, diff: DTerm, branch: DTerm) -> DTerm {
        DTerm::J(Box::new(JElim { motive, lhs, rhs, diff, branch }))
    }
    pub fn app_diff(f: DTerm, t: Term, u: Term, a: DTerm) -> DTerm {
        DTerm::AppDiff(Box::new(f), t, u, Box::new(a))
    }
    pub fn app_point(f: DTerm, t: Term) -> DTerm {
        DTerm::AppPoint(Box::new(f), t)
    }
    pub fn lam_diff(a: Ty, body: DTerm) -> DTerm {
        DTerm::LamDiff(a, Box::new(body))
    }
    pub fn lam_point(a: Ty, body: DTerm) -> DTerm {
        DTerm::LamPoint(a, Box::new(body))
    }
    pub fn pair(a: DTerm, b: DTerm) -> DTerm {
        DTerm::Pair(Box::new(a), Box::new(b))
    }
}

/// `Der f = λxyε. J[x' y'. D_B(f x', f y')](x, y, ε, [z] ∂(f z))`, with `f`
/// living in the ambient context.
pub fn der(f: &Term, dom: &Ty, cod: &Ty) -> DTerm {
    let motive = Motive {
        carrier: dom.clone(),
        body: Pred::Diff(
            cod.clone(),
            app(f.shift(4, 0), var(1)),
            app(f.shift(4, 0), var(0)),
        ),
    };
    DTerm::lam_diff(
        dom.clone(),
        DTerm::j(
            motive,
            var(1),
            var(0),
            DTerm::Var(0),
            DTerm::Refl(app(f.shift(3, 0), var(0))),
        ),
    )
}

// ---------------------------------------------------------------------------
// traversal

impl Term {
    /// Rebuilds the term, replacing each variable occurrence `Var(i)` seen
    /// under `depth` binders by `f(i, depth)`.
    pub fn map_vars<F: FnMut(usize, usize) -> Term>(&self, depth: usize, f: &mut F) -> Term {
        match self {
            Term::Var(i) => f(*i, depth),
            Term::Lam(a, b) => Term::Lam(a.clone(), Box::new(b.map_vars(depth + 1, f))),
            Term::App(g, a) => Term::App(Box::new(g.map_vars(depth, f)), Box::new(a.map_vars(depth, f))),
            Term::Pair(a, b) => Term::Pair(Box::new(a.map_vars(depth, f)), Box::new(b.map_vars(depth, f))),
            Term::Proj(s, t) => Term::Proj(*s, Box::new(t.map_vars(depth, f))),
            Term::Const(n) => Term::Const(n.clone()),
            Term::Bang(t) => Term::Bang(Box::new(t.map_vars(depth, f))),
            Term::LetBang(t, u) => Term::LetBang(Box::new(t.map_vars(depth, f)), Box::new(u.map_vars(depth + 1, f))),
            Term::Tensor(a, b) => Term::Tensor(Box::new(a.map_vars(depth, f)), Box::new(b.map_vars(depth, f))),
            Term::LetTensor(t, u) => {
                Term::LetTensor(Box::new(t.map_vars(depth, f)), Box::new(u.map_vars(depth + 2, f)))
            }
        }
    }

    pub fn shift(&self, d: isize, cutoff: usize) -> Term {
        if d == 0 {
            return self.clone();
        }
        self.map_vars(0, &mut |i, k| {
            if i >= k + cutoff {
                Term::Var((i as isize + d) as usize)
            } else {
                Term::Var(i)
            }
        })
    }

    /// Substitutes `s` for variable `j` and lowers the variables above it.
    pub fn subst(&self, j: usize, s: &Term) -> Term {
        self.map_vars(0, &mut |i, k| {
            if i == k + j {
                s.shift(k as isize, 0)
            } else if i > k + j {
                Term::Var(i - 1)
            } else {
                Term::Var(i)
            }
        })
    }

    /// Instantiates the outermost bound variable (index 0).
    pub fn instantiate(&self, s: &Term) -> Term {
        self.subst(0, s)
    }

    /// Replaces the top `n_old` variables by `repls` (index 0 first), where
    /// the replacements live in a context with `n_new` fresh variables on top
    /// of the shared ambient context.
    pub fn substitute_top(&self, n_old: usize, repls: &[Term], n_new: usize) -> Term {
        debug_assert_eq!(repls.len(), n_old);
        self.map_vars(0, &mut |i, k| {
            if i < k {
                Term::Var(i)
            } else if i - k < n_old {
                repls[i - k].shift(k as isize, 0)
            } else {
                Term::Var(i - n_old + n_new)
            }
        })
    }

    pub fn has_var(&self, j: usize) -> bool {
        let mut found = false;
        self.map_vars(0, &mut |i, k| {
            if i == k + j {
                found = true;
            }
            Term::Var(i)
        });
        found
    }

    /// Largest free index + 1 (0 if closed).
    pub fn free_bound(&self) -> usize {
        let mut m = 0;
        self.map_vars(0, &mut |i, k| {
            if i >= k {
                m = m.max(i - k + 1);
            }
            Term::Var(i)
        });
        m
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) => 1,
            Term::Lam(_, b) | Term::Proj(_, b) | Term::Bang(b) => 1 + b.size(),
            Term::App(a, b) | Term::Pair(a, b) | Term::Tensor(a, b) | Term::LetBang(a, b) | Term::LetTensor(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

impl Pred {
    pub fn map_vars<F: FnMut(usize, usize) -> Term>(&self, depth: usize, f: &mut F) -> Pred {
        match self {
            Pred::Diff(a, t, u) => Pred::Diff(a.clone(), t.map_vars(depth, f), u.map_vars(depth, f)),
            Pred::Prod(p, q) => Pred::Prod(Box::new(p.map_vars(depth, f)), Box::new(q.map_vars(depth, f))),
            Pred::PiPoint(a, p) => Pred::PiPoint(a.clone(), Box::new(p.map_vars(depth + 1, f))),
            Pred::PiDiff(a, p) => Pred::PiDiff(a.clone(), Box::new(p.map_vars(depth + 2, f))),
        }
    }

    pub fn shift(&self, d: isize, cutoff: usize) -> Pred {
        if d == 0 {
            return self.clone();
        }
        self.map_vars(0, &mut |i, k| {
            if i >= k + cutoff {
                Term::Var((i as isize + d) as usize)
            } else {
                Term::Var(i)
            }
        })
    }

    pub fn subst(&self, j: usize, s: &Term) -> Pred {
        self.map_vars(0, &mut |i, k| {
            if i == k + j {
                s.shift(k as isize, 0)
            } else if i > k + j {
                Term::Var(i - 1)
            } else {
                Term::Var(i)
            }
        })
    }

    pub fn instantiate(&self, s: &Term) -> Pred {
        self.subst(0, s)
    }

    /// Instantiates a two-variable body (`x` at 1, `y` at 0).
    pub fn instantiate2(&self, x: &Term, y: &Term) -> Pred {
        self.substitute_top(2, &[y.clone(), x.clone()], 0)
    }

    pub fn substitute_top(&self, n_old: usize, repls: &[Term], n_new: usize) -> Pred {
        self.map_vars(0, &mut |i, k| {
            if i < k {
                Term::Var(i)
            } else if i - k < n_old {
                repls[i - k].shift(k as isize, 0)
            } else {
                Term::Var(i - n_old + n_new)
            }
        })
    }

    pub fn has_var(&self, j: usize) -> bool {
        let mut found = false;
        self.map_vars(0, &mut |i, k| {
            if i == k + j {
                found = true;
            }
            Term::Var(i)
        });
        found
    }

    pub fn prod(p: Pred, q: Pred) -> Pred {
        Pred::Prod(Box::new(p), Box::new(q))
    }
}

impl Motive {
    pub fn instantiate(&self, x: &Term, y: &Term) -> Pred {
        self.body.instantiate2(x, y)
    }
    /// The diagonal instance `C(x, x)` in the context extended by `x`.
    pub fn diagonal(&self) -> Pred {
        self.body.substitute_top(2, &[Term::Var(0), Term::Var(0)], 1)
    }
}

impl DTerm {
    /// Maps program-variable occurrences. `depth` counts program binders.
    pub fn map_prog<F: FnMut(usize, usize) -> Term>(&self, depth: usize, f: &mut F) -> DTerm {
        match self {
            DTerm::Var(i) => DTerm::Var(*i),
            DTerm::LamPoint(a, b) => DTerm::LamPoint(a.clone(), Box::new(b.map_prog(depth + 1, f))),
            DTerm::AppPoint(g, t) => DTerm::AppPoint(Box::new(g.map_prog(depth, f)), t.map_vars(depth, f)),
            DTerm::LamDiff(a, b) => DTerm::LamDiff(a.clone(), Box::new(b.map_prog(depth + 2, f))),
            DTerm::AppDiff(g, t, u, a) => DTerm::AppDiff(
                Box::new(g.map_prog(depth, f)),
                t.map_vars(depth, f),
                u.map_vars(depth, f),
                Box::new(a.map_prog(depth, f)),
            ),
            DTerm::Pair(a, b) => DTerm::Pair(Box::new(a.map_prog(depth, f)), Box::new(b.map_prog(depth, f))),
            DTerm::Proj(s, a) => DTerm::Proj(*s, Box::new(a.map_prog(depth, f))),
            DTerm::Refl(t) => DTerm::Refl(t.map_vars(depth, f)),
            DTerm::J(j) => DTerm::J(Box::new(JElim {
                motive: Motive { carrier: j.motive.carrier.clone(), body: j.motive.body.map_vars(depth + 2, f) },
                lhs: j.lhs.map_vars(depth, f),
                rhs: j.rhs.map_vars(depth, f),
                diff: j.diff.map_prog(depth, f),
                branch: j.branch.map_prog(depth + 1, f),
            })),
            DTerm::Const(n) => DTerm::Const(n.clone()),
        }
    }

    /// Maps difference-variable occurrences; the callback receives the index,
    /// the program depth and the difference depth.
    pub fn map_diff<F: FnMut(usize, usize, usize) -> DTerm>(&self, pd: usize, dd: usize, f: &mut F) -> DTerm {
        match self {
            DTerm::Var(i) => f(*i, pd, dd),
            DTerm::LamPoint(a, b) => DTerm::LamPoint(a.clone(), Box::new(b.map_diff(pd + 1, dd, f))),
            DTerm::AppPoint(g, t) => DTerm::AppPoint(Box::new(g.map_diff(pd, dd, f)), t.clone()),
            DTerm::LamDiff(a, b) => DTerm::LamDiff(a.clone(), Box::new(b.map_diff(pd + 2, dd + 1, f))),
            DTerm::AppDiff(g, t, u, a) => DTerm::AppDiff(
                Box::new(g.map_diff(pd, dd, f)),
                t.clone(),
                u.clone(),
                Box::new(a.map_diff(pd, dd, f)),
            ),
            DTerm::Pair(a, b) => DTerm::Pair(Box::new(a.map_diff(pd, dd, f)), Box::new(b.map_diff(pd, dd, f))),
            DTerm::Proj(s, a) => DTerm::Proj(*s, Box::new(a.map_diff(pd, dd, f))),
            DTerm::Refl(t) => DTerm::Refl(t.clone()),
            DTerm::J(j) => DTerm::J(Box::new(JElim {
                motive: j.motive.clone(),
                lhs: j.lhs.clone(),
                rhs: j.rhs.clone(),
                diff: j.diff.map_diff(pd, dd, f),
                branch: j.branch.map_diff(pd + 1, dd, f),
            })),
            DTerm::Const(n) => DTerm::Const(n.clone()),
        }
    }

    pub fn shift_prog(&self, d: isize, cutoff: usize) -> DTerm {
        if d == 0 {
            return self.clone();
        }
        self.map_prog(0, &mut |i, k| {
            if i >= k + cutoff {
                Term::Var((i as isize + d) as usize)
            } else {
                Term::Var(i)
            }
        })
    }

    pub fn shift_diff(&self, d: isize, cutoff: usize) -> DTerm {
        if d == 0 {
            return self.clone();
        }
        self.map_diff(0, 0, &mut |i, _, k| {
            if i >= k + cutoff {
                DTerm::Var((i as isize + d) as usize)
            } else {
                DTerm::Var(i)
            }
        })
    }

    /// Substitutes the program term `s` for program variable `j`.
    pub fn subst_prog(&self, j: usize, s: &Term) -> DTerm {
        self.map_prog(0, &mut |i, k| {
            if i == k + j {
                s.shift(k as isize, 0)
            } else if i > k + j {
                Term::Var(i - 1)
            } else {
                Term::Var(i)
            }
        })
    }

    pub fn substitute_top_prog(&self, n_old: usize, repls: &[Term], n_new: usize) -> DTerm {
        self.map_prog(0, &mut |i, k| {
            if i < k {
                Term::Var(i)
            } else if i - k < n_old {
                repls[i - k].shift(k as isize, 0)
            } else {
                Term::Var(i - n_old + n_new)
            }
        })
    }

    /// Substitutes `s` for difference variable `j`.
    pub fn subst_diff(&self, j: usize, s: &DTerm) -> DTerm {
        self.map_diff(0, 0, &mut |i, pk, dk| {
            if i == dk + j {
                s.shift_prog(pk as isize, 0).shift_diff(dk as isize, 0)
            } else if i > dk + j {
                DTerm::Var(i - 1)
            } else {
                DTerm::Var(i)
            }
        })
    }

    pub fn has_prog_var(&self, j: usize) -> bool {
        let mut found = false;
        self.map_prog(0, &mut |i, k| {
            if i == k + j {
                found = true;
            }
            Term::Var(i)
        });
        found
    }

    pub fn has_diff_var(&self, j: usize) -> bool {
        let mut found = false;
        self.map_diff(0, 0, &mut |i, _, k| {
            if i == k + j {
                found = true;
            }
            DTerm::Var(i)
        });
        found
    }

    pub fn size(&self) -> usize {
        match self {
            DTerm::Var(_) | DTerm::Const(_) => 1,
            DTerm::LamPoint(_, b) | DTerm::LamDiff(_, b) | DTerm::Proj(_, b) => 1 + b.size(),
            DTerm::AppPoint(g, t) => 1 + g.size() + t.size(),
            DTerm::AppDiff(g, t, u, a) => 1 + g.size() + t.size() + u.size() + a.size(),
            DTerm::Pair(a, b) => 1 + a.size() + b.size(),
            DTerm::Refl(t) => 1 + t.size(),
            DTerm::J(j) => 1 + j.lhs.size() + j.rhs.size() + j.diff.size() + j.branch.size(),
        }
    }

    /// Number of `J` nodes.
    pub fn j_count(&self) -> usize {
        match self {
            DTerm::Var(_) | DTerm::Const(_) | DTerm::Refl(_) => 0,
            DTerm::LamPoint(_, b) | DTerm::LamDiff(_, b) | DTerm::Proj(_, b) | DTerm::AppPoint(b, _) => b.j_count(),
            DTerm::AppDiff(g, _, _, a) | DTerm::Pair(g, a) => g.j_count() + a.j_count(),
            DTerm::J(j) => 1 + j.diff.j_count() + j.branch.j_count(),
        }
    }
}

/// Structural equality on de Bruijn representations.
pub trait AlphaEq {
    fn alpha_eq(&self, other: &Self) -> bool;
}

impl<T: PartialEq> AlphaEq for T {
    fn alpha_eq(&self, other: &Self) -> bool {
        self == other
    }
}

// ---------------------------------------------------------------------------
// checked substitution entry points

/// Substitutes the outermost bound program variable of a term, predicate or
/// difference term, checking the replacement is well scoped at `scope`.
pub fn subst_program_checked(tm: &Term, replacement: &Term, scope: usize) -> Result<Term, SyntaxError> {
    if replacement.free_bound() > scope {
        return Err(SyntaxError::Malformed(format!(
            "replacement mentions index {} outside a scope of {}",
            replacement.free_bound() - 1,
            scope
        )));
    }
    if tm.free_bound() > scope + 1 {
        return Err(SyntaxError::Malformed("term mentions variables outside its scope".into()));
    }
    Ok(tm.instantiate(replacement))
}

// ---------------------------------------------------------------------------
// contexts and signatures

#[derive(Clone, Debug, PartialEq)]
pub struct ProgEntry {
    pub name: Name,
    pub ty: Ty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffEntry {
    pub name: Name,
    pub pred: Pred,
    /// Length of the program zone when this entry was bound.
    pub level: usize,
}

/// Two-zone context `(x̄ ∈ Φ₀ | ε̄ ∈ Φ₁(x̄))`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Context {
    pub prog: Vec<ProgEntry>,
    pub diff: Vec<DiffEntry>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_prog(&mut self, name: &str, ty: Ty) {
        self.prog.push(ProgEntry { name: name.to_string(), ty });
    }

    pub fn push_diff(&mut self, name: &str, pred: Pred) {
        let level = self.prog.len();
        self.diff.push(DiffEntry { name: name.to_string(), pred, level });
    }

    pub fn pop_prog(&mut self) {
        self.prog.pop();
    }

    pub fn pop_diff(&mut self) {
        self.diff.pop();
    }

    pub fn prog_ty(&self, i: usize) -> Option<&Ty> {
        let n = self.prog.len();
        if i < n {
            Some(&self.prog[n - 1 - i].ty)
        } else {
            None
        }
    }

    pub fn prog_name(&self, i: usize) -> Option<&str> {
        let n = self.prog.len();
        (i < n).then(|| self.prog[n - 1 - i].name.as_str())
    }

    /// The predicate of difference variable `i`, weakened to the current
    /// program zone.
    pub fn diff_pred(&self, i: usize) -> Option<Pred> {
        let n = self.diff.len();
        if i < n {
            let e = &self.diff[n - 1 - i];
            Some(e.pred.shift((self.prog.len() - e.level) as isize, 0))
        } else {
            None
        }
    }

    pub fn diff_name(&self, i: usize) -> Option<&str> {
        let n = self.diff.len();
        (i < n).then(|| self.diff[n - 1 - i].name.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Calculus {
    #[default]
    Stlc,
    Fuzz,
}

/// Declared constants and difference constants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Signature {
    pub base_types: Vec<Name>,
    pub consts: BTreeMap<Name, Ty>,
    pub dconsts: BTreeMap<Name, Pred>,
    pub numerals: Option<Ty>,
    pub equations: Vec<Equation>,
}

impl Signature {
    pub fn const_ty(&self, name: &str) -> Option<Ty> {
        if let Some(t) = self.consts.get(name) {
            return Some(t.clone());
        }
        if is_numeral(name) {
            return self.numerals.clone();
        }
        None
    }
}

/// A declared computation rule for constants, `lhs = rhs` over pattern
/// variables `vars` (index 0 is the last one). The left side is binder-free
/// and headed by a constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Equation {
    pub name: Name,
    pub vars: Vec<Ty>,
    pub lhs: Term,
    pub rhs: Term,
}

impl Equation {
    pub fn is_pattern(t: &Term) -> bool {
        fn head(t: &Term) -> bool {
            match t {
                Term::Const(_) => true,
                Term::App(f, _) => head(f),
                _ => false,
            }
        }
        fn binder_free(t: &Term) -> bool {
            match t {
                Term::Var(_) | Term::Const(_) => true,
                Term::App(a, b) | Term::Pair(a, b) | Term::Tensor(a, b) => binder_free(a) && binder_free(b),
                Term::Proj(_, a) | Term::Bang(a) => binder_free(a),
                _ => false,
            }
        }
        head(t) && binder_free(t)
    }

    /// Rewrites `t` at the root if it matches the left side.
    pub fn apply(&self, t: &Term) -> Option<Term> {
        let n = self.vars.len();
        let mut sub: Vec<Option<Term>> = vec![None; n];
        if !matches_pat(&self.lhs, t, n, &mut sub) {
            return None;
        }
        let repls: Option<Vec<Term>> = sub.into_iter().collect();
        Some(self.rhs.substitute_top(n, &repls?, 0))
    }
}

fn matches_pat(p: &Term, t: &Term, n: usize, sub: &mut [Option<Term>]) -> bool {
    match (p, t) {
        (Term::Var(i), _) if *i < n => match &sub[*i] {
            Some(prev) => prev == t,
            None => {
                sub[*i] = Some(t.clone());
                true
            }
        },
        (Term::Const(a), Term::Const(b)) => a == b,
        (Term::App(f, a), Term::App(g, b))
        | (Term::Pair(f, a), Term::Pair(g, b))
        | (Term::Tensor(f, a), Term::Tensor(g, b)) => matches_pat(f, g, n, sub) && matches_pat(a, b, n, sub),
        (Term::Proj(s, a), Term::Proj(r, b)) => s == r && matches_pat(a, b, n, sub),
        (Term::Bang(a), Term::Bang(b)) => matches_pat(a, b, n, sub),
        _ => false,
    }
}

pub fn is_numeral(s: &str) -> bool {
    let s = s.strip_prefix('-').unwrap_or(s);
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_digit() || c == '.' || c == '/')
}

// ---------------------------------------------------------------------------
// rule sets

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct RuleSet {
    pub eta: bool,
    pub betad: bool,
    pub etad: bool,
    pub dchain: bool,
    pub jw: bool,
    pub cext: bool,
    pub fext1: bool,
    pub fext2: bool,
    /// The forbidden rule; only for demonstrating trivialization.
    pub jeta_plus: bool,
}

impl RuleSet {
    /// β alone (β is always on).
    pub fn beta() -> Self {
        Self::default()
    }

    pub fn standard() -> Self {
        RuleSet { eta: true, betad: true, etad: true, ..Self::default() }
    }

    pub fn parse(spec: &str) -> Result<Self, SyntaxError> {
        let mut r = RuleSet::default();
        for raw in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let item = raw.trim_start_matches('+');
            match item.to_ascii_lowercase().as_str() {
                "beta" => {}
                "eta" => r.eta = true,
                "betad" => r.betad = true,
                "etad" => r.etad = true,
                "dchain" => r.dchain = true,
                "jw" => r.jw = true,
                "cext" => r.cext = true,
                "fext1" => r.fext1 = true,
                "fext2" => r.fext2 = true,
                "jeta-plus" | "jetaplus" => r.jeta_plus = true,
                "all" => {
                    r.eta = true;
                    r.betad = true;
                    r.etad = true;
                    r.dchain = true;
                    r.jw = true;
                    r.cext = true;
                }
                _ => return Err(SyntaxError::UnknownRule(raw.to_string())),
            }
        }
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), SyntaxError> {
        if self.fext1 && self.fext2 {
            return Err(SyntaxError::IncompatibleRules("fext1 and fext2 are mutually exclusive".into()));
        }
        Ok(())
    }

    pub fn union(&self, o: &RuleSet) -> RuleSet {
        RuleSet {
            eta: self.eta || o.eta,
            betad: self.betad || o.betad,
            etad: self.etad || o.etad,
            dchain: self.dchain || o.dchain,
            jw: self.jw || o.jw,
            cext: self.cext || o.cext,
            fext1: self.fext1 || o.fext1,
            fext2: self.fext2 || o.fext2,
            jeta_plus: self.jeta_plus || o.jeta_plus,
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = vec!["beta"];
        for (on, n) in [
            (self.eta, "eta"),
            (self.betad, "betad"),
            (self.etad, "etad"),
            (self.dchain, "dchain"),
            (self.jw, "jw"),
            (self.cext, "cext"),
            (self.fext1, "fext1"),
            (self.fext2, "fext2"),
            (self.jeta_plus, "jeta-plus"),
        ] {
            if on {
                v.push(n);
            }
        }
        v
    }
}

impl std::fmt::Display for RuleSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.names().join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> Ty {
        Ty::base("A")
    }

    #[test]
    fn subst_into_refl() {
        let r = DTerm::Refl(var(0));
        assert_eq!(r.subst_prog(0, &cnst("3")), DTerm::Refl(cnst("3")));
    }

    #[test]
    fn subst_distinct_variable() {
        assert_eq!(var(1).subst(0, &cnst("t")), var(0));
    }

    #[test]
    fn subst_into_j() {
        let mot = Motive { carrier: a(), body: diff(a(), var(1), var(0)) };
        let branch = DTerm::Refl(pair(var(0), var(1)));
        let j = DTerm::j(mot.clone(), var(0), var(0), DTerm::Refl(var(0)), branch);
        let u = cnst("u");
        let got = j.subst_prog(0, &u);
        let want = DTerm::j(mot, u.clone(), u.clone(), DTerm::Refl(u.clone()), DTerm::Refl(pair(var(0), u)));
        assert_eq!(got, want);
    }

    #[test]
    fn subst_diff_cases() {
        let a1 = DTerm::Const("a".into());
        assert_eq!(DTerm::Var(0).subst_diff(0, &a1), a1);
        assert_eq!(DTerm::Refl(var(0)).subst_diff(0, &a1), DTerm::Refl(var(0)));
        let mot = Motive { carrier: a(), body: diff(a(), var(1), var(0)) };
        let j = DTerm::j(mot.clone(), var(0), var(1), DTerm::Var(0), DTerm::Var(0));
        let c = DTerm::Const("c".into());
        assert_eq!(j.subst_diff(0, &c), DTerm::j(mot, var(0), var(1), c.clone(), c));
    }

    #[test]
    fn subst_diff_shifts_under_program_binders() {
        // λx. ε  with ε := Refl(y)  gives λx. Refl(y↑)
        let t = DTerm::lam_point(a(), DTerm::Var(0));
        let got = t.subst_diff(0, &DTerm::Refl(var(0)));
        assert_eq!(got, DTerm::lam_point(a(), DTerm::Refl(var(1))));
    }

    #[test]
    fn alpha_eq_examples() {
        assert!(lam(a(), var(0)).alpha_eq(&lam(a(), var(0))));
        assert!(!lam(a(), lam(a(), var(1))).alpha_eq(&lam(a(), lam(a(), var(0)))));
        assert!(!diff(a(), var(0), var(1)).alpha_eq(&diff(a(), var(1), var(0))));
    }

    #[test]
    fn checked_subst_rejects_out_of_scope() {
        assert!(subst_program_checked(&var(0), &var(3), 1).is_err());
        assert_eq!(subst_program_checked(&var(0), &var(0), 1).unwrap(), var(0));
    }

    #[test]
    fn diff_pred_is_weakened() {
        let mut ctx = Context::new();
        ctx.push_prog("x", a());
        ctx.push_diff("e", diff(a(), var(0), var(0)));
        ctx.push_prog("y", a());
        assert_eq!(ctx.diff_pred(0).unwrap(), diff(a(), var(1), var(1)));
    }

    #[test]
    fn rules_parse() {
        let r = RuleSet::parse("beta,eta,betad,+jeta-plus").unwrap();
        assert!(r.eta && r.betad && r.jeta_plus && !r.etad);
        assert!(RuleSet::parse("fext1,fext2").is_err());
        assert!(RuleSet::parse("bogus").is_err());
    }

    #[test]
    fn der_shape() {
        let f = cnst("f");
        let d = der(&f, &a(), &Ty::base("B"));
        match d {
            DTerm::LamDiff(_, body) => match *body {
                DTerm::J(j) => {
                    assert_eq!(j.lhs, var(1));
                    assert_eq!(j.diff, DTerm::Var(0));
                    assert_eq!(j.branch, DTerm::Refl(app(f, var(0))));
                }
                _ => panic!(),
            },
            _ => panic!(),
        }
    }
}
