//! Elaboration of surface declarations into kernel terms, followed by a
//! kernel re-check of every definition.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{parse, Binder, Class, Decl, Diagnostic, Expr, SourceFile, Span};
use crate::checker::Checker;
use crate::error::{SubexpError, TypeError};
use crate::pretty;
use crate::rewrite::default_fuel;
use crate::subexp::{check_bang, SensContext};
use crate::syntax::{der, proj, var, Calculus, Context, DTerm, Equation, Motive, Pred, RuleSet, Side, Signature, Term, Ty};

#[derive(Clone, Debug, PartialEq)]
pub enum DefBody {
    Program { term: Term, ty: Ty },
    Difference { term: DTerm, pred: Pred },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Def {
    pub name: String,
    pub body: DefBody,
    pub span: Span,
    /// Rules in force when the definition was checked.
    pub rules: RuleSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeclStatus {
    pub name: String,
    pub line: usize,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// A checked source file.
#[derive(Clone, Debug, Default)]
pub struct Module {
    pub sig: Signature,
    pub rules: RuleSet,
    pub calculus: Calculus,
    pub defs: Vec<Def>,
    pub statuses: Vec<DeclStatus>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Module {
    pub fn def(&self, name: &str) -> Option<&Def> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn ok(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn checker(&self) -> Checker {
        Checker::new(self.sig.clone()).with_rules(self.rules).with_calculus(self.calculus)
    }
}

#[derive(Clone, Debug)]
pub struct ElabOptions {
    /// Added to the rules set by directives.
    pub extra_rules: RuleSet,
    /// Overrides `calculus` directives.
    pub calculus: Option<Calculus>,
    pub fuel: usize,
    /// Continue after the first failing declaration.
    pub keep_going: bool,
}

impl Default for ElabOptions {
    fn default() -> Self {
        ElabOptions { extra_rules: RuleSet::default(), calculus: None, fuel: default_fuel(), keep_going: true }
    }
}

/// Parses and checks a source text.
pub fn check_source(src: &str, opts: &ElabOptions) -> Module {
    match parse(src) {
        Ok(f) => elaborate(&f, opts),
        Err(diags) => Module { diagnostics: diags, ..Module::default() },
    }
}

pub fn elaborate(file: &SourceFile, opts: &ElabOptions) -> Module {
    let mut st = State {
        checker: Checker::new(Signature::default())
            .with_rules(opts.extra_rules)
            .with_calculus(opts.calculus.unwrap_or_default())
            .with_fuel(opts.fuel),
        calc_locked: opts.calculus.is_some(),
        extra: opts.extra_rules,
        type_abbrevs: BTreeMap::new(),
        preds: BTreeMap::new(),
        defs: BTreeMap::new(),
        module: Module::default(),
    };
    for item in &file.items {
        let name = item.decl.name().unwrap_or("").to_string();
        let res = st.decl(&item.decl, item.span);
        let failed = res.is_err();
        match res {
            Ok(()) => {
                if !name.is_empty() {
                    st.module.statuses.push(DeclStatus { name, line: item.span.line, ok: true, message: None });
                }
            }
            Err(mut d) => {
                d.span = item.span;
                st.module.statuses.push(DeclStatus {
                    name: if name.is_empty() { "<directive>".into() } else { name },
                    line: item.span.line,
                    ok: false,
                    message: Some(d.message.clone()),
                });
                st.module.diagnostics.push(d);
            }
        }
        if failed && !opts.keep_going {
            break;
        }
    }
    st.module.sig = st.checker.sig.clone();
    st.module.rules = st.checker.rules;
    st.module.calculus = st.checker.calculus;
    st.module
}

type R<T> = Result<T, Diagnostic>;

fn diag(msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(Span::default(), msg)
}

fn from_type_error(e: TypeError) -> Diagnostic {
    let mut d = diag(e.to_string());
    match e {
        TypeError::Mismatch { expected, actual } | TypeError::PredMismatch { expected, actual } => {
            d.expected = Some(expected);
            d.actual = Some(actual);
        }
        TypeError::CarrierMismatch { carrier, actual } => {
            d.expected = Some(carrier);
            d.actual = Some(actual);
        }
        _ => {}
    }
    d
}

fn from_subexp_error(e: SubexpError) -> Diagnostic {
    diag(format!("sub-exponential check failed: {e}"))
}

/// An elaborated expression of either sort.
#[derive(Clone, Debug)]
enum El {
    Prog(Term, Ty),
    Diff(DTerm, Pred),
}

enum Expected<'a> {
    Ty(&'a Ty),
    Pred(&'a Pred),
}

#[derive(Clone, Debug)]
struct PredAbbrev {
    params: Vec<Ty>,
    body: Pred,
}

struct State {
    checker: Checker,
    calc_locked: bool,
    extra: RuleSet,
    type_abbrevs: BTreeMap<String, Ty>,
    preds: BTreeMap<String, PredAbbrev>,
    defs: BTreeMap<String, DefBody>,
    module: Module,
}

/// Local scope: kernel context plus the interleaved binding order.
#[derive(Clone, Default)]
struct Scope {
    ctx: Context,
    order: Vec<(String, bool)>,
}

impl Scope {
    fn push_prog(&mut self, name: &str, ty: Ty) {
        self.ctx.push_prog(name, ty);
        self.order.push((name.to_string(), false));
    }
    fn push_diff(&mut self, name: &str, p: Pred) {
        self.ctx.push_diff(name, p);
        self.order.push((name.to_string(), true));
    }
    fn pop(&mut self) {
        if let Some((_, is_diff)) = self.order.pop() {
            if is_diff {
                self.ctx.pop_diff();
            } else {
                self.ctx.pop_prog();
            }
        }
    }
    /// `(is_diff, index)` of the innermost binding of `name`.
    fn lookup(&self, name: &str) -> Option<(bool, usize)> {
        let pos = self.order.iter().rposition(|(n, _)| n == name)?;
        let is_diff = self.order[pos].1;
        let idx = self.order[pos + 1..].iter().filter(|(_, d)| *d == is_diff).count();
        Some((is_diff, idx))
    }
}

/// Kernel binder shapes produced from a surface binder list.
enum KBinder {
    Point(String, Ty),
    Diff(String, String, String, Ty),
}

impl State {
    fn decl(&mut self, d: &Decl, span: Span) -> R<()> {
        let name = d.name().map(str::to_string);
        if let Some(n) = &name {
            if self.is_declared(n) {
                return Err(diag(format!("`{n}` is already declared")));
            }
        }
        match d {
            Decl::Type { name, def: None } => {
                self.checker.sig.base_types.push(name.clone());
            }
            Decl::Type { name, def: Some(c) } => {
                let t = self.elab_ty(c)?;
                self.type_abbrevs.insert(name.clone(), t);
            }
            Decl::Const { name, ty } => {
                let t = self.elab_ty(ty)?;
                self.checker.check_type(&t).map_err(from_type_error)?;
                self.checker.sig.consts.insert(name.clone(), t);
            }
            Decl::DConst { name, pred } => {
                let mut sc = Scope::default();
                let p = self.elab_pred(&mut sc, pred)?;
                self.checker.check_pred(&Context::new(), &p).map_err(from_type_error)?;
                self.checker.sig.dconsts.insert(name.clone(), p);
            }
            Decl::Pred { name, params, body } => {
                let mut sc = Scope::default();
                let mut tys = Vec::new();
                for b in params {
                    let t = self.elab_ty(b.ann.as_ref().expect("parser requires annotations"))?;
                    for n in &b.names {
                        sc.push_prog(n, t.clone());
                        tys.push(t.clone());
                    }
                }
                let p = self.elab_pred(&mut sc, body)?;
                self.checker.check_pred(&sc.ctx, &p).map_err(from_type_error)?;
                self.preds.insert(name.clone(), PredAbbrev { params: tys, body: p });
            }
            Decl::Def { name, ann, body } => {
                let def = self.def(ann.as_ref(), body)?;
                self.defs.insert(name.clone(), def.clone());
                self.module.defs.push(Def { name: name.clone(), body: def, span, rules: self.checker.rules });
            }
            Decl::Rules(names) => {
                let r = RuleSet::parse(&names.join(",")).map_err(|e| diag(e.to_string()))?;
                let r = r.union(&self.extra);
                r.validate().map_err(|e| diag(e.to_string()))?;
                self.checker.rules = r;
            }
            Decl::Calculus(c) => {
                let calc = match c.as_str() {
                    "stlc" => Calculus::Stlc,
                    "fuzz" => Calculus::Fuzz,
                    other => return Err(diag(format!("unknown calculus `{other}` (expected stlc or fuzz)"))),
                };
                if !self.calc_locked {
                    self.checker.calculus = calc;
                }
            }
            Decl::Numerals(c) => {
                let t = self.elab_ty(c)?;
                self.checker.sig.numerals = Some(t);
            }
            Decl::Equation { name, params, lhs, rhs } => {
                let mut sc = Scope::default();
                let mut vars = Vec::new();
                for b in params {
                    let t = self.elab_ty(b.ann.as_ref().expect("parser requires annotations"))?;
                    for n in &b.names {
                        sc.push_prog(n, t.clone());
                        vars.push(t.clone());
                    }
                }
                vars.reverse();
                let (l, lt) = self.infer_prog(&mut sc, lhs)?;
                let r = self.check_prog(&mut sc, rhs, &lt)?;
                if !Equation::is_pattern(&l) {
                    return Err(diag("the left side of an equation must be a constant applied to binder-free arguments"));
                }
                self.checker.sig.equations.push(Equation { name: name.clone(), vars, lhs: l, rhs: r });
            }
        }
        Ok(())
    }

    fn is_declared(&self, n: &str) -> bool {
        self.checker.sig.base_types.iter().any(|b| b == n)
            || self.checker.sig.consts.contains_key(n)
            || self.checker.sig.dconsts.contains_key(n)
            || self.type_abbrevs.contains_key(n)
            || self.preds.contains_key(n)
            || self.defs.contains_key(n)
            || self.checker.sig.equations.iter().any(|e| e.name == n)
    }

    fn def(&mut self, ann: Option<&Class>, body: &Expr) -> R<DefBody> {
        let mut sc = Scope::default();
        let el = match ann {
            Some(c) if self.is_pred_class(c) => {
                let p = self.elab_pred(&mut sc, c)?;
                self.checker.check_pred(&Context::new(), &p).map_err(from_type_error)?;
                let a = self.check_diff(&mut sc, body, &p)?;
                El::Diff(a, p)
            }
            Some(c) => {
                let t = self.elab_ty(c)?;
                self.checker.check_type(&t).map_err(from_type_error)?;
                let tm = self.check_prog(&mut sc, body, &t)?;
                El::Prog(tm, t)
            }
            None => self.infer(&mut sc, body)?,
        };
        // independent kernel re-check
        let ctx = Context::new();
        match el {
            El::Prog(term, ty) => {
                self.checker.check_program(&ctx, &term, &ty).map_err(from_type_error)?;
                if self.checker.calculus == Calculus::Fuzz {
                    check_bang(&self.checker.sig, &SensContext::new(), &term, &ty).map_err(from_subexp_error)?;
                }
                Ok(DefBody::Program { term, ty })
            }
            El::Diff(term, pred) => {
                self.checker.check_diff(&ctx, &term, &pred).map_err(from_type_error)?;
                Ok(DefBody::Difference { term, pred })
            }
        }
    }

    // -------------------------------------------------------------- classes

    fn is_pred_class(&self, c: &Class) -> bool {
        match c {
            Class::Diff(..) | Class::Pi(..) | Class::PiDiff(..) => true,
            Class::Name(n, _) => self.preds.contains_key(n),
            Class::Product(a, b) => self.is_pred_class(a) || self.is_pred_class(b),
            _ => false,
        }
    }

    fn elab_ty(&self, c: &Class) -> R<Ty> {
        let b = |x: &Class| self.elab_ty(x);
        Ok(match c {
            Class::Name(n, args) if args.is_empty() => {
                if let Some(t) = self.type_abbrevs.get(n) {
                    t.clone()
                } else if self.checker.sig.base_types.iter().any(|x| x == n) {
                    Ty::Base(n.clone())
                } else {
                    return Err(diag(format!("unknown type `{n}`")));
                }
            }
            Class::Name(n, _) => return Err(diag(format!("`{n}` is not a type constructor"))),
            Class::Arrow(x, y) => Ty::arrow(b(x)?, b(y)?),
            Class::Lolli(x, y) => Ty::lolli(b(x)?, b(y)?),
            Class::Product(x, y) => Ty::product(b(x)?, b(y)?),
            Class::Tensor(x, y) => Ty::tensor(b(x)?, b(y)?),
            Class::Bang(r, x) => {
                if *r < num_rational::Rational64::from_integer(0) {
                    return Err(diag("negative scale in !"));
                }
                Ty::bang(*r, b(x)?)
            }
            Class::Diff(..) | Class::Pi(..) | Class::PiDiff(..) => {
                return Err(diag("expected a type, found a difference predicate"))
            }
        })
    }

    fn elab_pred(&self, sc: &mut Scope, c: &Class) -> R<Pred> {
        match c {
            Class::Diff(a, t, u) => {
                let a = self.elab_ty(a)?;
                let t = self.check_prog(sc, t, &a)?;
                let u = self.check_prog(sc, u, &a)?;
                Ok(Pred::Diff(a, t, u))
            }
            Class::Product(x, y) => Ok(Pred::prod(self.elab_pred(sc, x)?, self.elab_pred(sc, y)?)),
            Class::Pi(x, a, body) => {
                let a = self.elab_ty(a)?;
                sc.push_prog(x, a.clone());
                let r = self.elab_pred(sc, body);
                sc.pop();
                Ok(Pred::PiPoint(a, Box::new(r?)))
            }
            Class::PiDiff(x, y, a, body) => {
                let a = self.elab_ty(a)?;
                sc.push_prog(x, a.clone());
                sc.push_prog(y, a.clone());
                let r = self.elab_pred(sc, body);
                sc.pop();
                sc.pop();
                Ok(Pred::PiDiff(a, Box::new(r?)))
            }
            Class::Name(n, args) => {
                let Some(ab) = self.preds.get(n).cloned() else {
                    return Err(diag(format!("unknown predicate `{n}`")));
                };
                if args.len() != ab.params.len() {
                    return Err(diag(format!(
                        "predicate `{n}` expects {} arguments, found {}",
                        ab.params.len(),
                        args.len()
                    )));
                }
                let mut terms = Vec::new();
                for (e, t) in args.iter().zip(&ab.params) {
                    terms.push(self.check_prog(sc, e, t)?);
                }
                terms.reverse();
                Ok(ab.body.substitute_top(terms.len(), &terms, 0))
            }
            _ => Err(diag("expected a difference predicate, found a type")),
        }
    }

    // ---------------------------------------------------------- expressions

    fn lam_ty(&self, a: Ty, b: Ty) -> Ty {
        match self.checker.calculus {
            Calculus::Stlc => Ty::arrow(a, b),
            Calculus::Fuzz => Ty::lolli(a, b),
        }
    }

    fn infer_prog(&self, sc: &mut Scope, e: &Expr) -> R<(Term, Ty)> {
        match self.infer(sc, e)? {
            El::Prog(t, ty) => Ok((t, ty)),
            El::Diff(..) => Err(diag(format!("expected a program term, found a difference term: {}", super::Printer.expr(e)))),
        }
    }

    fn check_prog(&self, sc: &mut Scope, e: &Expr, ty: &Ty) -> R<Term> {
        match self.check(sc, e, Expected::Ty(ty))? {
            El::Prog(t, _) => Ok(t),
            El::Diff(..) => Err(diag("expected a program term")),
        }
    }

    fn check_diff(&self, sc: &mut Scope, e: &Expr, p: &Pred) -> R<DTerm> {
        match self.check(sc, e, Expected::Pred(p))? {
            El::Diff(a, _) => Ok(a),
            El::Prog(..) => Err(diag("expected a difference term")),
        }
    }

    fn expose(&self, p: &Pred, want: fn(&Pred) -> bool) -> Pred {
        if want(p) {
            return p.clone();
        }
        match self.checker.rewriter().normalize_pred(p) {
            Ok(n) if want(&n) => n,
            _ => p.clone(),
        }
    }

    fn infer(&self, sc: &mut Scope, e: &Expr) -> R<El> {
        match e {
            Expr::Var(n) => self.name(sc, n),
            Expr::Num(s) => match &self.checker.sig.numerals {
                Some(t) => Ok(El::Prog(Term::Const(s.clone()), t.clone())),
                None => Err(diag(format!("numeral `{s}` used without a `numerals` declaration"))),
            },
            Expr::App(..) => {
                let mut args = Vec::new();
                let mut head = e;
                while let Expr::App(f, a) = head {
                    args.push(a.as_ref());
                    head = f;
                }
                args.reverse();
                let h = self.infer(sc, head)?;
                self.spine(sc, h, &args)
            }
            Expr::Fun(bs, body) => self.infer_fun(sc, bs, body),
            Expr::Pair(a, b) => match (self.infer(sc, a)?, self.infer(sc, b)?) {
                (El::Prog(x, xt), El::Prog(y, yt)) => Ok(match self.checker.calculus {
                    Calculus::Stlc => El::Prog(Term::Pair(Box::new(x), Box::new(y)), Ty::product(xt, yt)),
                    Calculus::Fuzz => El::Prog(Term::Tensor(Box::new(x), Box::new(y)), Ty::tensor(xt, yt)),
                }),
                (El::Diff(x, p), El::Diff(y, q)) => Ok(El::Diff(DTerm::pair(x, y), Pred::prod(p, q))),
                _ => Err(diag("pair mixes a program term and a difference term")),
            },
            Expr::Fst(a) | Expr::Snd(a) => {
                let side = if matches!(e, Expr::Fst(_)) { Side::Fst } else { Side::Snd };
                match self.infer(sc, a)? {
                    El::Prog(t, ty) => match ty.unbang().as_pair() {
                        Some((l, r)) => {
                            let out = if side == Side::Fst { l.clone() } else { r.clone() };
                            Ok(El::Prog(proj(side, t), out))
                        }
                        None => Err(diag(format!("projection of a non-product of type {}", pretty::ty(&ty)))),
                    },
                    El::Diff(d, p) => match self.expose(&p, |p| matches!(p, Pred::Prod(..))) {
                        Pred::Prod(l, r) => {
                            Ok(El::Diff(DTerm::Proj(side, Box::new(d)), if side == Side::Fst { *l } else { *r }))
                        }
                        other => Err(diag(format!("projection of a non-product difference {}", pretty::pred(&sc.ctx, &other)))),
                    },
                }
            }
            Expr::Bang(a) => {
                if self.checker.calculus != Calculus::Fuzz {
                    return Err(diag("`!` is only available in the fuzz calculus"));
                }
                let (t, ty) = self.infer_prog(sc, a)?;
                Ok(El::Prog(Term::Bang(Box::new(t)), Ty::bang(num_rational::Rational64::from_integer(1), ty)))
            }
            Expr::LetBang(x, t, u) => {
                if self.checker.calculus != Calculus::Fuzz {
                    return Err(diag("`let !` is only available in the fuzz calculus"));
                }
                let (t, tt) = self.infer_prog(sc, t)?;
                let Ty::Bang(_, a) = tt else {
                    return Err(diag(format!("`let !` scrutinee has type {}, not a banged type", pretty::ty(&tt))));
                };
                sc.push_prog(x, *a);
                let r = self.infer_prog(sc, u);
                sc.pop();
                let (u, ut) = r?;
                Ok(El::Prog(Term::LetBang(Box::new(t), Box::new(u)), ut))
            }
            Expr::LetPair(x, y, t, u) => {
                let (t, tt) = self.infer_prog(sc, t)?;
                let Some((a, b)) = tt.unbang().as_pair() else {
                    return Err(diag(format!("`let (x, y)` scrutinee has type {}", pretty::ty(&tt))));
                };
                sc.push_prog(x, a.clone());
                sc.push_prog(y, b.clone());
                let r = self.infer_prog(sc, u);
                sc.pop();
                sc.pop();
                let (u, ut) = r?;
                Ok(El::Prog(
                    match self.checker.calculus {
                        Calculus::Fuzz => Term::LetTensor(Box::new(t), Box::new(u)),
                        Calculus::Stlc => u.substitute_top(2, &[proj(Side::Snd, t.clone()), proj(Side::Fst, t)], 0),
                    },
                    ut,
                ))
            }
            Expr::Refl(a) => {
                let (t, ty) = self.infer_prog(sc, a)?;
                Ok(El::Diff(DTerm::Refl(t.clone()), Pred::Diff(ty, t.clone(), t)))
            }
            Expr::Der(f) => {
                let (f, ft) = self.infer_prog(sc, f)?;
                let Some((dom, cod)) = ft.unbang().as_function() else {
                    return Err(diag(format!("Der expects a function, found type {}", pretty::ty(&ft))));
                };
                let d = der(&f, dom, cod);
                let p = self.checker.infer_diff(&sc.ctx, &d).map_err(from_type_error)?;
                Ok(El::Diff(d, p))
            }
            Expr::J(j) => {
                let (lhs, carrier) = match &j.carrier {
                    Some(c) => {
                        let c = self.elab_ty(c)?;
                        (self.check_prog(sc, &j.lhs, &c)?, c)
                    }
                    None => self.infer_prog(sc, &j.lhs)?,
                };
                let rhs = self.check_prog(sc, &j.rhs, &carrier)?;
                sc.push_prog(&j.x, carrier.clone());
                sc.push_prog(&j.y, carrier.clone());
                let body = self.elab_pred(sc, &j.motive);
                sc.pop();
                sc.pop();
                let motive = Motive { carrier: carrier.clone(), body: body? };
                let diff = self.check_diff(sc, &j.diff, &Pred::Diff(carrier.clone(), lhs.clone(), rhs.clone()))?;
                sc.push_prog(&j.z, carrier);
                let branch = self.check_diff(sc, &j.branch, &motive.diagonal());
                sc.pop();
                let branch = branch?;
                let p = motive.instantiate(&lhs, &rhs);
                Ok(El::Diff(DTerm::j(motive, lhs, rhs, diff, branch), p))
            }
        }
    }

    fn name(&self, sc: &Scope, n: &str) -> R<El> {
        if let Some((is_diff, i)) = sc.lookup(n) {
            return Ok(if is_diff {
                El::Diff(DTerm::Var(i), sc.ctx.diff_pred(i).expect("scope in sync"))
            } else {
                El::Prog(Term::Var(i), sc.ctx.prog_ty(i).expect("scope in sync").clone())
            });
        }
        if let Some(d) = self.defs.get(n) {
            return Ok(match d {
                DefBody::Program { term, ty } => El::Prog(term.clone(), ty.clone()),
                DefBody::Difference { term, pred } => El::Diff(term.clone(), pred.clone()),
            });
        }
        if let Some(t) = self.checker.sig.consts.get(n) {
            return Ok(El::Prog(Term::Const(n.to_string()), t.clone()));
        }
        if let Some(p) = self.checker.sig.dconsts.get(n) {
            return Ok(El::Diff(DTerm::Const(n.to_string()), p.clone()));
        }
        Err(diag(format!("unbound name `{n}`")))
    }

    fn spine(&self, sc: &mut Scope, mut head: El, args: &[&Expr]) -> R<El> {
        let mut i = 0;
        while i < args.len() {
            head = match head {
                El::Prog(f, ft) => {
                    let Some((dom, cod)) = ft.unbang().as_function() else {
                        return Err(diag(format!("application of a non-function of type {}", pretty::ty(&ft))));
                    };
                    let (dom, cod) = (dom.clone(), cod.clone());
                    let a = self.check_prog(sc, args[i], &dom)?;
                    i += 1;
                    El::Prog(Term::App(Box::new(f), Box::new(a)), cod)
                }
                El::Diff(d, p) => match self.expose(&p, |p| matches!(p, Pred::PiPoint(..) | Pred::PiDiff(..))) {
                    Pred::PiPoint(dom, body) => {
                        let t = self.check_prog(sc, args[i], &dom)?;
                        i += 1;
                        El::Diff(DTerm::app_point(d, t.clone()), body.instantiate(&t))
                    }
                    Pred::PiDiff(dom, body) => {
                        if i + 3 > args.len() {
                            return Err(diag("a difference function expects two points and a difference"));
                        }
                        let t = self.check_prog(sc, args[i], &dom)?;
                        let u = self.check_prog(sc, args[i + 1], &dom)?;
                        let a = self.check_diff(sc, args[i + 2], &Pred::Diff(dom.clone(), t.clone(), u.clone()))?;
                        i += 3;
                        El::Diff(DTerm::app_diff(d, t.clone(), u.clone(), a), body.instantiate2(&t, &u))
                    }
                    other => {
                        return Err(diag(format!(
                            "application of a difference term of non-Pi type {}",
                            pretty::pred(&sc.ctx, &other)
                        )))
                    }
                },
            };
        }
        Ok(head)
    }

    /// Groups annotated binders into kernel binders, detecting
    /// `(x y : A) (e : D[A](x, y))`.
    fn kernel_binders(&self, sc: &mut Scope, bs: &[Binder]) -> R<Vec<KBinder>> {
        let mut flat: Vec<(String, &Class)> = Vec::new();
        for b in bs {
            let Some(c) = &b.ann else {
                return Err(diag(format!("cannot infer the type of binder `{}`; add an annotation", b.names[0])));
            };
            for n in &b.names {
                flat.push((n.clone(), c));
            }
        }
        let mut out: Vec<KBinder> = Vec::new();
        for (n, c) in flat {
            if let Class::Diff(a, Expr::Var(x), Expr::Var(y)) = c {
                let a = self.elab_ty(a)?;
                let k = out.len();
                let ok = k >= 2
                    && matches!((&out[k - 2], &out[k - 1]),
                        (KBinder::Point(px, ta), KBinder::Point(py, tb)) if px == x && py == y && *ta == a && *tb == a);
                if !ok {
                    return Err(diag(format!(
                        "difference binder `{n}` must follow its two points, as in (x y : A) ({n} : D[A](x, y))"
                    )));
                }
                out.truncate(k - 2);
                out.push(KBinder::Diff(x.clone(), y.clone(), n, a));
            } else if self.is_pred_class(c) {
                return Err(diag(format!("binder `{n}` has a predicate type; only D[A](x, y) after x y is allowed")));
            } else {
                out.push(KBinder::Point(n, self.elab_ty(c)?));
            }
        }
        let _ = sc;
        Ok(out)
    }

    fn push_binder(sc: &mut Scope, b: &KBinder) -> usize {
        match b {
            KBinder::Point(n, t) => {
                sc.push_prog(n, t.clone());
                1
            }
            KBinder::Diff(x, y, e, t) => {
                sc.push_prog(x, t.clone());
                sc.push_prog(y, t.clone());
                sc.push_diff(e, Pred::Diff(t.clone(), var(1), var(0)));
                3
            }
        }
    }

    fn infer_fun(&self, sc: &mut Scope, bs: &[Binder], body: &Expr) -> R<El> {
        let kbs = self.kernel_binders(sc, bs)?;
        let mut pushed = 0;
        for b in &kbs {
            pushed += Self::push_binder(sc, b);
        }
        let r = self.infer(sc, body);
        for _ in 0..pushed {
            sc.pop();
        }
        let mut el = r?;
        for b in kbs.iter().rev() {
            el = match (b, el) {
                (KBinder::Point(_, a), El::Prog(t, ty)) => El::Prog(Term::Lam(a.clone(), Box::new(t)), self.lam_ty(a.clone(), ty)),
                (KBinder::Point(_, a), El::Diff(d, p)) => {
                    El::Diff(DTerm::lam_point(a.clone(), d), Pred::PiPoint(a.clone(), Box::new(p)))
                }
                (KBinder::Diff(.., a), El::Diff(d, p)) => {
                    El::Diff(DTerm::lam_diff(a.clone(), d), Pred::PiDiff(a.clone(), Box::new(p)))
                }
                (KBinder::Diff(..), El::Prog(..)) => {
                    return Err(diag("a function binding a difference must return a difference term"))
                }
            };
        }
        Ok(el)
    }

    fn check(&self, sc: &mut Scope, e: &Expr, want: Expected<'_>) -> R<El> {
        match (e, &want) {
            (Expr::Fun(bs, body), _) => return self.check_fun(sc, bs, body, want),
            (Expr::Pair(a, b), Expected::Ty(t)) => {
                if let Some((l, r)) = t.unbang().as_pair() {
                    let x = self.check_prog(sc, a, l)?;
                    let y = self.check_prog(sc, b, r)?;
                    let tm = match t.unbang() {
                        Ty::Tensor(..) => Term::Tensor(Box::new(x), Box::new(y)),
                        _ => Term::Pair(Box::new(x), Box::new(y)),
                    };
                    return Ok(El::Prog(tm, (*t).clone()));
                }
            }
            (Expr::Pair(a, b), Expected::Pred(p)) => {
                if let Pred::Prod(l, r) = self.expose(p, |p| matches!(p, Pred::Prod(..))) {
                    let x = self.check_diff(sc, a, &l)?;
                    let y = self.check_diff(sc, b, &r)?;
                    return Ok(El::Diff(DTerm::pair(x, y), (*p).clone()));
                }
            }
            _ => {}
        }
        let got = self.infer(sc, e)?;
        self.conform(sc, got, want)
    }

    fn conform(&self, sc: &Scope, got: El, want: Expected<'_>) -> R<El> {
        match (got, want) {
            (El::Prog(t, ty), Expected::Ty(w)) => {
                if self.checker.ty_eq(w, &ty) {
                    Ok(El::Prog(t, w.clone()))
                } else {
                    let mut d = diag(format!("type mismatch for {}", pretty::term(&sc.ctx, &t)));
                    d.expected = Some(pretty::ty(w));
                    d.actual = Some(pretty::ty(&ty));
                    Err(d)
                }
            }
            (El::Diff(a, p), Expected::Pred(w)) => {
                if self.checker.pred_eq(&p, w).map_err(from_type_error)? {
                    Ok(El::Diff(a, w.clone()))
                } else {
                    let mut d = diag(format!("predicate mismatch for {}", pretty::dterm(&sc.ctx, &a)));
                    d.expected = Some(pretty::pred(&sc.ctx, w));
                    d.actual = Some(pretty::pred(&sc.ctx, &p));
                    Err(d)
                }
            }
            (El::Prog(t, _), Expected::Pred(w)) => Err(diag(format!(
                "expected a difference of type {}, found the program term {}",
                pretty::pred(&sc.ctx, w),
                pretty::term(&sc.ctx, &t)
            ))),
            (El::Diff(a, _), Expected::Ty(w)) => Err(diag(format!(
                "expected a program term of type {}, found the difference term {}",
                pretty::ty(w),
                pretty::dterm(&sc.ctx, &a)
            ))),
        }
    }

    fn binder_ann(&self, ann: &Option<Class>, expected: &Ty) -> R<Ty> {
        match ann {
            None => Ok(expected.clone()),
            Some(c) => {
                let t = self.elab_ty(c)?;
                if self.checker.ty_eq(&t, expected) {
                    Ok(t)
                } else {
                    let mut d = diag("binder annotation disagrees with the expected type");
                    d.expected = Some(pretty::ty(expected));
                    d.actual = Some(pretty::ty(&t));
                    Err(d)
                }
            }
        }
    }

    fn check_fun(&self, sc: &mut Scope, bs: &[Binder], body: &Expr, want: Expected<'_>) -> R<El> {
        let mut names: Vec<(String, &Option<Class>)> = Vec::new();
        for b in bs {
            for n in &b.names {
                names.push((n.clone(), &b.ann));
            }
        }
        self.check_names(sc, &names, body, want, bs)
    }

    fn check_names(
        &self,
        sc: &mut Scope,
        names: &[(String, &Option<Class>)],
        body: &Expr,
        want: Expected<'_>,
        all: &[Binder],
    ) -> R<El> {
        let Some(((n, ann), rest)) = names.split_first() else {
            return self.check(sc, body, want);
        };
        match want {
            Expected::Ty(t) => {
                let Some((dom, cod)) = t.as_function() else {
                    // fall back to inference, then compare
                    let got = self.infer_fun(sc, all, body)?;
                    return self.conform(sc, got, want);
                };
                let (dom, cod) = (dom.clone(), cod.clone());
                let a = self.binder_ann(ann, &dom)?;
                sc.push_prog(n, a.clone());
                let r = self.check_names(sc, rest, body, Expected::Ty(&cod), all);
                sc.pop();
                match r? {
                    El::Prog(b, _) => Ok(El::Prog(Term::Lam(a, Box::new(b)), t.clone())),
                    El::Diff(..) => Err(diag("a program function cannot return a difference")),
                }
            }
            Expected::Pred(p) => match self.expose(p, |p| matches!(p, Pred::PiPoint(..) | Pred::PiDiff(..))) {
                Pred::PiPoint(dom, inner) => {
                    let a = self.binder_ann(ann, &dom)?;
                    sc.push_prog(n, a.clone());
                    let r = self.check_names(sc, rest, body, Expected::Pred(&inner), all);
                    sc.pop();
                    let d = match r? {
                        El::Diff(d, _) => d,
                        El::Prog(..) => return Err(diag("expected a difference body")),
                    };
                    Ok(El::Diff(DTerm::lam_point(a, d), p.clone()))
                }
                Pred::PiDiff(dom, inner) => {
                    if rest.len() < 2 {
                        return Err(diag("a difference Pi needs three binders: two points and a difference"));
                    }
                    let a = self.binder_ann(ann, &dom)?;
                    let (yn, yann) = &rest[0];
                    let (en, eann) = &rest[1];
                    self.binder_ann(yann, &dom)?;
                    if let Some(c) = eann {
                        if !matches!(c, Class::Diff(..)) {
                            return Err(diag(format!("binder `{en}` must be annotated with D[A](x, y)")));
                        }
                    }
                    sc.push_prog(n, a.clone());
                    sc.push_prog(yn, a.clone());
                    let ann_ok = match eann {
                        Some(c) => self.elab_pred(sc, c).and_then(|ep| {
                            self.checker.pred_eq(&ep, &Pred::Diff(a.clone(), var(1), var(0))).map_err(from_type_error)
                        }),
                        None => Ok(true),
                    };
                    sc.push_diff(en, Pred::Diff(a.clone(), var(1), var(0)));
                    let r = match ann_ok {
                        Ok(true) => self.check_names(sc, &rest[2..], body, Expected::Pred(&inner), all),
                        Ok(false) => Err(diag(format!("binder `{en}` must have type D[A]({n}, {yn})"))),
                        Err(e) => Err(e),
                    };
                    sc.pop();
                    sc.pop();
                    sc.pop();
                    let d = match r? {
                        El::Diff(d, _) => d,
                        El::Prog(..) => return Err(diag("expected a difference body")),
                    };
                    Ok(El::Diff(DTerm::lam_diff(a, d), p.clone()))
                }
                _ => {
                    let got = self.infer_fun(sc, all, body)?;
                    self.conform(sc, got, want)
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(src: &str) -> Module {
        check_source(src, &ElabOptions::default())
    }

    #[test]
    fn der_combinator() {
        let m = check(
            "type A type B const f : A -> B
             def d : Pi x y : A. D[A](x, y) -> D[B](f x, f y) := Der f",
        );
        assert!(m.ok(), "{:?}", m.diagnostics);
    }

    #[test]
    fn explicit_j_and_lambda_binders() {
        let m = check(
            "type A
             def symm : Pi x y : A. D[A](x, y) -> D[A](y, x) :=
               fun x y e => J[u v. D[A](v, u)](x, y, e, [z] refl z)
             def symm2 := fun (x y : A) (e : D[A](x, y)) => J[u v. D[A](v, u)](x, y, e, [z] refl z)",
        );
        assert!(m.ok(), "{:?}", m.diagnostics);
        assert_eq!(m.def("symm").unwrap().body, m.def("symm2").unwrap().body);
    }

    #[test]
    fn swapped_motive_rejected() {
        let m = check(
            "type A
             def bad : Pi x y : A. D[A](x, y) -> D[A](y, x) :=
               fun x y e => J[u v. D[A](u, v)](x, y, e, [z] refl z)",
        );
        assert!(!m.ok());
        assert!(m.diagnostics[0].expected.is_some());
    }

    #[test]
    fn fuzz_twice() {
        let m = check(
            "calculus fuzz type A
             def twice : !2 (A -o A) -o A -o A := fun x y => x (x y)
             def twice_bad : (A -o A) -o A -o A := fun x y => x (x y)",
        );
        assert!(m.statuses[1].ok && !m.statuses[2].ok, "{:?}", m.statuses);
    }

    #[test]
    fn distance_function_with_case_equations() {
        let m = check(
            "type Bool type A
             const b0 : Bool const b1 : Bool
             const case : Bool -> A -> A -> A
             equation case0 (x y : A) := case b0 x y = x
             equation case1 (x y : A) := case b1 x y = y
             dconst inf : D[Bool](b0, b1)
             def dist : Pi x : A. Pi y : A. D[A](x, y) :=
               fun x y => J[u v. D[A](case u x y, case v x y)](b0, b1, inf, [w] refl (case w x y))",
        );
        assert!(m.ok(), "{:?}", m.diagnostics);
    }

    #[test]
    fn pred_abbreviation() {
        let m = check(
            "type A type B
             pred FExt (f g : A -> B) := Pi x : A. D[B](f x, g x)
             def e1 : Pi f g : A -> B. D[A -> B](f, g) -> FExt f g :=
               fun f g p => J[h k. FExt h k](f, g, p, [h] fun x => refl (h x))",
        );
        assert!(m.ok(), "{:?}", m.diagnostics);
    }
}
