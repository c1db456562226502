use num_rational::Rational64;
use std::fmt::Write;

use super::{Binder, Class, Decl, Expr, SourceFile};

pub fn rational(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn print_file(f: &SourceFile) -> String {
    let mut out = String::new();
    for d in f.decls() {
        out.push_str(&Printer.decl(d));
        out.push('\n');
    }
    out
}

/// Deterministic printer with minimal parentheses.
pub struct Printer;

impl Printer {
    pub fn decl(&self, d: &Decl) -> String {
        match d {
            Decl::Type { name, def: None } => format!("type {name}"),
            Decl::Type { name, def: Some(c) } => format!("type {name} := {}", self.class(c)),
            Decl::Const { name, ty } => format!("const {name} : {}", self.class(ty)),
            Decl::DConst { name, pred } => format!("dconst {name} : {}", self.class(pred)),
            Decl::Pred { name, params, body } => {
                let mut s = format!("pred {name}");
                for b in params {
                    s.push(' ');
                    s.push_str(&self.binder(b));
                }
                let _ = write!(s, " := {}", self.class(body));
                s
            }
            Decl::Def { name, ann, body } => match ann {
                Some(c) => format!("def {name} : {} := {}", self.class(c), self.expr(body)),
                None => format!("def {name} := {}", self.expr(body)),
            },
            Decl::Rules(rs) => format!("rules {}", rs.join(", ")),
            Decl::Calculus(c) => format!("calculus {c}"),
            Decl::Numerals(c) => format!("numerals {}", self.class(c)),
            Decl::Equation { name, params, lhs, rhs } => {
                let mut s = format!("equation {name}");
                for b in params {
                    s.push(' ');
                    s.push_str(&self.binder(b));
                }
                let _ = write!(s, " := {} = {}", self.expr(lhs), self.expr(rhs));
                s
            }
        }
    }

    pub fn binder(&self, b: &Binder) -> String {
        match &b.ann {
            Some(c) => format!("({} : {})", b.names.join(" "), self.class(c)),
            None => b.names.join(" "),
        }
    }

    pub fn class(&self, c: &Class) -> String {
        self.class_at(c, 0)
    }

    fn class_at(&self, c: &Class, prec: u8) -> String {
        let (p, s) = match c {
            Class::Pi(x, a, body) => (0, format!("Pi {x} : {}. {}", self.class_at(a, 0), self.class_at(body, 0))),
            Class::PiDiff(x, y, a, body) => {
                let a = self.class_at(a, 0);
                (0, format!("Pi {x} {y} : {a}. D[{a}]({x}, {y}) -> {}", self.class_at(body, 0)))
            }
            Class::Arrow(a, b) => (1, format!("{} -> {}", self.class_at(a, 2), self.class_at(b, 0))),
            Class::Lolli(a, b) => (1, format!("{} -o {}", self.class_at(a, 2), self.class_at(b, 0))),
            Class::Product(a, b) => (2, format!("{} * {}", self.class_at(a, 2), self.class_at(b, 3))),
            Class::Tensor(a, b) => (2, format!("{} ** {}", self.class_at(a, 2), self.class_at(b, 3))),
            Class::Bang(r, a) => (3, format!("!{} {}", rational(r), self.class_at(a, 3))),
            Class::Diff(a, t, u) => (4, format!("D[{}]({}, {})", self.class_at(a, 0), self.expr(t), self.expr(u))),
            Class::Name(n, args) => {
                let mut s = n.clone();
                for a in args {
                    s.push(' ');
                    s.push_str(&self.expr_at(a, 3));
                }
                (4, s)
            }
        };
        if p < prec {
            format!("({s})")
        } else {
            s
        }
    }

    pub fn expr(&self, e: &Expr) -> String {
        self.expr_at(e, 0)
    }

    fn expr_at(&self, e: &Expr, prec: u8) -> String {
        let (p, s) = match e {
            Expr::Fun(bs, body) => {
                let bs: Vec<String> = bs.iter().map(|b| self.binder(b)).collect();
                (0, format!("fun {} => {}", bs.join(" "), self.expr_at(body, 0)))
            }
            Expr::LetBang(x, t, u) => (0, format!("let !{x} = {} in {}", self.expr_at(t, 0), self.expr_at(u, 0))),
            Expr::LetPair(x, y, t, u) => {
                (0, format!("let ({x}, {y}) = {} in {}", self.expr_at(t, 0), self.expr_at(u, 0)))
            }
            Expr::App(f, a) => (1, format!("{} {}", self.expr_at(f, 1), self.expr_at(a, 3))),
            Expr::Refl(a) => (2, format!("refl {}", self.expr_at(a, 3))),
            Expr::Der(a) => (2, format!("Der {}", self.expr_at(a, 3))),
            Expr::Fst(a) => (2, format!("fst {}", self.expr_at(a, 3))),
            Expr::Snd(a) => (2, format!("snd {}", self.expr_at(a, 3))),
            Expr::Bang(a) => (2, format!("!{}", self.expr_at(a, 3))),
            Expr::Var(x) => (3, x.clone()),
            Expr::Num(n) => (3, n.clone()),
            Expr::Pair(a, b) => (3, format!("({}, {})", self.expr_at(a, 0), self.expr_at(b, 0))),
            Expr::J(j) => {
                let carrier = match &j.carrier {
                    Some(c) => format!(" : {}", self.class_at(c, 0)),
                    None => String::new(),
                };
                (
                    3,
                    format!(
                        "J[{} {}{}. {}]({}, {}, {}, [{}] {})",
                        j.x,
                        j.y,
                        carrier,
                        self.class_at(&j.motive, 0),
                        self.expr_at(&j.lhs, 0),
                        self.expr_at(&j.rhs, 0),
                        self.expr_at(&j.diff, 0),
                        j.z,
                        self.expr_at(&j.branch, 0)
                    ),
                )
            }
        };
        if p < prec {
            format!("({s})")
        } else {
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parser::{parse_class, parse_expr};

    #[test]
    fn refl_of_numeral() {
        assert_eq!(Printer.expr(&Expr::Refl(Box::new(Expr::Num("3".into())))), "refl 3");
    }

    #[test]
    fn bang_of_lolli() {
        let c = Class::Bang(
            Rational64::from_integer(2),
            Box::new(Class::Lolli(Box::new(Class::Name("A".into(), vec![])), Box::new(Class::Name("A".into(), vec![])))),
        );
        assert_eq!(Printer.class(&c), "!2 (A -o A)");
    }

    #[test]
    fn roundtrips() {
        for src in [
            "fun (x : A) => f (refl x) (g x y)",
            "J[x y : A. D[B](f x, f y)](t, u, e, [z] refl (f z))",
            "let (a, b) = p in (b, a)",
            "Der (fun x => x) t u e",
            "fst (fst p)",
        ] {
            let e = parse_expr(src).unwrap();
            assert_eq!(Printer.expr(&e), src);
        }
        for src in ["Pi f g : A -> B. D[A -> B](f, g) -> Pi x : A. D[B](f x, g x)", "(A -> B) * C -> !1/2 (A ** B)"] {
            let c = parse_class(src).unwrap();
            assert_eq!(Printer.class(&c), src);
        }
    }
}
