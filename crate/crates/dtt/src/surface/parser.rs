use num_rational::Rational64;

use super::lexer::{lex, Tok, Token};
use super::{Binder, Class, Decl, Diagnostic, Expr, Item, JExpr, SourceFile, Span};

pub fn parse(src: &str) -> Result<SourceFile, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser { toks, pos: 0 };
    let mut items = Vec::new();
    let mut errs = Vec::new();
    while !p.at_eof() {
        let span = p.span();
        let start = p.pos;
        match p.decl() {
            Ok(decl) => items.push(Item { decl, span }),
            Err(d) => {
                errs.push(d);
                p.recover(start);
            }
        }
    }
    if errs.is_empty() {
        Ok(SourceFile { items })
    } else {
        Err(errs)
    }
}

/// Parses a single expression (used by the CLI and tests).
pub fn parse_expr(src: &str) -> Result<Expr, Diagnostic> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_class(src: &str) -> Result<Class, Diagnostic> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let c = p.class()?;
    p.expect_eof()?;
    Ok(c)
}

pub fn parse_rational(s: &str) -> Option<Rational64> {
    if let Some((n, d)) = s.split_once('/') {
        let (n, d): (i64, i64) = (n.parse().ok()?, d.parse().ok()?);
        if d == 0 {
            return None;
        }
        return Some(Rational64::new(n, d));
    }
    if let Some((i, f)) = s.split_once('.') {
        let den = 10i64.checked_pow(f.len() as u32)?;
        let whole: i64 = i.parse().ok()?;
        let frac: i64 = f.parse().ok()?;
        return Some(Rational64::new(whole * den + frac, den));
    }
    s.parse::<i64>().ok().map(Rational64::from_integer)
}

const DECL_KWS: &[&str] = &["def", "const", "dconst", "type", "pred", "rules", "calculus", "numerals", "equation"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }
    fn span(&self) -> Span {
        self.toks[self.pos].span
    }
    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }
    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == s)
    }
    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }
    fn err<T>(&self, what: &str) -> PResult<T> {
        Err(Diagnostic::error(self.span(), format!("expected {what}, found {}", describe(self.peek()))))
    }
    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(&format!("`{s}`"))
        }
    }
    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.is_kw(s) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{s}`"))
        }
    }
    fn expect_eof(&self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.err("end of input")
        }
    }
    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("an identifier"),
        }
    }

    fn recover(&mut self, start: usize) {
        if self.pos == start {
            self.bump();
        }
        while !self.at_eof() {
            if let Tok::Kw(k) = self.peek() {
                if DECL_KWS.contains(k) {
                    return;
                }
            }
            self.bump();
        }
    }

    fn decl(&mut self) -> PResult<Decl> {
        let kw = match self.peek() {
            Tok::Kw(k) if DECL_KWS.contains(k) => *k,
            _ => return self.err("a declaration"),
        };
        self.bump();
        match kw {
            "type" => {
                let name = self.ident()?;
                let def = if self.eat_sym(":=") { Some(self.class()?) } else { None };
                Ok(Decl::Type { name, def })
            }
            "const" => {
                let name = self.const_name()?;
                self.expect_sym(":")?;
                Ok(Decl::Const { name, ty: self.class()? })
            }
            "dconst" => {
                let name = self.ident()?;
                self.expect_sym(":")?;
                Ok(Decl::DConst { name, pred: self.class()? })
            }
            "pred" => {
                let name = self.ident()?;
                let mut params = Vec::new();
                while self.is_sym("(") {
                    let b = self.binder()?;
                    if b.ann.is_none() {
                        return self.err("an annotated parameter");
                    }
                    params.push(b);
                }
                self.expect_sym(":=")?;
                Ok(Decl::Pred { name, params, body: self.class()? })
            }
            "def" => {
                let name = self.ident()?;
                let ann = if self.eat_sym(":") { Some(self.class()?) } else { None };
                self.expect_sym(":=")?;
                Ok(Decl::Def { name, ann, body: self.expr()? })
            }
            "rules" => {
                let mut names = vec![self.rule_name()?];
                while self.eat_sym(",") {
                    names.push(self.rule_name()?);
                }
                Ok(Decl::Rules(names))
            }
            "calculus" => Ok(Decl::Calculus(self.ident()?)),
            "numerals" => Ok(Decl::Numerals(self.class()?)),
            "equation" => {
                let name = self.ident()?;
                let mut params = Vec::new();
                while self.is_sym("(") {
                    let b = self.binder()?;
                    if b.ann.is_none() {
                        return self.err("an annotated parameter");
                    }
                    params.push(b);
                }
                self.expect_sym(":=")?;
                let lhs = self.expr()?;
                self.expect_sym("=")?;
                Ok(Decl::Equation { name, params, lhs, rhs: self.expr()? })
            }
            _ => unreachable!(),
        }
    }

    fn const_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.ident(),
        }
    }

    fn rule_name(&mut self) -> PResult<String> {
        self.ident()
    }

    // ---------------------------------------------------------------- classes

    pub fn class(&mut self) -> PResult<Class> {
        if self.is_kw("Pi") {
            self.bump();
            let x = self.ident()?;
            let y = if matches!(self.peek(), Tok::Ident(_)) { Some(self.ident()?) } else { None };
            self.expect_sym(":")?;
            let dom = self.class()?;
            self.expect_sym(".")?;
            return match y {
                None => Ok(Class::Pi(x, Box::new(dom), Box::new(self.class()?))),
                Some(y) => {
                    let at = self.span();
                    self.expect_kw("D")?;
                    self.expect_sym("[")?;
                    let carrier = self.class()?;
                    self.expect_sym("]")?;
                    self.expect_sym("(")?;
                    let a = self.ident()?;
                    self.expect_sym(",")?;
                    let b = self.ident()?;
                    self.expect_sym(")")?;
                    if carrier != dom || a != x || b != y {
                        return Err(Diagnostic::error(at, format!("expected the premise D[..]({x}, {y}) over the bound domain")));
                    }
                    self.expect_sym("->")?;
                    Ok(Class::PiDiff(x, y, Box::new(dom), Box::new(self.class()?)))
                }
            };
        }
        let lhs = self.prod_class()?;
        if self.eat_sym("->") {
            return Ok(Class::Arrow(Box::new(lhs), Box::new(self.class()?)));
        }
        if self.eat_sym("-o") {
            return Ok(Class::Lolli(Box::new(lhs), Box::new(self.class()?)));
        }
        Ok(lhs)
    }

    fn prod_class(&mut self) -> PResult<Class> {
        let mut lhs = self.unary_class()?;
        loop {
            if self.eat_sym("*") {
                lhs = Class::Product(Box::new(lhs), Box::new(self.unary_class()?));
            } else if self.eat_sym("**") {
                lhs = Class::Tensor(Box::new(lhs), Box::new(self.unary_class()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary_class(&mut self) -> PResult<Class> {
        if self.is_sym("!") {
            self.bump();
            let at = self.span();
            let r = match self.bump() {
                Tok::Num(n) => parse_rational(&n).filter(|r| *r >= Rational64::from_integer(0)),
                _ => None,
            };
            let Some(r) = r else {
                return Err(Diagnostic::error(at, "expected a nonnegative scale after `!`"));
            };
            return Ok(Class::Bang(r, Box::new(self.unary_class()?)));
        }
        self.atom_class()
    }

    fn atom_class(&mut self) -> PResult<Class> {
        if self.eat_sym("(") {
            let c = self.class()?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        if self.is_kw("D") {
            self.bump();
            self.expect_sym("[")?;
            let carrier = self.class()?;
            self.expect_sym("]")?;
            self.expect_sym("(")?;
            let t = self.expr()?;
            self.expect_sym(",")?;
            let u = self.expr()?;
            self.expect_sym(")")?;
            return Ok(Class::Diff(Box::new(carrier), t, u));
        }
        let name = self.ident()?;
        let mut args = Vec::new();
        while self.starts_atom() {
            args.push(self.atom()?);
        }
        Ok(Class::Name(name, args))
    }

    // ------------------------------------------------------------ expressions

    pub fn expr(&mut self) -> PResult<Expr> {
        if self.is_kw("fun") {
            self.bump();
            let mut binders = Vec::new();
            while !self.is_sym("=>") {
                binders.push(self.binder()?);
            }
            if binders.is_empty() {
                return self.err("a binder");
            }
            self.bump();
            return Ok(Expr::Fun(binders, Box::new(self.expr()?)));
        }
        if self.is_kw("let") {
            self.bump();
            if self.eat_sym("!") {
                let x = self.ident()?;
                self.expect_sym("=")?;
                let t = self.expr()?;
                self.expect_kw("in")?;
                return Ok(Expr::LetBang(x, Box::new(t), Box::new(self.expr()?)));
            }
            self.expect_sym("(")?;
            let x = self.ident()?;
            self.expect_sym(",")?;
            let y = self.ident()?;
            self.expect_sym(")")?;
            self.expect_sym("=")?;
            let t = self.expr()?;
            self.expect_kw("in")?;
            return Ok(Expr::LetPair(x, y, Box::new(t), Box::new(self.expr()?)));
        }
        let mut e = self.prefix()?;
        while self.starts_prefix() {
            e = Expr::app(e, self.prefix()?);
        }
        Ok(e)
    }

    fn binder(&mut self) -> PResult<Binder> {
        if self.eat_sym("(") {
            let mut names = vec![self.ident()?];
            while matches!(self.peek(), Tok::Ident(_)) {
                names.push(self.ident()?);
            }
            self.expect_sym(":")?;
            let ann = self.class()?;
            self.expect_sym(")")?;
            return Ok(Binder { names, ann: Some(ann) });
        }
        Ok(Binder { names: vec![self.ident()?], ann: None })
    }

    fn starts_atom(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_) | Tok::Num(_) | Tok::Sym("(") | Tok::Kw("J"))
    }

    fn starts_prefix(&self) -> bool {
        self.starts_atom() || matches!(self.peek(), Tok::Sym("!") | Tok::Kw("refl" | "Der" | "fst" | "snd"))
    }

    fn prefix(&mut self) -> PResult<Expr> {
        let wrap: fn(Box<Expr>) -> Expr = match self.peek() {
            Tok::Kw("refl") => Expr::Refl,
            Tok::Kw("Der") => Expr::Der,
            Tok::Kw("fst") => Expr::Fst,
            Tok::Kw("snd") => Expr::Snd,
            Tok::Sym("!") => Expr::Bang,
            _ => return self.atom(),
        };
        self.bump();
        Ok(wrap(Box::new(self.prefix()?)))
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Expr::Var(s))
            }
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Num(n))
            }
            Tok::Sym("(") => {
                self.bump();
                let a = self.expr()?;
                if self.eat_sym(",") {
                    let b = self.expr()?;
                    self.expect_sym(")")?;
                    return Ok(Expr::Pair(Box::new(a), Box::new(b)));
                }
                self.expect_sym(")")?;
                Ok(a)
            }
            Tok::Kw("J") => {
                let at = self.span();
                self.bump();
                if !self.is_sym("[") {
                    return Err(Diagnostic::error(at, "J requires an explicit motive annotation `J[x y. P](...)`"));
                }
                self.bump();
                let x = self.ident()?;
                let y = self.ident()?;
                let carrier = if self.eat_sym(":") { Some(self.class()?) } else { None };
                self.expect_sym(".")?;
                let motive = self.class()?;
                self.expect_sym("]")?;
                self.expect_sym("(")?;
                let lhs = self.expr()?;
                self.expect_sym(",")?;
                let rhs = self.expr()?;
                self.expect_sym(",")?;
                let diff = self.expr()?;
                self.expect_sym(",")?;
                self.expect_sym("[")?;
                let z = self.ident()?;
                self.expect_sym("]")?;
                let branch = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::J(Box::new(JExpr { x, y, carrier, motive, lhs, rhs, diff, z, branch })))
            }
            _ => self.err("an expression"),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Num(s) => format!("number `{s}`"),
        Tok::Kw(k) => format!("keyword `{k}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_with_motive() {
        let f = parse("def d := fun x y e => J[z w. D[Real](z, w)](x, y, e, [v] refl v)").unwrap();
        let Decl::Def { body: Expr::Fun(bs, body), .. } = &f.items[0].decl else { panic!() };
        assert_eq!(bs.len(), 3);
        assert!(matches!(**body, Expr::J(_)));
    }

    #[test]
    fn j_without_motive_is_rejected() {
        let errs = parse("def d := J(x, y, e, [v] refl v)").unwrap_err();
        assert!(errs[0].message.contains("motive"));
    }

    #[test]
    fn pred_abbreviation() {
        let f = parse("pred P (x y : A) := Pi z : B. D[C](f z x, g z y)").unwrap();
        let Decl::Pred { body: Class::Pi(_, _, b), .. } = &f.items[0].decl else { panic!() };
        assert!(matches!(**b, Class::Diff(..)));
    }

    #[test]
    fn self_application_parses() {
        assert!(parse("def w := fun x => x x").is_ok());
    }

    #[test]
    fn bang_scales() {
        let c = parse_class("!1/2 (A -o A) -o A").unwrap();
        let Class::Lolli(l, _) = c else { panic!() };
        assert!(matches!(*l, Class::Bang(r, _) if r == Rational64::new(1, 2)));
    }

    #[test]
    fn pidiff_premise_must_match() {
        assert!(parse_class("Pi x y : A. D[A](y, x) -> D[A](x, x)").is_err());
        assert!(parse_class("Pi x y : A. D[A](x, y) -> D[A](x, x)").is_ok());
    }

    #[test]
    fn error_recovery_reports_several() {
        let errs = parse("def a := )\ndef b := (\ndef c := x").unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[1].span.line, 3);
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("0.25"), Some(Rational64::new(1, 4)));
        assert_eq!(parse_rational("3/6"), Some(Rational64::new(1, 2)));
        assert_eq!(parse_rational("7"), Some(Rational64::from_integer(7)));
    }
}
