//! Concrete syntax: lexer, parser, printer and elaboration into the kernel.

pub mod delab;
pub mod elab;
pub mod lexer;
pub mod parser;
pub mod print;

use num_rational::Rational64;
use serde::Serialize;
use std::fmt;

pub use parser::parse;
pub use print::{print_file, Printer};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Note,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actual: Option<String>,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, span, message: message.into(), expected: None, actual: None }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        };
        write!(f, "{}: {}: {}", self.span, sev, self.message)?;
        if let (Some(e), Some(a)) = (&self.expected, &self.actual) {
            write!(f, "\n  expected: {e}\n  actual:   {a}")?;
        }
        Ok(())
    }
}

/// Types and predicates share one surface grammar; elaboration sorts them.
#[derive(Clone, Debug, PartialEq)]
pub enum Class {
    /// A base type, type abbreviation, or predicate abbreviation applied to
    /// program-term arguments.
    Name(String, Vec<Expr>),
    Arrow(Box<Class>, Box<Class>),
    Lolli(Box<Class>, Box<Class>),
    Product(Box<Class>, Box<Class>),
    Tensor(Box<Class>, Box<Class>),
    Bang(Rational64, Box<Class>),
    Diff(Box<Class>, Expr, Expr),
    /// `Pi x : A. P`
    Pi(String, Box<Class>, Box<Class>),
    /// `Pi x y : A. D[A](x, y) -> P`
    PiDiff(String, String, Box<Class>, Box<Class>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binder {
    pub names: Vec<String>,
    pub ann: Option<Class>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var(String),
    Num(String),
    App(Box<Expr>, Box<Expr>),
    Fun(Vec<Binder>, Box<Expr>),
    Pair(Box<Expr>, Box<Expr>),
    Fst(Box<Expr>),
    Snd(Box<Expr>),
    Bang(Box<Expr>),
    LetBang(String, Box<Expr>, Box<Expr>),
    LetPair(String, String, Box<Expr>, Box<Expr>),
    Refl(Box<Expr>),
    Der(Box<Expr>),
    J(Box<JExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct JExpr {
    pub x: String,
    pub y: String,
    pub carrier: Option<Class>,
    pub motive: Class,
    pub lhs: Expr,
    pub rhs: Expr,
    pub diff: Expr,
    pub z: String,
    pub branch: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decl {
    Type { name: String, def: Option<Class> },
    Const { name: String, ty: Class },
    DConst { name: String, pred: Class },
    Pred { name: String, params: Vec<Binder>, body: Class },
    Def { name: String, ann: Option<Class>, body: Expr },
    Rules(Vec<String>),
    Calculus(String),
    Numerals(Class),
    /// A computation rule for constants, `equation n (x : A) := lhs = rhs`.
    Equation { name: String, params: Vec<Binder>, lhs: Expr, rhs: Expr },
}

impl Decl {
    pub fn name(&self) -> Option<&str> {
        match self {
            Decl::Type { name, .. }
            | Decl::Const { name, .. }
            | Decl::DConst { name, .. }
            | Decl::Pred { name, .. }
            | Decl::Def { name, .. }
            | Decl::Equation { name, .. } => Some(name),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Item {
    pub decl: Decl,
    pub span: Span,
}

impl PartialEq for Item {
    fn eq(&self, o: &Self) -> bool {
        self.decl == o.decl
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SourceFile {
    pub items: Vec<Item>,
}

impl SourceFile {
    pub fn decls(&self) -> impl Iterator<Item = &Decl> {
        self.items.iter().map(|i| &i.decl)
    }
}

impl Expr {
    pub fn var(s: &str) -> Expr {
        Expr::Var(s.to_string())
    }
    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }
    pub fn apps(f: Expr, args: impl IntoIterator<Item = Expr>) -> Expr {
        args.into_iter().fold(f, Expr::app)
    }
}
