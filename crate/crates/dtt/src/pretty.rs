//! Printing kernel syntax through the surface printer.

use crate::surface::{delab, Printer};
use crate::syntax::{Context, DTerm, Pred, Term, Ty};

pub fn ty(t: &Ty) -> String {
    Printer.class(&delab::ty(t))
}

pub fn term(ctx: &Context, t: &Term) -> String {
    Printer.expr(&delab::term(ctx, t))
}

pub fn pred(ctx: &Context, p: &Pred) -> String {
    Printer.class(&delab::pred(ctx, p))
}

pub fn dterm(ctx: &Context, a: &DTerm) -> String {
    Printer.expr(&delab::dterm(ctx, a))
}
