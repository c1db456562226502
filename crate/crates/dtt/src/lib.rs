//! Difference type theory: syntax, checking, rewriting and denotational
//! backends for quantitative program differences.

pub mod backends;
pub mod checker;
pub mod error;
pub mod pretty;
pub mod rewrite;
pub mod semantics;
pub mod subexp;
pub mod suite;
pub mod surface;
pub mod syntax;

pub use checker::Checker;
pub use error::{EvalError, RewriteError, SubexpError, SyntaxError, TypeError};
pub use rewrite::{Rewriter, Strategy};
pub use semantics::{Backend, Interp, Value};
pub use syntax::{Calculus, Context, DTerm, Motive, Pred, RuleSet, Signature, Term, Ty};
