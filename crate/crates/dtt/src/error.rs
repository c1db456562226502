use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SyntaxError {
    #[error("malformed term: {0}")]
    Malformed(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("incompatible rules: {0}")]
    IncompatibleRules(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TypeError {
    #[error("unbound program variable #{0}")]
    UnboundVar(usize),
    #[error("unbound difference variable #{0}")]
    UnboundDiffVar(usize),
    #[error("unknown constant `{0}`")]
    UnknownConst(String),
    #[error("unknown difference constant `{0}`")]
    UnknownDiffConst(String),
    #[error("application head is not a function: {0}")]
    NotAFunction(String),
    #[error("projection of a non-product: {0}")]
    NotAProduct(String),
    #[error("type mismatch: expected {expected}, found {actual}")]
    Mismatch { expected: String, actual: String },
    #[error("predicate mismatch: expected {expected}, found {actual}")]
    PredMismatch { expected: String, actual: String },
    #[error("carrier mismatch in D[{carrier}]: index has type {actual}")]
    CarrierMismatch { carrier: String, actual: String },
    #[error("difference argument is not a D-type: {0}")]
    NotADiff(String),
    #[error("expected a {expected} predicate, found {actual}")]
    WrongPredShape { expected: &'static str, actual: String },
    #[error("form not available in this calculus: {0}")]
    WrongCalculus(String),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RewriteError {
    #[error("fuel exhausted after {steps} steps (last redex: {last})")]
    FuelExhausted { steps: usize, last: String },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SubexpError {
    #[error("context clash: `{0}` declared at different types")]
    ContextClash(String),
    #[error("sensitivity overrun for `{name}`: needs {needed}, available {available}")]
    SensitivityOverrun { name: String, needed: String, available: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("type mismatch: expected {expected}, found {actual}")]
    Mismatch { expected: String, actual: String },
    #[error("term outside the sub-exponential fragment: {0}")]
    NotInFragment(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unsupported by the {backend} backend: {what}")]
    Unsupported { backend: &'static str, what: String },
    #[error("unsupported domain: {0}")]
    Domain(String),
    #[error("unknown base type `{0}` in environment")]
    UnboundBase(String),
    #[error("no semantics for constant `{0}`")]
    UnboundConst(String),
    #[error("ill-formed value: {0}")]
    Shape(String),
    #[error("change is not based at its point: {0}")]
    NotAChange(String),
    #[error("model soundness failure: {0}")]
    Unsound(String),
    #[error("evaluation rejected: {0}")]
    Other(String),
}

impl EvalError {
    pub fn shape(s: impl Into<String>) -> Self {
        EvalError::Shape(s.into())
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("cannot read environment: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed environment: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid environment: {0}")]
    Invalid(String),
}
