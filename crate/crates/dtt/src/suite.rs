//! Corpus runner shared by the command line and the acceptance target.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::backends::{cdc::Cdc, change::Change, dlr::Dlr, metric::Metric};
use crate::error::EvalError;
use crate::pretty;
use crate::rewrite::trivialization_witness;
use crate::semantics::{Backend, EnvSpec, Interp};
use crate::surface::elab::{check_source, DeclStatus, DefBody, ElabOptions, Module};
use crate::syntax::{cnst, der, Context, DTerm, RuleSet, Term, Ty};
use crate::TypeError;

pub const BACKENDS: [&str; 4] = ["metric", "dlr", "change", "cdc"];

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("unknown backend `{0}` (expected metric, dlr, change or cdc)")]
    UnknownBackend(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Env { path: PathBuf, message: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub fn backend(name: &str, env: EnvSpec) -> Result<Arc<dyn Backend>, SuiteError> {
    Ok(match name {
        "metric" => Arc::new(Metric::new(env)?),
        "dlr" => Arc::new(Dlr::new(env)?),
        "change" => Arc::new(Change::new(env)?),
        "cdc" => Arc::new(Cdc::new(env)),
        other => return Err(SuiteError::UnknownBackend(other.to_string())),
    })
}

pub fn read(path: &Path) -> Result<String, SuiteError> {
    std::fs::read_to_string(path).map_err(|source| SuiteError::Io { path: path.to_path_buf(), source })
}

pub fn load_env(path: &Path) -> Result<EnvSpec, SuiteError> {
    EnvSpec::from_json(&read(path)?).map_err(|e| SuiteError::Env { path: path.to_path_buf(), message: e.to_string() })
}

/// One checked item.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Json::is_null")]
    pub value: Json,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Outcome {
    fn pass(name: impl Into<String>, value: Json) -> Self {
        Outcome { name: name.into(), ok: true, value, message: None }
    }

    fn fail(name: impl Into<String>, message: impl Into<String>) -> Self {
        Outcome { name: name.into(), ok: false, value: Json::Null, message: Some(message.into()) }
    }
}

/// Evaluates every definition; differences must satisfy their predicate.
pub fn evaluate(m: &Module, interp: &Interp) -> Vec<Outcome> {
    m.defs
        .iter()
        .map(|d| match &d.body {
            DefBody::Program { term, ty } => match interp.eval_term(term) {
                Ok(v) => Outcome::pass(&d.name, interp.backend.render(ty, &v)),
                Err(e) => Outcome::fail(&d.name, e.to_string()),
            },
            DefBody::Difference { term, pred } => {
                let v = match interp.eval_dterm(term) {
                    Ok(v) => v,
                    Err(e) => return Outcome::fail(&d.name, e.to_string()),
                };
                match interp.holds_pred(pred, &v) {
                    Ok(verdict) if verdict.ok() => Outcome::pass(&d.name, interp.render_at_pred(pred, &v)),
                    Ok(verdict) => Outcome::fail(&d.name, verdict.failures.join("; ")),
                    Err(e) => Outcome::fail(&d.name, e.to_string()),
                }
            }
        })
        .collect()
}

/// Every function-typed constant and definition, with its value.
fn arrows(m: &Module, interp: &Interp) -> Vec<(String, Ty, Result<crate::Value, EvalError>)> {
    let mut out = Vec::new();
    for (name, ty) in &m.sig.consts {
        if ty.unbang().as_function().is_some() {
            out.push((name.clone(), ty.clone(), interp.eval_term(&cnst(name))));
        }
    }
    for d in &m.defs {
        if let DefBody::Program { term, ty } = &d.body {
            if ty.unbang().as_function().is_some() {
                out.push((d.name.clone(), ty.clone(), interp.eval_term(term)));
            }
        }
    }
    out
}

/// `p ∘ i = f` and the closed form of `i` for every arrow of the module.
pub fn factorizations(m: &Module, interp: &Interp) -> Vec<Outcome> {
    arrows(m, interp)
        .into_iter()
        .map(|(name, ty, f)| {
            let verdict = f.and_then(|f| interp.check_factorization(&ty, &f));
            match verdict {
                Ok(v) if v.ok() => Outcome::pass(name, json!({"type": pretty::ty(&ty), "points": v.checked})),
                Ok(v) => Outcome::fail(name, v.failures.join("; ")),
                Err(e) => Outcome::fail(name, e.to_string()),
            }
        })
        .collect()
}

/// Every sub-collection of the backend's sound rules, each with β.
pub fn rule_subsets(sound: RuleSet) -> Vec<RuleSet> {
    let names: Vec<&str> = sound.names().into_iter().filter(|n| *n != "beta").collect();
    (0..1usize << names.len())
        .map(|mask| {
            let spec: Vec<&str> = names.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, n)| *n).collect();
            RuleSet::parse(&spec.join(",")).expect("sound rules parse")
        })
        .filter(|r| r.validate().is_ok())
        .collect()
}

/// Normalize-then-evaluate against evaluate, on `limit` (definition,
/// rule set) pairs drawn with `seed`.
pub fn rewrite_soundness(m: &Module, interp: &Interp, limit: usize, seed: u64) -> Vec<Outcome> {
    let subsets = rule_subsets(interp.backend.sound_rules());
    let mut pairs: Vec<(usize, RuleSet)> = (0..m.defs.len()).flat_map(|i| subsets.iter().map(move |r| (i, *r))).collect();
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pairs.truncate(limit);
    pairs.sort_by_key(|(i, r)| (*i, r.names().join(",")));
    let ctx = Context::new();
    pairs
        .into_iter()
        .map(|(i, rules)| {
            let d = &m.defs[i];
            let label = format!("{} [{}]", d.name, rules.names().join(","));
            let checker = m.checker().with_rules(rules);
            let rw = checker.rewriter();
            let res = match &d.body {
                DefBody::Program { term, ty } => rw.normalize_term(term).map_err(|e| e.to_string()).and_then(|n| {
                    let (a, b) = (interp.eval_term(term), interp.eval_term(&n));
                    match (a, b) {
                        (Ok(a), Ok(b)) => interp.backend.value_eq(ty, &a, &b).map_err(|e| e.to_string()).and_then(|same| {
                            if same {
                                Ok(())
                            } else {
                                Err("normal form has a different value".to_string())
                            }
                        }),
                        (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
                    }
                }),
                DefBody::Difference { term, pred } => rw.normalize(&ctx, term).map_err(|e| e.to_string()).and_then(|n| {
                    let (a, b) = (interp.eval_dterm(term), interp.eval_dterm(&n));
                    match (a, b) {
                        (Ok(a), Ok(b)) => match interp.same_at_pred(pred, &a, &b) {
                            Ok(v) if v.ok() => Ok(()),
                            Ok(v) => Err(format!("normal form differs: {}", v.failures.join("; "))),
                            Err(e) => Err(e.to_string()),
                        },
                        (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
                    }
                }),
            };
            match res {
                Ok(()) => Outcome::pass(label, Json::Null),
                Err(e) => Outcome::fail(label, e),
            }
        })
        .collect()
}

/// Whether `a = ∂(t)` becomes derivable for an arbitrary self-difference.
pub fn trivialization_detected(rules: RuleSet) -> bool {
    let a = Ty::base("A");
    trivialization_witness(rules, &a, &cnst("t"), &DTerm::Const("a".into()), &Context::new())
}

#[derive(Debug, thiserror::Error)]
pub enum DeriveError {
    #[error("no definition or constant named `{0}`")]
    NotFound(String),
    #[error("`{name}` has type {ty}, which is not a function type")]
    NotFunction { name: String, ty: String },
    #[error("`{0}` is a difference, not a function")]
    Difference(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, Serialize)]
pub struct Derivation {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub expansion: String,
    pub predicate: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivative: Option<Json>,
}

/// `Der name` with its inferred predicate and, given an interpretation,
/// its value (a polynomial under CDC, a behavior table otherwise).
pub fn derive(m: &Module, name: &str, interp: Option<&Interp>) -> Result<Derivation, DeriveError> {
    let (f, ty): (Term, Ty) = match (m.def(name), m.sig.consts.get(name)) {
        (Some(d), _) => match &d.body {
            DefBody::Program { term, ty } => (term.clone(), ty.clone()),
            DefBody::Difference { .. } => return Err(DeriveError::Difference(name.to_string())),
        },
        (None, Some(ty)) => (cnst(name), ty.clone()),
        (None, None) => return Err(DeriveError::NotFound(name.to_string())),
    };
    let (dom, cod) = ty
        .unbang()
        .as_function()
        .map(|(a, b)| (a.clone(), b.clone()))
        .ok_or_else(|| DeriveError::NotFunction { name: name.to_string(), ty: pretty::ty(&ty) })?;
    let ctx = Context::new();
    let expansion = der(&f, &dom, &cod);
    let checker = interp.map(|i| i.checker.clone()).unwrap_or_else(|| m.checker());
    let pred = checker.infer_diff(&ctx, &expansion)?;
    let shown = checker.rewriter().normalize_pred(&pred).unwrap_or_else(|_| pred.clone());
    let mut out = Derivation {
        name: name.to_string(),
        ty: pretty::ty(&ty),
        expansion: pretty::dterm(&ctx, &expansion),
        predicate: pretty::pred(&ctx, &shown),
        backend: None,
        derivative: None,
    };
    if let Some(interp) = interp {
        let v = interp.eval_dterm(&expansion)?;
        let b = interp.backend.name();
        out.derivative = Some(if b == "cdc" {
            Json::String(crate::backends::cdc::render_derivative(&dom, &cod, &v)?)
        } else {
            interp.render_at_pred(&pred, &v)
        });
        out.backend = Some(b.to_string());
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub enum CaseKind {
    /// Every definition is accepted, or with `reject`, every definition is
    /// rejected and every other declaration accepted.
    Typing { reject: bool },
    Backend { backend: String, env: PathBuf },
}

#[derive(Clone, Debug)]
pub struct Case {
    pub name: String,
    pub source: PathBuf,
    pub kind: CaseKind,
}

/// Top-level `.dtt` files are typing cases (`mutants*` must be rejected);
/// `<backend>/<name>.dtt` with `<name>.json` are backend cases.
pub fn discover(dir: &Path) -> Result<Vec<Case>, SuiteError> {
    let list = |d: &Path| -> Result<Vec<PathBuf>, SuiteError> {
        let rd = std::fs::read_dir(d).map_err(|source| SuiteError::Io { path: d.to_path_buf(), source })?;
        let mut v: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
        v.sort();
        Ok(v)
    };
    let stem = |p: &Path| p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
    let mut cases = Vec::new();
    for p in list(dir)? {
        if p.extension().is_some_and(|e| e == "dtt") {
            let name = stem(&p);
            cases.push(Case { kind: CaseKind::Typing { reject: name.starts_with("mutants") }, name, source: p });
        }
    }
    for b in BACKENDS {
        let sub = dir.join(b);
        if !sub.is_dir() {
            continue;
        }
        for p in list(&sub)? {
            if p.extension().is_some_and(|e| e == "dtt") {
                let env = p.with_extension("json");
                cases.push(Case { name: format!("{b}/{}", stem(&p)), source: p, kind: CaseKind::Backend { backend: b.to_string(), env } });
            }
        }
    }
    Ok(cases)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub samples: usize,
    pub seed: u64,
    pub fuel: usize,
    pub rules: RuleSet,
    /// Rewriting pairs per backend case.
    pub pairs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { samples: 24, seed: 42, fuel: crate::rewrite::default_fuel(), rules: RuleSet::default(), pairs: 40 }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CaseReport {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    pub ok: bool,
    pub typing: Vec<DeclStatus>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub soundness: Vec<Outcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub factorization: Vec<Outcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rewriting: Vec<Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub repro: String,
}

impl CaseReport {
    pub fn failures(&self) -> usize {
        let bad = |v: &[Outcome]| v.iter().filter(|o| !o.ok).count();
        bad(&self.soundness) + bad(&self.factorization) + bad(&self.rewriting) + usize::from(self.error.is_some())
    }
}

pub fn run_case(case: &Case, opts: &RunOptions) -> CaseReport {
    let mut r = CaseReport { name: case.name.clone(), ..CaseReport::default() };
    let src = match read(&case.source) {
        Ok(s) => s,
        Err(e) => {
            r.error = Some(e.to_string());
            return r;
        }
    };
    let eopts = ElabOptions { extra_rules: opts.rules, fuel: opts.fuel, ..ElabOptions::default() };
    let m = check_source(&src, &eopts);
    r.typing = m.statuses.clone();
    let path = case.source.display();
    match &case.kind {
        CaseKind::Typing { reject } => {
            r.repro = format!("dttc check {path} --keep-going");
            let defs: Vec<&str> = src.lines().filter_map(|l| l.strip_prefix("def ")).filter_map(|l| l.split_whitespace().next()).collect();
            r.ok = if *reject {
                m.statuses.iter().all(|s| s.ok != defs.contains(&s.name.as_str())) && !defs.is_empty()
            } else {
                m.ok()
            };
            if !m.ok() && !*reject {
                r.error = Some(m.diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"));
            }
        }
        CaseKind::Backend { backend: b, env } => {
            r.backend = Some(b.clone());
            r.repro = format!("dttc eval {path} --backend={b} --env={} --seed={} --samples={}", env.display(), opts.seed, opts.samples);
            if !m.ok() {
                r.error = Some(m.diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"));
                return r;
            }
            let be = match load_env(env).and_then(|e| backend(b, e)) {
                Ok(be) => be,
                Err(e) => {
                    r.error = Some(e.to_string());
                    return r;
                }
            };
            let interp = Interp::new(be, m.checker()).with_samples(opts.samples, opts.seed);
            if let Err(e) = interp.admits() {
                r.error = Some(e.to_string());
                return r;
            }
            r.soundness = evaluate(&m, &interp);
            r.factorization = factorizations(&m, &interp);
            r.rewriting = rewrite_soundness(&m, &interp, opts.pairs, opts.seed);
            r.ok = r.failures() == 0;
        }
    }
    r
}
