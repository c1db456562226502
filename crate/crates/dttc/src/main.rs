//! `dttc`: check, normalize, evaluate and differentiate `.dtt` files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value as Json};

use dtt::pretty;
use dtt::semantics::{EnvSpec, Interp};
use dtt::suite::{self, CaseKind, DeriveError, Outcome, RunOptions};
use dtt::surface::elab::{check_source, DefBody, ElabOptions, Module};
use dtt::syntax::{Calculus, Context, RuleSet};

#[derive(Parser)]
#[command(name = "dttc", version, about = "Checker and evaluator for difference type theory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type-check declarations.
    Check { files: Vec<PathBuf> },
    /// Normalize definitions under the active rule set.
    Normalize { file: PathBuf },
    /// Evaluate definitions in a backend and check differences against their predicates.
    Eval { file: PathBuf },
    /// Expand `Der` for a function, infer its predicate and evaluate it.
    Derive { file: PathBuf, name: Option<String> },
    /// Run the golden corpus.
    Corpus {
        #[arg(default_value = "corpus")]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct Opts {
    /// Extra rules, comma separated (`+jeta-plus` enables the forbidden rule).
    #[arg(long, global = true)]
    rules: Option<String>,
    #[arg(long, global = true, value_enum)]
    calculus: Option<CalculusArg>,
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Backend environment; defaults to the source path with a `.json` extension.
    #[arg(long, global = true)]
    env: Option<PathBuf>,
    /// Restrict to one definition.
    #[arg(long, global = true)]
    term: Option<String>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 24)]
    samples: usize,
    #[arg(long, global = true, env = "DTTC_FUEL")]
    fuel: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, global = true)]
    keep_going: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalculusArg {
    Stlc,
    Fuzz,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Exit status plus the message shown on stderr.
struct Failure {
    code: u8,
    message: String,
}

fn config(message: impl Into<String>) -> Failure {
    Failure { code: 3, message: message.into() }
}

struct Report {
    json: Json,
    text: String,
    code: u8,
}

impl Opts {
    fn rules(&self) -> Result<RuleSet, Failure> {
        match &self.rules {
            Some(r) => RuleSet::parse(r).map_err(|e| config(e.to_string())),
            None => Ok(RuleSet::default()),
        }
    }

    fn fuel(&self) -> usize {
        self.fuel.filter(|n| *n > 0).unwrap_or_else(dtt::rewrite::default_fuel)
    }

    fn elab(&self) -> Result<ElabOptions, Failure> {
        Ok(ElabOptions {
            extra_rules: self.rules()?,
            calculus: self.calculus.map(|c| match c {
                CalculusArg::Stlc => Calculus::Stlc,
                CalculusArg::Fuzz => Calculus::Fuzz,
            }),
            fuel: self.fuel(),
            keep_going: self.keep_going,
        })
    }

    fn env_path(&self, file: &Path) -> PathBuf {
        self.env.clone().unwrap_or_else(|| file.with_extension("json"))
    }

    fn interp(&self, file: &Path, m: &Module) -> Result<(String, Interp), Failure> {
        let b = self.backend.clone().ok_or_else(|| config("--backend is required"))?;
        let path = self.env_path(file);
        let env = if path.exists() || self.env.is_some() {
            suite::load_env(&path).map_err(|e| config(e.to_string()))?
        } else {
            EnvSpec::default()
        };
        let be = suite::backend(&b, env).map_err(|e| config(e.to_string()))?;
        let interp = Interp::new(be, m.checker().with_fuel(self.fuel())).with_samples(self.samples, self.seed);
        interp.admits().map_err(|e| Failure { code: 2, message: e.to_string() })?;
        Ok((b, interp))
    }

    fn flags(&self) -> String {
        let mut s = String::new();
        if let Some(r) = &self.rules {
            let _ = write!(s, " --rules={r}");
        }
        if let Some(c) = self.calculus {
            let _ = write!(s, " --calculus={}", if matches!(c, CalculusArg::Fuzz) { "fuzz" } else { "stlc" });
        }
        if let Some(f) = self.fuel {
            let _ = write!(s, " --fuel={f}");
        }
        s
    }
}

fn load(opts: &Opts, file: &Path) -> Result<Module, Failure> {
    let src = suite::read(file).map_err(|e| config(e.to_string()))?;
    Ok(check_source(&src, &opts.elab()?))
}

fn checked(opts: &Opts, file: &Path) -> Result<Module, Failure> {
    let m = load(opts, file)?;
    if !m.ok() {
        let mut msg = format!("{}: does not type-check", file.display());
        for d in &m.diagnostics {
            let _ = write!(msg, "\n{d}");
        }
        let _ = write!(msg, "\nrepro: dttc check {}{} --keep-going", file.display(), opts.flags());
        return Err(Failure { code: 1, message: msg });
    }
    Ok(m)
}

fn selected<'a>(opts: &Opts, m: &'a Module) -> Result<Vec<&'a dtt::surface::elab::Def>, Failure> {
    match &opts.term {
        Some(n) => m.def(n).map(|d| vec![d]).ok_or_else(|| config(format!("no definition named `{n}`"))),
        None => Ok(m.defs.iter().collect()),
    }
}

fn trivialization(rules: RuleSet) -> Option<String> {
    suite::trivialization_detected(rules)
        .then(|| "trivialization detected: a = refl t is derivable for an arbitrary a : D[A](t, t)".to_string())
}

fn check(opts: &Opts, files: &[PathBuf]) -> Result<Report, Failure> {
    if files.is_empty() {
        return Err(config("no input files"));
    }
    let mut out = Vec::new();
    let mut text = String::new();
    let mut code = 0;
    for f in files {
        let m = load(opts, f)?;
        let repro = format!("dttc check {}{} --keep-going", f.display(), opts.flags());
        let _ = writeln!(text, "{}: {}", f.display(), if m.ok() { "ok" } else { "FAILED" });
        for s in &m.statuses {
            let _ = writeln!(text, "  {} {} (line {})", if s.ok { "ok  " } else { "fail" }, s.name, s.line);
        }
        for d in &m.diagnostics {
            let _ = writeln!(text, "{d}");
        }
        if !m.ok() {
            code = 1;
            let _ = writeln!(text, "repro: {repro}");
        }
        out.push(json!({
            "path": f.display().to_string(),
            "ok": m.ok(),
            "declarations": m.statuses,
            "diagnostics": m.diagnostics,
            "repro": repro,
        }));
    }
    let warning = trivialization(opts.rules()?);
    if let Some(w) = &warning {
        let _ = writeln!(text, "warning: {w}");
    }
    Ok(Report { json: json!({"command": "check", "ok": code == 0, "files": out, "warning": warning}), text, code })
}

fn normalize(opts: &Opts, file: &Path) -> Result<Report, Failure> {
    let m = checked(opts, file)?;
    let checker = m.checker().with_fuel(opts.fuel());
    let rw = checker.rewriter();
    let ctx = Context::new();
    let mut out = Vec::new();
    let mut text = String::new();
    let mut code = 0;
    for d in selected(opts, &m)? {
        let (kind, before, after, ty) = match &d.body {
            DefBody::Program { term, ty } => {
                ("program", pretty::term(&ctx, term), rw.normalize_term(term).map(|n| pretty::term(&ctx, &n)), pretty::ty(ty))
            }
            DefBody::Difference { term, pred } => {
                ("difference", pretty::dterm(&ctx, term), rw.normalize(&ctx, term).map(|n| pretty::dterm(&ctx, &n)), pretty::pred(&ctx, pred))
            }
        };
        match after {
            Ok(nf) => {
                let _ = writeln!(text, "{} : {ty}\n  {before}\n  ~> {nf}", d.name);
                out.push(json!({"name": d.name, "kind": kind, "type": ty, "term": before, "normal_form": nf}));
            }
            Err(e) => {
                code = 1;
                let _ = writeln!(text, "{} : {ty}\n  error: {e}", d.name);
                out.push(json!({"name": d.name, "kind": kind, "type": ty, "term": before, "error": e.to_string()}));
            }
        }
    }
    let rules = m.rules.names();
    Ok(Report { json: json!({"command": "normalize", "ok": code == 0, "rules": rules, "definitions": out}), text, code })
}

fn outcome_lines(text: &mut String, outcomes: &[Outcome]) {
    for o in outcomes {
        match (&o.message, o.ok) {
            (_, true) => {
                let _ = writeln!(text, "  ok   {} = {}", o.name, o.value);
            }
            (m, false) => {
                let _ = writeln!(text, "  FAIL {}: {}", o.name, m.as_deref().unwrap_or(""));
            }
        }
    }
}

fn eval(opts: &Opts, file: &Path) -> Result<Report, Failure> {
    let mut m = checked(opts, file)?;
    let (b, interp) = opts.interp(file, &m)?;
    if let Some(n) = &opts.term {
        let d = m.def(n).cloned().ok_or_else(|| config(format!("no definition named `{n}`")))?;
        m.defs = vec![d];
    }
    let outcomes = suite::evaluate(&m, &interp);
    let ok = outcomes.iter().all(|o| o.ok);
    let repro = format!(
        "dttc eval {} --backend={b} --env={} --seed={} --samples={}{}",
        file.display(),
        opts.env_path(file).display(),
        opts.seed,
        opts.samples,
        opts.flags()
    );
    let mut text = format!("{} [{b}]: {}\n", file.display(), if ok { "ok" } else { "FAILED" });
    outcome_lines(&mut text, &outcomes);
    if !ok {
        let _ = writeln!(text, "repro: {repro}");
    }
    let json = json!({
        "command": "eval", "ok": ok, "backend": b, "seed": opts.seed, "samples": opts.samples,
        "results": outcomes, "repro": repro,
    });
    Ok(Report { json, text, code: if ok { 0 } else { 2 } })
}

fn derive(opts: &Opts, file: &Path, name: &str) -> Result<Report, Failure> {
    let m = checked(opts, file)?;
    let interp = match opts.backend {
        Some(_) => Some(opts.interp(file, &m)?.1),
        None => None,
    };
    let d = suite::derive(&m, name, interp.as_ref()).map_err(|e| Failure {
        code: match e {
            DeriveError::NotFound(_) => 3,
            DeriveError::Eval(_) => 2,
            _ => 1,
        },
        message: e.to_string(),
    })?;
    let mut text = format!("Der {} : {}\n  expansion: {}\n  predicate: {}\n", d.name, d.ty, d.expansion, d.predicate);
    if let (Some(b), Some(v)) = (&d.backend, &d.derivative) {
        let _ = writeln!(text, "  [{b}] {}", v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()));
    }
    let mut json = serde_json::to_value(&d).expect("derivation serializes");
    json["command"] = json!("derive");
    Ok(Report { json, text, code: 0 })
}

fn corpus(opts: &Opts, dir: &Path) -> Result<Report, Failure> {
    if !dir.is_dir() {
        return Err(config(format!("{}: corpus directory not found", dir.display())));
    }
    let mut cases = suite::discover(dir).map_err(|e| config(e.to_string()))?;
    if let Some(b) = &opts.backend {
        if !suite::BACKENDS.contains(&b.as_str()) {
            return Err(config(suite::SuiteError::UnknownBackend(b.clone()).to_string()));
        }
        cases.retain(|c| matches!(&c.kind, CaseKind::Backend { backend, .. } if backend == b));
    }
    let rules = opts.rules()?;
    let run = RunOptions { samples: opts.samples, seed: opts.seed, fuel: opts.fuel(), rules, ..RunOptions::default() };
    let started = Instant::now();
    let reports: Vec<_> = cases.par_iter().map(|c| suite::run_case(c, &run)).collect();
    let mut code = 0;
    let mut text = format!("{:<6} {:<8} {:<24} {:>7} {:>7} {:>7}\n", "status", "kind", "case", "sound", "factor", "rewrite");
    for (c, r) in cases.iter().zip(&reports) {
        let kind = r.backend.as_deref().unwrap_or("typing");
        let count = |v: &[Outcome]| format!("{}/{}", v.iter().filter(|o| o.ok).count(), v.len());
        let _ = writeln!(
            text,
            "{:<6} {:<8} {:<24} {:>7} {:>7} {:>7}",
            if r.ok { "PASS" } else { "FAIL" },
            kind,
            r.name,
            count(&r.soundness),
            count(&r.factorization),
            count(&r.rewriting)
        );
        if !r.ok {
            code = code.max(if matches!(c.kind, CaseKind::Typing { .. }) { 1 } else { 2 });
        }
    }
    for r in reports.iter().filter(|r| !r.ok) {
        let _ = writeln!(text, "\n{} failed", r.name);
        if let Some(e) = &r.error {
            let _ = writeln!(text, "  {}", e.replace('\n', "\n  "));
        }
        for s in r.typing.iter().filter(|s| !s.ok) {
            let _ = writeln!(text, "  {} (line {}): {}", s.name, s.line, s.message.as_deref().unwrap_or(""));
        }
        for o in r.soundness.iter().chain(&r.factorization).chain(&r.rewriting).filter(|o| !o.ok) {
            let _ = writeln!(text, "  {}: {}", o.name, o.message.as_deref().unwrap_or(""));
        }
        let _ = writeln!(text, "  repro: {}", r.repro);
    }
    let warning = trivialization(rules);
    if let Some(w) = &warning {
        code = 1;
        let _ = writeln!(text, "\n{w}");
    }
    let passed = reports.iter().filter(|r| r.ok).count();
    let _ = writeln!(text, "\n{passed}/{} cases passed in {:.2}s (seed {})", reports.len(), started.elapsed().as_secs_f64(), opts.seed);
    let json = json!({
        "command": "corpus",
        "ok": code == 0,
        "seed": opts.seed,
        "samples": opts.samples,
        "rules": rules.names(),
        "summary": {"total": reports.len(), "passed": passed, "failed": reports.len() - passed},
        "trivialization": warning.is_some(),
        "cases": reports,
    });
    Ok(Report { json, text, code })
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    let o = &cli.opts;
    match &cli.cmd {
        Cmd::Check { files } => check(o, files),
        Cmd::Normalize { file } => normalize(o, file),
        Cmd::Eval { file } => eval(o, file),
        Cmd::Derive { file, name } => {
            let name = name.clone().or_else(|| o.term.clone()).ok_or_else(|| config("derive needs a function name"))?;
            derive(o, file, &name)
        }
        Cmd::Corpus { dir } => corpus(o, dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(r) => {
            if cli.opts.format == Format::Json {
                println!("{}", serde_json::to_string_pretty(&r.json).expect("report serializes"));
            } else {
                print!("{}", r.text);
            }
            ExitCode::from(r.code)
        }
        Err(f) => {
            if cli.opts.format == Format::Json {
                println!("{}", serde_json::to_string_pretty(&json!({"ok": false, "exit": f.code, "error": f.message})).expect("error serializes"));
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
