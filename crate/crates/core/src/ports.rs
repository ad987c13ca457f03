//! Ports between machines and corpus-based checkers for equivalence,
//! consistency, completeness and the homomorphism condition.
//!
//! A port is a program translation and an outcome translation between a
//! source and a target machine. For conventional programs the check is
//!
//! ```text
//! translateoutcome ∘ eval(M1) ≃ eval(M2) ∘ translateprogram
//! ```
//!
//! where `≃` is equality when both sides are defined and agreement when both
//! are undefined. For KBS programs it is the subset law
//!
//! ```text
//! eval(M2) ∘ translateprogram ⊆ map(translateoutcome) ∘ eval(M1)
//! ```
//!
//! Every verdict is relative to the corpus it was computed on. Outcomes are
//! compared through readback and α-equivalence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use thiserror::Error;

use crate::machine::{self, readback, readback_size, Machine, READBACK_LIMIT};
use crate::ndmachine::{eval_nd, SearchBudget, Strategy};
use crate::rewrite::RewriteTable;
use crate::syntax::{self, alpha_key, fill, hole_count, is_conventional, parse_term, SyntaxError};
use crate::{EvalResult, Expr, Outcome, OutcomeSet, PExpr};

/// A translation was not defined on its input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("translation {translation} undefined: {reason}")]
pub struct TranslationUndefined {
    pub translation: String,
    pub reason: String,
}

type ProgramFn = dyn Fn(&PExpr) -> Result<PExpr, String> + Send + Sync;
type OutcomeFn = dyn Fn(&Outcome) -> Result<Outcome, String> + Send + Sync;

/// The program half of a port (`translateprogram`). Works on parameterised
/// programs so that it can be applied to contexts; holes are opaque leaves.
#[derive(Clone)]
pub struct ProgramTranslation {
    name: String,
    f: Arc<ProgramFn>,
}

impl fmt::Debug for ProgramTranslation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProgramTranslation({})", self.name)
    }
}

impl ProgramTranslation {
    pub fn new(
        name: &str,
        f: impl Fn(&PExpr) -> Result<PExpr, String> + Send + Sync + 'static,
    ) -> Self {
        ProgramTranslation {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply_context(&self, p: &PExpr) -> Result<PExpr, TranslationUndefined> {
        (self.f)(p).map_err(|reason| self.undefined(reason))
    }

    pub fn apply(&self, e: &Expr) -> Result<Expr, TranslationUndefined> {
        self.apply_context(&PExpr::from(e))?
            .to_term()
            .ok_or_else(|| self.undefined("result contains a hole".into()))
    }

    fn undefined(&self, reason: String) -> TranslationUndefined {
        TranslationUndefined {
            translation: self.name.clone(),
            reason,
        }
    }

    pub fn identity() -> Self {
        ProgramTranslation::new("identity", |p| Ok(p.clone()))
    }

    /// Replaces every `a or b` by `a`.
    pub fn left_commit() -> Self {
        ProgramTranslation::new("left-commit", |p| {
            Ok(bottom_up(p, &|t| match t {
                PExpr::Or(a, _) => *a,
                other => other,
            }))
        })
    }

    /// Replaces every `a or b` by `b`.
    pub fn right_commit() -> Self {
        ProgramTranslation::new("right-commit", |p| {
            Ok(bottom_up(p, &|t| match t {
                PExpr::Or(_, b) => *b,
                other => other,
            }))
        })
    }

    /// Drops `fail` alternatives: `fail or k` and `k or fail` become `k`.
    pub fn fail_elimination() -> Self {
        ProgramTranslation::new("fail-elimination", |p| {
            Ok(bottom_up(p, &|t| match t {
                PExpr::Or(a, b) if *a == PExpr::Fail => *b,
                PExpr::Or(a, b) if *b == PExpr::Fail => *a,
                other => other,
            }))
        })
    }

    /// Replaces every `fail` by the literal `n`. Not outcome-preserving.
    pub fn fail_to(n: i64) -> Self {
        ProgramTranslation::new(&format!("fail-to-{n}"), move |p| {
            Ok(bottom_up(p, &|t| match t {
                PExpr::Fail => PExpr::Int(n),
                other => other,
            }))
        })
    }

    /// Church-encodes integer literals, `add` and `mul`, then applies the
    /// whole program to a successor and zero so that a numeral result is
    /// decoded into a canonical data value (`\s. \z. s (…)`). The decoding
    /// wrapper sits at the root, so this translation is not a homomorphism.
    pub fn church_arithmetic() -> Self {
        ProgramTranslation::new("church-arithmetic", |p| {
            let encoded = church_encode(p)?;
            Ok(PExpr::app(
                PExpr::app(encoded, lift(&church::succ())),
                lift(&church::zero()),
            ))
        })
    }

    pub fn from_rewrites(name: &str, table: RewriteTable<i64>) -> Self {
        ProgramTranslation::new(name, move |p| table.apply(p).map_err(|e| e.to_string()))
    }
}

fn lift(e: &Expr) -> PExpr {
    PExpr::from(e)
}

fn bottom_up(p: &PExpr, f: &dyn Fn(PExpr) -> PExpr) -> PExpr {
    let rebuilt = match p {
        PExpr::Lam(x, b) => PExpr::lam(x.clone(), bottom_up(b, f)),
        PExpr::App(a, b) => PExpr::app(bottom_up(a, f), bottom_up(b, f)),
        PExpr::Or(a, b) => PExpr::or(bottom_up(a, f), bottom_up(b, f)),
        leaf => leaf.clone(),
    };
    f(rebuilt)
}

/// Largest integer the Church port encodes or decodes. Numerals are unary,
/// so bigger values make every later traversal proportionally deep.
pub const CHURCH_LIMIT: i64 = 1_000;

fn church_encode(p: &PExpr) -> Result<PExpr, String> {
    Ok(match p {
        PExpr::Int(n) if *n < 0 => {
            return Err(format!("negative literal {n} has no Church numeral"))
        }
        PExpr::Int(n) if *n > CHURCH_LIMIT => {
            return Err(format!(
                "literal {n} exceeds the numeral limit {CHURCH_LIMIT}"
            ))
        }
        PExpr::Int(n) => lift(&church::numeral(*n as u64)),
        PExpr::Prim(syntax::Prim::Add) => lift(&church::add()),
        PExpr::Prim(syntax::Prim::Mul) => lift(&church::mul()),
        PExpr::Prim(syntax::Prim::Halt) => return Err("halt has no Church encoding".into()),
        PExpr::Lam(x, b) => PExpr::lam(x.clone(), church_encode(b)?),
        PExpr::App(a, b) => PExpr::app(church_encode(a)?, church_encode(b)?),
        PExpr::Or(a, b) => PExpr::or(church_encode(a)?, church_encode(b)?),
        leaf => leaf.clone(),
    })
}

/// Church numerals and the data numerals used to read them back.
pub mod church {
    use std::sync::Arc;

    use crate::machine::Value;
    use crate::syntax::{parse_term, Name, Term};
    use crate::{Env, Expr, Outcome};

    fn name(s: &str) -> Name {
        Name::new(s).expect("fixed name")
    }

    /// `\f. \x. f (… (f x))` with `n` applications.
    pub fn numeral(n: u64) -> Expr {
        let f = || Term::Var(name("f"));
        let body = (0..n).fold(Term::Var(name("x")), |acc, _| Term::app(f(), acc));
        Term::lam(name("f"), Term::lam(name("x"), body))
    }

    pub fn add() -> Expr {
        parse_term("\\m. \\n. \\f. \\x. m f (n f x)").expect("fixed term")
    }

    pub fn mul() -> Expr {
        parse_term("\\m. \\n. \\f. m (n f)").expect("fixed term")
    }

    pub fn succ() -> Expr {
        parse_term("\\p. \\s. \\z. s p").expect("fixed term")
    }

    pub fn zero() -> Expr {
        parse_term("\\s. \\z. z").expect("fixed term")
    }

    /// The outcome `n succ zero` evaluates to.
    pub fn data_numeral(n: u64) -> Outcome {
        let zero = Value::Closure {
            param: name("s"),
            env: Env::empty(),
            body: Arc::new(parse_term("\\z. z").expect("fixed term")),
        };
        let step = Arc::new(parse_term("\\z. s p").expect("fixed term"));
        (0..n).fold(zero, |prev, _| Value::Closure {
            param: name("s"),
            env: Env::empty().extend(name("p"), prev),
            body: step.clone(),
        })
    }
}

/// The outcome half of a port (`translateoutcome`): maps source outcomes to
/// the target outcomes they should correspond to.
#[derive(Clone)]
pub struct OutcomeTranslation {
    name: String,
    f: Arc<OutcomeFn>,
}

impl fmt::Debug for OutcomeTranslation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OutcomeTranslation({})", self.name)
    }
}

impl OutcomeTranslation {
    pub fn new(
        name: &str,
        f: impl Fn(&Outcome) -> Result<Outcome, String> + Send + Sync + 'static,
    ) -> Self {
        OutcomeTranslation {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, v: &Outcome) -> Result<Outcome, TranslationUndefined> {
        (self.f)(v).map_err(|reason| TranslationUndefined {
            translation: self.name.clone(),
            reason,
        })
    }

    pub fn identity() -> Self {
        OutcomeTranslation::new("identity", |v| Ok(v.clone()))
    }

    /// Applies a program translation inside outcomes: to every closure body
    /// and, recursively, to the outcomes captured in closure environments
    /// and partial applications. Integers are unchanged. This is the outcome
    /// translation that matches a syntactic program translation when
    /// programs return functions whose bodies the translation rewrites.
    pub fn lifted(program: ProgramTranslation) -> Self {
        fn lift(t: &ProgramTranslation, v: &Outcome) -> Result<Outcome, String> {
            Ok(match v {
                machine::Value::Int(n) => machine::Value::Int(*n),
                machine::Value::Partial { op, args } => machine::Value::Partial {
                    op: *op,
                    args: args.iter().map(|a| lift(t, a)).collect::<Result<_, _>>()?,
                },
                machine::Value::Closure { param, env, body } => {
                    let env = env
                        .iter()
                        .map(|(x, w)| Ok((x.clone(), lift(t, w)?)))
                        .collect::<Result<machine::Env<i64>, String>>()?;
                    let body = (t.f)(&PExpr::from(&**body))?
                        .to_term()
                        .ok_or_else(|| "translated closure body contains a hole".to_string())?;
                    machine::Value::Closure {
                        param: param.clone(),
                        env,
                        body: Arc::new(body),
                    }
                }
            })
        }
        let name = format!("lifted {}", program.name());
        OutcomeTranslation::new(&name, move |v| lift(&program, v))
    }

    /// Integers in `0..=CHURCH_LIMIT` to the data numerals produced by
    /// [`ProgramTranslation::church_arithmetic`]. Undefined elsewhere.
    pub fn data_numerals() -> Self {
        OutcomeTranslation::new("data-numerals", |v| match v {
            machine::Value::Int(n) if (0..=CHURCH_LIMIT).contains(n) => {
                Ok(church::data_numeral(*n as u64))
            }
            other => Err(format!("{} is not a non-negative integer", readback(other))),
        })
    }
}

/// Names accepted by [`builtin_translations`].
pub const BUILTIN_PORTS: [&str; 6] = [
    "identity",
    "left-commit",
    "right-commit",
    "fail-elimination",
    "fail-to-99",
    "church-arithmetic",
];

pub fn builtin_translations(name: &str) -> Option<(ProgramTranslation, OutcomeTranslation)> {
    let lifted = |t: ProgramTranslation| (t.clone(), OutcomeTranslation::lifted(t));
    Some(match name {
        "identity" => (
            ProgramTranslation::identity(),
            OutcomeTranslation::identity(),
        ),
        "left-commit" => lifted(ProgramTranslation::left_commit()),
        "right-commit" => lifted(ProgramTranslation::right_commit()),
        "fail-elimination" => lifted(ProgramTranslation::fail_elimination()),
        "fail-to-99" => lifted(ProgramTranslation::fail_to(99)),
        "church-arithmetic" => (
            ProgramTranslation::church_arithmetic(),
            OutcomeTranslation::data_numerals(),
        ),
        _ => return None,
    })
}

#[derive(Clone, Debug)]
pub struct Port {
    pub name: String,
    pub source: Machine,
    pub target: Machine,
    pub program: ProgramTranslation,
    pub outcome: OutcomeTranslation,
}

impl Port {
    pub fn new(
        source: Machine,
        target: Machine,
        program: ProgramTranslation,
        outcome: OutcomeTranslation,
    ) -> Self {
        Port {
            name: program.name().to_string(),
            source,
            target,
            program,
            outcome,
        }
    }

    pub fn builtin(name: &str, source: Machine, target: Machine) -> Option<Port> {
        let (program, outcome) = builtin_translations(name)?;
        Some(Port::new(source, target, program, outcome))
    }

    /// The identity port over a single machine.
    pub fn identity(m: Machine) -> Port {
        Port::new(
            m.clone(),
            m,
            ProgramTranslation::identity(),
            OutcomeTranslation::identity(),
        )
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Equivalent,
    Consistent,
    ConsistentAndComplete,
    Inconsistent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equivalent => "equivalent",
            Verdict::Consistent => "consistent",
            Verdict::ConsistentAndComplete => "consistent-and-complete",
            Verdict::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CheckMode {
    Equivalence,
    Conventional,
    Kbs,
    Completeness,
    Homomorphism,
}

impl fmt::Display for CheckMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckMode::Equivalence => "equivalence",
            CheckMode::Conventional => "conventional consistency",
            CheckMode::Kbs => "KBS consistency",
            CheckMode::Completeness => "completeness",
            CheckMode::Homomorphism => "homomorphism",
        })
    }
}

/// One corpus item that did not pass.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Finding {
    pub index: usize,
    pub program: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Note {
    pub index: usize,
    pub program: String,
    pub reason: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CheckReport {
    pub mode: CheckMode,
    pub subject: String,
    pub corpus_size: usize,
    pub passed: usize,
    /// Counter-examples. Non-empty exactly when the verdict is inconsistent.
    pub failed: Vec<Finding>,
    /// Items where both sides were undefined (counted as passed).
    pub undefined_both: usize,
    /// Consistent items whose outcomes were not all preserved.
    pub incomplete: Vec<Finding>,
    /// Items where a translation was partial.
    pub untranslatable: Vec<Note>,
    /// Items cut off by a budget.
    pub inconclusive: Vec<Note>,
    pub verdict: Verdict,
}

impl CheckReport {
    /// Whether the report meets the bar of its mode: completeness needs
    /// consistent-and-complete, everything else needs no counter-example.
    pub fn passes(&self) -> bool {
        match self.mode {
            CheckMode::Completeness => self.verdict == Verdict::ConsistentAndComplete,
            _ => self.verdict != Verdict::Inconsistent,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} check: {}", self.mode, self.subject)?;
        writeln!(
            f,
            "corpus: {} programs, {} passed ({} undefined on both sides), {} failed",
            self.corpus_size,
            self.passed,
            self.undefined_both,
            self.failed.len()
        )?;
        for x in &self.failed {
            writeln!(
                f,
                "FAIL [{}] {}: expected {}, got {}",
                x.index, x.program, x.expected, x.actual
            )?;
        }
        for x in &self.incomplete {
            writeln!(
                f,
                "INCOMPLETE [{}] {}: expected {}, got {}",
                x.index, x.program, x.expected, x.actual
            )?;
        }
        for x in &self.untranslatable {
            writeln!(f, "UNDEFINED [{}] {}: {}", x.index, x.program, x.reason)?;
        }
        for x in &self.inconclusive {
            writeln!(f, "INCONCLUSIVE [{}] {}: {}", x.index, x.program, x.reason)?;
        }
        if self.mode == CheckMode::Completeness {
            writeln!(f, "(completeness is relative to this corpus)")?;
        }
        write!(f, "VERDICT: {}", self.verdict)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("corpus item {index} is not conventional")]
    NonConventional { index: usize },
    #[error("context {index} has {holes} holes; exactly one is required")]
    ContextHoles { index: usize, holes: usize },
}

enum ItemResult {
    Pass { undefined_both: bool },
    PassIncomplete(Finding),
    Fail(Finding),
    Untranslatable(Note),
    Inconclusive(Note),
}

fn assemble(
    mode: CheckMode,
    subject: String,
    programs: &[Expr],
    items: Vec<ItemResult>,
) -> CheckReport {
    let mut report = CheckReport {
        mode,
        subject,
        corpus_size: programs.len(),
        passed: 0,
        failed: Vec::new(),
        undefined_both: 0,
        incomplete: Vec::new(),
        untranslatable: Vec::new(),
        inconclusive: Vec::new(),
        verdict: Verdict::Consistent,
    };
    for item in items {
        match item {
            ItemResult::Pass { undefined_both } => {
                report.passed += 1;
                report.undefined_both += usize::from(undefined_both);
            }
            ItemResult::PassIncomplete(x) => {
                report.passed += 1;
                report.incomplete.push(x);
            }
            ItemResult::Fail(x) => report.failed.push(x),
            ItemResult::Untranslatable(n) => report.untranslatable.push(n),
            ItemResult::Inconclusive(n) => report.inconclusive.push(n),
        }
    }
    report.verdict = if !report.failed.is_empty() {
        Verdict::Inconsistent
    } else if mode == CheckMode::Equivalence {
        Verdict::Equivalent
    } else if report.incomplete.is_empty()
        && report.untranslatable.is_empty()
        && report.inconclusive.is_empty()
    {
        Verdict::ConsistentAndComplete
    } else {
        Verdict::Consistent
    };
    report
}

/// Worker stack size. Terms and readbacks are processed recursively, and a
/// corpus item may legitimately produce a deep (if not large) outcome.
const WORKER_STACK: usize = 256 << 20;

/// Maps `f` over the corpus in parallel, keeping corpus order.
fn per_item<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync + Send) -> Vec<R> {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    let pool = POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .stack_size(WORKER_STACK)
            .thread_name(|i| format!("kbsm-check-{i}"))
            .build()
            .expect("thread pool")
    });
    pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect())
}

fn search_budget(budget: u64) -> SearchBudget {
    SearchBudget::new(Strategy::Dfs, budget.max(1), budget.max(1))
}

fn show_set(keys: &BTreeMap<String, String>) -> String {
    let mut shown: Vec<&String> = keys.values().collect();
    shown.sort();
    let inner: Vec<&str> = shown.iter().map(|s| s.as_str()).collect();
    format!("{{{}}}", inner.join(", "))
}

/// α-key ↦ rendered readback.
fn keyed(values: impl IntoIterator<Item = Outcome>) -> BTreeMap<String, String> {
    values
        .into_iter()
        .map(|v| {
            let t = readback(&v);
            (alpha_key(&t), t.to_string())
        })
        .collect()
}

/// A defined conventional result: the outcome and whether it came from
/// `halt`.
fn defined(r: &EvalResult) -> Option<(String, String)> {
    let (v, halted) = match r {
        EvalResult::Value(v) => (v, false),
        EvalResult::Halted(v) => (v, true),
        _ => return None,
    };
    let t = readback(v);
    let shown = if halted {
        format!("HALTED {t}")
    } else {
        t.to_string()
    };
    Some((
        format!("{}{}", if halted { "!" } else { "" }, alpha_key(&t)),
        shown,
    ))
}

fn describe_run(r: &EvalResult) -> String {
    match r {
        EvalResult::Value(v) => readback(v).to_string(),
        EvalResult::Halted(v) => format!("HALTED {}", readback(v)),
        EvalResult::Stuck { reason, .. } => format!("undefined ({reason})"),
        EvalResult::Diverged(n) => format!("diverged after {n} steps"),
    }
}

/// Compares two conventional results under `≃`.
fn compare_runs(index: usize, program: &Expr, lhs: &EvalResult, rhs: &EvalResult) -> ItemResult {
    let too_large = |r: &EvalResult| {
        r.outcome()
            .is_some_and(|v| readback_size(v) > READBACK_LIMIT)
    };
    if too_large(lhs) || too_large(rhs) {
        return ItemResult::Inconclusive(Note {
            index,
            program: program.to_string(),
            reason: format!("outcome readback exceeds {READBACK_LIMIT} nodes"),
        });
    }
    if matches!(lhs, EvalResult::Diverged(_)) || matches!(rhs, EvalResult::Diverged(_)) {
        return ItemResult::Inconclusive(Note {
            index,
            program: program.to_string(),
            reason: format!(
                "budget exhausted: {} vs {}",
                describe_run(lhs),
                describe_run(rhs)
            ),
        });
    }
    let same = match (defined(lhs), defined(rhs)) {
        (None, None) => {
            return ItemResult::Pass {
                undefined_both: true,
            }
        }
        (Some((a, _)), Some((b, _))) => a == b,
        _ => false,
    };
    if same {
        ItemResult::Pass {
            undefined_both: false,
        }
    } else {
        ItemResult::Fail(Finding {
            index,
            program: program.to_string(),
            expected: describe_run(lhs),
            actual: describe_run(rhs),
        })
    }
}

fn set_pair_result(
    index: usize,
    program: &Expr,
    expected: &OutcomeSet,
    actual: &OutcomeSet,
    equal_needed: bool,
) -> ItemResult {
    if !expected.complete || !actual.complete {
        return ItemResult::Inconclusive(Note {
            index,
            program: program.to_string(),
            reason: format!(
                "enumeration truncated (source {}, target {})",
                expected.diagnostics, actual.diagnostics
            ),
        });
    }
    let (e, a) = (
        keyed(expected.values.iter().cloned()),
        keyed(actual.values.iter().cloned()),
    );
    let finding = || Finding {
        index,
        program: program.to_string(),
        expected: show_set(&e),
        actual: show_set(&a),
    };
    let (ek, ak): (BTreeSet<_>, BTreeSet<_>) = (e.keys().collect(), a.keys().collect());
    if equal_needed {
        if ek == ak {
            ItemResult::Pass {
                undefined_both: e.is_empty(),
            }
        } else {
            ItemResult::Fail(finding())
        }
    } else if !ak.is_subset(&ek) {
        ItemResult::Fail(finding())
    } else if ak == ek {
        ItemResult::Pass {
            undefined_both: false,
        }
    } else {
        ItemResult::PassIncomplete(finding())
    }
}

/// `eval(M1) ≃ eval(M2)` over the corpus. Conventional programs are run
/// deterministically; KBS programs compare outcome sets.
pub fn check_equivalence(m1: &Machine, m2: &Machine, corpus: &[Expr], budget: u64) -> CheckReport {
    let items = per_item(corpus, |i, e| {
        if is_conventional(e) {
            let lhs = machine::run(m1, e, budget).expect("conventional");
            let rhs = machine::run(m2, e, budget).expect("conventional");
            compare_runs(i, e, &lhs, &rhs)
        } else {
            let sb = search_budget(budget);
            set_pair_result(i, e, &eval_nd(m1, e, &sb), &eval_nd(m2, e, &sb), true)
        }
    });
    assemble(
        CheckMode::Equivalence,
        format!("{m1} vs {m2}"),
        corpus,
        items,
    )
}

fn port_subject(port: &Port) -> String {
    format!(
        "port {} ({} -> {}, outcomes via {})",
        port.name,
        port.source,
        port.target,
        port.outcome.name()
    )
}

fn untranslatable(index: usize, program: &Expr, err: TranslationUndefined) -> ItemResult {
    ItemResult::Untranslatable(Note {
        index,
        program: program.to_string(),
        reason: err.to_string(),
    })
}

fn conventional_item(port: &Port, index: usize, e: &Expr, budget: u64) -> ItemResult {
    let translated = match port.program.apply(e) {
        Ok(t) => t,
        Err(err) => return untranslatable(index, e, err),
    };
    let lhs = machine::run(&port.source, e, budget).expect("conventional");
    let lhs = match lhs {
        EvalResult::Value(v) => match port.outcome.apply(&v) {
            Ok(v) => EvalResult::Value(v),
            Err(err) => return untranslatable(index, e, err),
        },
        EvalResult::Halted(v) => match port.outcome.apply(&v) {
            Ok(v) => EvalResult::Halted(v),
            Err(err) => return untranslatable(index, e, err),
        },
        other => other,
    };
    let rhs = match machine::run(&port.target, &translated, budget) {
        Ok(r) => r,
        Err(_) => {
            return untranslatable(
                index,
                e,
                TranslationUndefined {
                    translation: port.program.name().to_string(),
                    reason: "produced a non-conventional program".into(),
                },
            )
        }
    };
    compare_runs(index, e, &lhs, &rhs)
}

fn kbs_item(port: &Port, index: usize, k: &Expr, budget: u64, equal_needed: bool) -> ItemResult {
    let translated = match port.program.apply(k) {
        Ok(t) => t,
        Err(err) => return untranslatable(index, k, err),
    };
    let sb = search_budget(budget);
    let source = eval_nd(&port.source, k, &sb);
    let mut mapped = Vec::with_capacity(source.len());
    for v in &source.values {
        match port.outcome.apply(v) {
            Ok(w) => mapped.push(w),
            Err(err) => return untranslatable(index, k, err),
        }
    }
    let expected = OutcomeSet {
        values: mapped,
        complete: source.complete,
        diagnostics: source.diagnostics,
    };
    let actual = eval_nd(&port.target, &translated, &sb);
    set_pair_result(index, k, &expected, &actual, equal_needed)
}

/// Conventional consistency: `translateoutcome ∘ eval(M1) ≃ eval(M2) ∘
/// translateprogram` on every corpus program.
pub fn check_consistency_conventional(
    port: &Port,
    corpus: &[Expr],
    budget: u64,
) -> Result<CheckReport, CheckError> {
    if let Some(index) = corpus.iter().position(|e| !is_conventional(e)) {
        return Err(CheckError::NonConventional { index });
    }
    let items = per_item(corpus, |i, e| conventional_item(port, i, e, budget));
    Ok(assemble(
        CheckMode::Conventional,
        port_subject(port),
        corpus,
        items,
    ))
}

/// KBS consistency: the target's outcome set must be a subset of the
/// translated source outcome set. Truncated enumerations are inconclusive.
pub fn check_consistency_kbs(port: &Port, corpus: &[Expr], budget: u64) -> CheckReport {
    let items = per_item(corpus, |i, k| kbs_item(port, i, k, budget, false));
    assemble(CheckMode::Kbs, port_subject(port), corpus, items)
}

/// Consistency plus totality of both translations on the corpus; for KBS
/// programs the outcome sets must be equal.
pub fn check_completeness(port: &Port, corpus: &[Expr], budget: u64) -> CheckReport {
    let items = per_item(corpus, |i, e| {
        if is_conventional(e) {
            conventional_item(port, i, e, budget)
        } else {
            kbs_item(port, i, e, budget, false)
        }
    });
    assemble(CheckMode::Completeness, port_subject(port), corpus, items)
}

/// Checks `t(p(e)) = t(p)(t(e))` structurally for every context/filler pair.
pub fn check_homomorphism(
    t: &ProgramTranslation,
    contexts: &[PExpr],
    fillers: &[Expr],
) -> Result<CheckReport, CheckError> {
    for (index, p) in contexts.iter().enumerate() {
        let holes = hole_count(p);
        if holes != 1 {
            return Err(CheckError::ContextHoles { index, holes });
        }
    }
    let pairs: Vec<(&PExpr, &Expr)> = contexts
        .iter()
        .flat_map(|p| fillers.iter().map(move |e| (p, e)))
        .collect();
    let programs: Vec<Expr> = pairs.iter().map(|(p, e)| fill(p, e)).collect();
    let items = per_item(&pairs, |i, (p, e)| {
        let whole = &programs[i];
        let direct = t.apply(whole);
        let composed = t
            .apply_context(p)
            .and_then(|tp| t.apply(e).map(|te| fill(&tp, &te)));
        match (direct, composed) {
            (Ok(a), Ok(b)) if a == b => ItemResult::Pass {
                undefined_both: false,
            },
            (Ok(a), Ok(b)) => ItemResult::Fail(Finding {
                index: i,
                program: format!("{p} with {e}"),
                expected: a.to_string(),
                actual: b.to_string(),
            }),
            (Err(err), _) | (_, Err(err)) => untranslatable(i, whole, err),
        }
    });
    let mut report = assemble(
        CheckMode::Homomorphism,
        format!("translation {}", t.name()),
        &programs,
        items,
    );
    if report.verdict == Verdict::ConsistentAndComplete {
        report.verdict = Verdict::Consistent;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Corpus files

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("corpus line {line}: {error}")]
pub struct CorpusError {
    pub line: usize,
    pub error: SyntaxError,
}

/// Parses a corpus. Blocks are separated by blank lines and `#` starts a
/// comment. Within a block, if every line parses on its own each line is a
/// program; otherwise the whole block is one program.
pub fn parse_corpus(text: &str) -> Result<Vec<Expr>, CorpusError> {
    let mut blocks: Vec<Vec<(usize, &str)>> = vec![Vec::new()];
    for (i, raw) in text.lines().enumerate() {
        let code = raw.split('#').next().unwrap_or("");
        if code.trim().is_empty() {
            if raw.trim().is_empty() && !blocks.last().expect("non-empty").is_empty() {
                blocks.push(Vec::new());
            }
            continue;
        }
        blocks.last_mut().expect("non-empty").push((i + 1, code));
    }
    let mut out = Vec::new();
    for block in blocks.into_iter().filter(|b| !b.is_empty()) {
        let per_line: Result<Vec<Expr>, _> = block.iter().map(|(_, l)| parse_term(l)).collect();
        match per_line {
            Ok(progs) => out.extend(progs),
            Err(_) => {
                let joined: Vec<&str> = block.iter().map(|(_, l)| *l).collect();
                let first = block[0].0;
                let e = parse_term(&joined.join("\n")).map_err(|error| {
                    let line = match &error {
                        SyntaxError::Malformed { line, .. }
                        | SyntaxError::HoleNotAllowed { line, .. } => first + line - 1,
                        SyntaxError::InvalidName(_) => first,
                    };
                    CorpusError { line, error }
                })?;
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// Builds an environment-free corpus check helper for callers that only
/// have names.
pub fn port_by_name(name: &str, source: &str, target: &str) -> Result<Port, String> {
    let source = Machine::by_name(source).map_err(|e| e.to_string())?;
    let target = Machine::by_name(target).map_err(|e| e.to_string())?;
    Port::builtin(name, source, target).ok_or_else(|| {
        format!(
            "unknown port `{name}` (known: {})",
            BUILTIN_PORTS.join(", ")
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn t(s: &str) -> Expr {
        parse_term(s).unwrap()
    }

    fn corpus(items: &[&str]) -> Vec<Expr> {
        items.iter().map(|s| t(s)).collect()
    }

    fn arith_port(name: &str) -> Port {
        Port::builtin(name, Machine::arith(), Machine::arith()).unwrap()
    }

    #[test]
    fn equivalence_examples() {
        let c = corpus(&["add 1 2", "(\\x. x) 4"]);
        let same = check_equivalence(&Machine::arith(), &Machine::arith(), &c, 1000);
        assert_eq!(same.verdict, Verdict::Equivalent);
        let diff = check_equivalence(
            &Machine::arith(),
            &Machine::base(),
            &corpus(&["add 1 2"]),
            1000,
        );
        assert_eq!(diff.verdict, Verdict::Inconsistent);
        let empty = check_equivalence(&Machine::arith(), &Machine::base(), &[], 1000);
        assert_eq!((empty.verdict, empty.corpus_size), (Verdict::Equivalent, 0));
    }

    #[test]
    fn both_undefined_agree() {
        let r = check_equivalence(
            &Machine::arith(),
            &Machine::arith(),
            &corpus(&["x", "1 2"]),
            100,
        );
        assert_eq!(r.verdict, Verdict::Equivalent);
        assert_eq!(r.undefined_both, 2);
    }

    #[test]
    fn divergence_is_inconclusive() {
        let r = check_equivalence(
            &Machine::arith(),
            &Machine::arith(),
            &corpus(&["(\\x. x x) (\\x. x x)"]),
            100,
        );
        assert_eq!(r.inconclusive.len(), 1);
        assert!(r.failed.is_empty());
    }

    #[test]
    fn conventional_examples() {
        let c = corpus(&["add 1 2", "\\x. x", "mul 3 (add 1 1)"]);
        let id = Port::identity(Machine::arith());
        assert_eq!(
            check_consistency_conventional(&id, &c, 1000)
                .unwrap()
                .verdict,
            Verdict::ConsistentAndComplete
        );
        let zero = Port::new(
            Machine::arith(),
            Machine::arith(),
            ProgramTranslation::new("const-0", |_| Ok(PExpr::Int(0))),
            OutcomeTranslation::identity(),
        );
        let r = check_consistency_conventional(&zero, &corpus(&["add 1 2"]), 1000).unwrap();
        assert_eq!(r.verdict, Verdict::Inconsistent);
        assert_eq!(r.failed[0].expected, "3");
        assert_eq!(r.failed[0].actual, "0");
        assert!(matches!(
            check_consistency_conventional(&id, &corpus(&["1 or 2"]), 10),
            Err(CheckError::NonConventional { index: 0 })
        ));
    }

    #[test]
    fn church_port_decodes_numerals() {
        let port = Port::builtin("church-arithmetic", Machine::arith(), Machine::base()).unwrap();
        let c = corpus(&["add 1 2", "mul 2 3", "0", "(\\x. add x x) 4"]);
        let r = check_consistency_conventional(&port, &c, 100_000).unwrap();
        assert_eq!(r.verdict, Verdict::ConsistentAndComplete, "{r}");
        let big = check_consistency_conventional(
            &port,
            &corpus(&["mul 1000 1", "mul 100 11"]),
            1_000_000,
        )
        .unwrap();
        assert_eq!(big.passed, 1, "{big}");
        assert_eq!(big.untranslatable.len(), 1);
        let r = check_consistency_conventional(&port, &corpus(&["\\x. x"]), 1000).unwrap();
        assert_eq!(r.untranslatable.len(), 1);
        assert_eq!(r.verdict, Verdict::Consistent);
    }

    #[test]
    fn kbs_examples() {
        let lc = arith_port("left-commit");
        let r = check_consistency_kbs(&lc, &corpus(&["1 or 2"]), 10_000);
        assert_eq!(r.verdict, Verdict::Consistent);
        assert_eq!(r.incomplete[0].expected, "{1, 2}");
        assert_eq!(r.incomplete[0].actual, "{1}");
        let id = Port::identity(Machine::arith());
        assert_eq!(
            check_consistency_kbs(&id, &corpus(&["1 or 2", "fail"]), 10_000).verdict,
            Verdict::ConsistentAndComplete
        );
        let f99 = arith_port("fail-to-99");
        let r = check_consistency_kbs(&f99, &corpus(&["fail or 1"]), 10_000);
        assert_eq!(r.verdict, Verdict::Inconsistent);
        assert_eq!(r.failed[0].actual, "{1, 99}");
    }

    #[test]
    fn completeness_examples() {
        let lc = arith_port("left-commit");
        let r = check_completeness(&lc, &corpus(&["1 or 2"]), 10_000);
        assert_eq!(r.verdict, Verdict::Consistent);
        assert!(!r.passes());
        let id = Port::identity(Machine::arith());
        assert!(check_completeness(&id, &corpus(&["1 or 2", "add 1 2"]), 10_000).passes());
        let fe = arith_port("fail-elimination");
        assert!(
            check_completeness(&fe, &corpus(&["fail or 1", "2 or fail", "fail"]), 10_000).passes()
        );
    }

    #[test]
    fn homomorphism_examples() {
        let contexts = vec![parse("_ 1", true).unwrap()];
        let fillers = corpus(&["2 or 3"]);
        let r =
            check_homomorphism(&ProgramTranslation::left_commit(), &contexts, &fillers).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        let r = check_homomorphism(&ProgramTranslation::identity(), &contexts, &fillers).unwrap();
        assert_eq!(r.passed, 1);
        let size_dependent = ProgramTranslation::new("swap-if-large", |p| {
            let term = p.to_term();
            let large = term.is_some_and(|t| t.size() >= 4);
            Ok(match (large, p) {
                (true, PExpr::App(f, a)) => PExpr::App(a.clone(), f.clone()),
                _ => p.clone(),
            })
        });
        let r = check_homomorphism(
            &size_dependent,
            &[parse("f _", true).unwrap()],
            &corpus(&["g x"]),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Inconsistent);
        assert!(matches!(
            check_homomorphism(
                &ProgramTranslation::identity(),
                &[parse("_ _", true).unwrap()],
                &fillers
            ),
            Err(CheckError::ContextHoles { holes: 2, .. })
        ));
    }

    #[test]
    fn rewrite_table_ports() {
        let table = RewriteTable::parse("fail => 99").unwrap();
        let port = Port::new(
            Machine::arith(),
            Machine::arith(),
            ProgramTranslation::from_rewrites("table", table),
            OutcomeTranslation::identity(),
        );
        assert_eq!(
            check_consistency_kbs(&port, &corpus(&["fail or 1"]), 1000).verdict,
            Verdict::Inconsistent
        );
    }

    #[test]
    fn corpus_files() {
        let text = "# arithmetic\nadd 1 2\n1 or 2\n\n\\x.\n  x\n\n# trailing comment\n";
        let c = parse_corpus(text).unwrap();
        assert_eq!(c, corpus(&["add 1 2", "1 or 2", "\\x. x"]));
        let err = parse_corpus("1\n\n(x\ny").unwrap_err();
        assert_eq!(err.line, 4);
    }
}
