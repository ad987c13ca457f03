//! The deterministic call-by-value SECD machine and a substitution-based
//! oracle evaluator used to cross-check it.
//!
//! The five base rules, with the argument evaluated before the function:
//!
//! ```text
//! (s, b, i :: c, d)                    ->  (b(i) :: s, b, c, d)
//! (s, b, \i.e :: c, d)                 ->  (<i, b, e> :: s, b, c, d)
//! (s, b, (e1 e2) :: c, d)              ->  (s, b, e2 :: e1 :: @ :: c, d)
//! (<i, b1, e> :: v :: s, b2, @ :: c, d) ->  ([], b1[i := v], [e], (s, b2, c, d))
//! (v :: _, _, [], (s, b, c, d))        ->  (v :: s, b, c, d)
//! ```
//!
//! Extensions (enabled per [`Machine`]) add integer literals, curried
//! `add`/`mul`, and `halt`, which aborts the whole computation with its
//! argument as the result.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::int::Integer;
use crate::syntax::{self, alpha_eq, is_conventional, Name, Prim, Term};

/// Optional machine features. `Base` is always present.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Feature {
    Base,
    Integers,
    Arith,
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("unknown machine `{0}` (expected `base` or `arith`)")]
    UnknownMachine(String),
    #[error("feature arith requires feature integers")]
    ArithWithoutIntegers,
    #[error("program is not conventional (contains `or` or `fail`)")]
    NonConventional,
    #[error("machine `{machine}` does not support {construct}")]
    Unsupported { machine: String, construct: String },
}

/// A machine definition: a name plus the set of enabled features, which
/// together determine the transition function.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Machine {
    id: String,
    features: BTreeSet<Feature>,
}

impl Machine {
    pub fn new(
        id: &str,
        features: impl IntoIterator<Item = Feature>,
    ) -> Result<Machine, MachineError> {
        let mut features: BTreeSet<Feature> = features.into_iter().collect();
        features.insert(Feature::Base);
        if features.contains(&Feature::Arith) && !features.contains(&Feature::Integers) {
            return Err(MachineError::ArithWithoutIntegers);
        }
        Ok(Machine {
            id: id.to_string(),
            features,
        })
    }

    /// The pure λ-calculus machine: closures are the only outcomes.
    pub fn base() -> Machine {
        Machine::new("base", []).expect("valid feature set")
    }

    /// Base plus integers, `add`, `mul` and `halt`.
    pub fn arith() -> Machine {
        Machine::new("arith", [Feature::Integers, Feature::Arith, Feature::Halt])
            .expect("valid feature set")
    }

    pub fn by_name(name: &str) -> Result<Machine, MachineError> {
        match name {
            "base" => Ok(Machine::base()),
            "arith" => Ok(Machine::arith()),
            other => Err(MachineError::UnknownMachine(other.to_string())),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn has(&self, feature: Feature) -> bool {
        self.features.contains(&feature)
    }

    pub fn features(&self) -> impl Iterator<Item = Feature> + '_ {
        self.features.iter().copied()
    }

    fn supports_prim(&self, op: Prim) -> bool {
        match op {
            Prim::Add | Prim::Mul => self.has(Feature::Arith),
            Prim::Halt => self.has(Feature::Halt),
        }
    }

    /// Checks that every construct in `e` is one this machine has rules for.
    /// `or` and `fail` are accepted: they are handled by the
    /// non-deterministic lifting of any machine.
    pub fn check_program<N: Integer>(&self, e: &Term<N>) -> Result<(), MachineError> {
        let unsupported = |construct: String| MachineError::Unsupported {
            machine: self.id.clone(),
            construct,
        };
        match e {
            Term::Int(n) if !self.has(Feature::Integers) => {
                Err(unsupported(format!("integer literal {n}")))
            }
            Term::Prim(op) if !self.supports_prim(*op) => {
                Err(unsupported(format!("primitive {op}")))
            }
            Term::Lam(_, b) => self.check_program(b),
            Term::App(a, b) | Term::Or(a, b) => {
                self.check_program(a)?;
                self.check_program(b)
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Bindings from names to outcomes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Env<N>(Arc<BTreeMap<Name, Value<N>>>);

impl<N: Clone> Env<N> {
    pub fn empty() -> Self {
        Env(Arc::new(BTreeMap::new()))
    }

    pub fn lookup(&self, x: &Name) -> Option<&Value<N>> {
        self.0.get(x)
    }

    /// `b ⊕ (x ↦ v)`.
    pub fn extend(&self, x: Name, v: Value<N>) -> Self {
        let mut map = (*self.0).clone();
        map.insert(x, v);
        Env(Arc::new(map))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Value<N>)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<N: Clone> FromIterator<(Name, Value<N>)> for Env<N> {
    fn from_iter<I: IntoIterator<Item = (Name, Value<N>)>>(iter: I) -> Self {
        Env(Arc::new(iter.into_iter().collect()))
    }
}

/// A machine outcome.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Value<N> {
    Closure {
        param: Name,
        env: Env<N>,
        body: Arc<Term<N>>,
    },
    Int(N),
    /// A primitive that has received fewer arguments than its arity.
    Partial {
        op: Prim,
        args: Vec<Value<N>>,
    },
}

/// An entry on the control list: a program to evaluate or the apply
/// instruction `@`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Control<N> {
    Term(Arc<Term<N>>),
    Apply,
}

/// The `(s, b, c, d)` quadruple.
///
/// `stack` and `control` are stored with their head at the *end* of the
/// vector. Use [`MachineState::from_parts`] to build a state from head-first
/// lists as the rules are written.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MachineState<N> {
    pub stack: Vec<Value<N>>,
    pub env: Env<N>,
    pub control: Vec<Control<N>>,
    pub dump: Option<Arc<MachineState<N>>>,
}

impl<N: Clone> MachineState<N> {
    /// Builds a state from head-first stack and control lists.
    pub fn from_parts(
        stack: Vec<Value<N>>,
        env: Env<N>,
        control: Vec<Control<N>>,
        dump: Option<MachineState<N>>,
    ) -> Self {
        MachineState {
            stack: stack.into_iter().rev().collect(),
            env,
            control: control.into_iter().rev().collect(),
            dump: dump.map(Arc::new),
        }
    }

    pub fn stack_head(&self) -> Option<&Value<N>> {
        self.stack.last()
    }

    pub fn control_head(&self) -> Option<&Control<N>> {
        self.control.last()
    }

    pub fn dump_depth(&self) -> usize {
        let mut depth = 0;
        let mut d = self.dump.as_deref();
        while let Some(next) = d {
            depth += 1;
            d = next.dump.as_deref();
        }
        depth
    }

    /// Control empty and no dump.
    pub fn is_terminal(&self) -> bool {
        self.control.is_empty() && self.dump.is_none()
    }
}

/// Loads a conventional program with an empty environment.
pub fn load<N: Integer>(e: &Term<N>) -> Result<MachineState<N>, MachineError> {
    load_with(e, Env::empty())
}

pub fn load_with<N: Integer>(e: &Term<N>, env: Env<N>) -> Result<MachineState<N>, MachineError> {
    if !is_conventional(e) {
        return Err(MachineError::NonConventional);
    }
    Ok(initial_state(e, env))
}

/// `([], env, [e], none)` with no conventionality check.
pub(crate) fn initial_state<N: Integer>(e: &Term<N>, env: Env<N>) -> MachineState<N> {
    MachineState {
        stack: Vec::new(),
        env,
        control: vec![Control::Term(Arc::new(e.clone()))],
        dump: None,
    }
}

/// The result of one transition attempt.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Step<N> {
    Next(MachineState<N>),
    /// The state is terminal; carries the unloaded outcome.
    Terminal(Value<N>),
    StuckAt(String),
    /// `halt` received its argument.
    Halted(Value<N>),
}

/// One transition. At most one rule applies to any state.
pub fn step<N: Integer>(m: &Machine, s: &MachineState<N>) -> Step<N> {
    let Some(head) = s.control.last() else {
        return match &s.dump {
            None => match s.stack.last() {
                Some(v) => Step::Terminal(v.clone()),
                None => Step::StuckAt("terminal state with an empty stack".into()),
            },
            Some(d) => match s.stack.last() {
                // return: (v :: _, _, [], (s, b, c, d)) -> (v :: s, b, c, d)
                Some(v) => {
                    let mut resumed = (**d).clone();
                    resumed.stack.push(v.clone());
                    Step::Next(resumed)
                }
                None => Step::StuckAt("return with an empty stack".into()),
            },
        };
    };
    let mut next = s.clone();
    next.control.pop();
    match head {
        Control::Term(t) => match &**t {
            Term::Var(x) => match s.env.lookup(x) {
                Some(v) => {
                    next.stack.push(v.clone());
                    Step::Next(next)
                }
                None => Step::StuckAt(format!("unbound variable {x}")),
            },
            Term::Lam(x, body) => {
                next.stack.push(Value::Closure {
                    param: x.clone(),
                    env: s.env.clone(),
                    body: body.clone(),
                });
                Step::Next(next)
            }
            Term::App(fun, arg) => {
                next.control.push(Control::Apply);
                next.control.push(Control::Term(fun.clone()));
                next.control.push(Control::Term(arg.clone()));
                Step::Next(next)
            }
            Term::Int(n) => {
                if !m.has(Feature::Integers) {
                    return Step::StuckAt(format!(
                        "integer literal {n} unsupported by machine {}",
                        m.id
                    ));
                }
                next.stack.push(Value::Int(n.clone()));
                Step::Next(next)
            }
            Term::Prim(op) => {
                if !m.supports_prim(*op) {
                    return Step::StuckAt(format!(
                        "primitive {op} unsupported by machine {}",
                        m.id
                    ));
                }
                next.stack.push(Value::Partial {
                    op: *op,
                    args: Vec::new(),
                });
                Step::Next(next)
            }
            Term::Or(..) => Step::StuckAt("`or` in a deterministic machine".into()),
            Term::Fail => Step::StuckAt("`fail` in a deterministic machine".into()),
        },
        Control::Apply => {
            let (Some(f), Some(v)) = (next.stack.pop(), next.stack.pop()) else {
                return Step::StuckAt("apply with fewer than two stack entries".into());
            };
            match f {
                Value::Closure { param, env, body } => Step::Next(MachineState {
                    stack: Vec::new(),
                    env: env.extend(param, v),
                    control: vec![Control::Term(body)],
                    dump: Some(Arc::new(next)),
                }),
                Value::Partial { op, mut args } => {
                    args.push(v);
                    if args.len() < op.arity() {
                        next.stack.push(Value::Partial { op, args });
                        return Step::Next(next);
                    }
                    match apply_prim(op, args) {
                        Ok(PrimResult::Value(r)) => {
                            next.stack.push(r);
                            Step::Next(next)
                        }
                        Ok(PrimResult::Halt(v)) => Step::Halted(v),
                        Err(reason) => Step::StuckAt(reason),
                    }
                }
                Value::Int(n) => Step::StuckAt(format!("cannot apply integer {n}")),
            }
        }
    }
}

enum PrimResult<N> {
    Value(Value<N>),
    Halt(Value<N>),
}

fn apply_prim<N: Integer>(op: Prim, mut args: Vec<Value<N>>) -> Result<PrimResult<N>, String> {
    if op == Prim::Halt {
        return Ok(PrimResult::Halt(args.pop().expect("arity 1")));
    }
    let (Value::Int(a), Value::Int(b)) = (&args[0], &args[1]) else {
        return Err(format!("{op} applied to a non-integer"));
    };
    let r = match op {
        Prim::Add => a.checked_add(b),
        Prim::Mul => a.checked_mul(b),
        Prim::Halt => unreachable!(),
    };
    r.map(|n| PrimResult::Value(Value::Int(n)))
        .ok_or_else(|| format!("integer overflow in {op}"))
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EvalResult<N> {
    Value(Value<N>),
    Diverged(u64),
    Stuck {
        state: MachineState<N>,
        reason: String,
    },
    Halted(Value<N>),
}

impl<N> EvalResult<N> {
    /// `Value` or `Halted`.
    pub fn outcome(&self) -> Option<&Value<N>> {
        match self {
            EvalResult::Value(v) | EvalResult::Halted(v) => Some(v),
            _ => None,
        }
    }
}

/// Loads `e`, runs until a final classification or until `budget`
/// transitions have been made.
pub fn run<N: Integer>(
    m: &Machine,
    e: &Term<N>,
    budget: u64,
) -> Result<EvalResult<N>, MachineError> {
    let s = load(e)?;
    Ok(run_state(m, s, budget, |_| {}))
}

fn run_state<N: Integer>(
    m: &Machine,
    mut s: MachineState<N>,
    budget: u64,
    mut observe: impl FnMut(&MachineState<N>),
) -> EvalResult<N> {
    let mut used = 0;
    observe(&s);
    loop {
        match step(m, &s) {
            Step::Terminal(v) => return EvalResult::Value(v),
            Step::Halted(v) => return EvalResult::Halted(v),
            Step::StuckAt(reason) => return EvalResult::Stuck { state: s, reason },
            Step::Next(n) => {
                if used == budget {
                    return EvalResult::Diverged(used);
                }
                used += 1;
                s = n;
                observe(&s);
            }
        }
    }
}

/// A calculation: the state sequence together with its classification.
#[derive(Clone, Debug)]
pub struct Calculation<N> {
    pub states: Vec<MachineState<N>>,
    pub result: EvalResult<N>,
}

pub fn trace<N: Integer>(
    m: &Machine,
    e: &Term<N>,
    budget: u64,
) -> Result<Calculation<N>, MachineError> {
    let s = load(e)?;
    let mut states = Vec::new();
    let result = run_state(m, s, budget, |st| states.push(st.clone()));
    Ok(Calculation { states, result })
}

// ---------------------------------------------------------------------------
// Readback

/// Converts an outcome to a term. Closure environments are substituted into
/// the body (capture-avoiding); partial primitives become curried
/// applications.
pub fn readback<N: Integer>(v: &Value<N>) -> Term<N> {
    match v {
        Value::Int(n) => Term::Int(n.clone()),
        Value::Partial { op, args } => args
            .iter()
            .fold(Term::Prim(*op), |f, a| Term::app(f, readback(a))),
        Value::Closure { param, env, body } => {
            let fv = syntax::free_vars(body);
            let map: BTreeMap<Name, Term<N>> = env
                .iter()
                .filter(|(x, _)| *x != param && fv.contains(*x))
                .map(|(x, v)| (x.clone(), readback(v)))
                .collect();
            Term::lam(param.clone(), syntax::substitute(body, &map))
        }
    }
}

/// Readbacks with more nodes than this are not built: closure environments
/// share values, so a readback can be exponentially larger than its value.
pub const READBACK_LIMIT: usize = 100_000;

/// Node count of `readback(v)`, computed without building it. Saturates.
pub fn readback_size<N: Integer>(v: &Value<N>) -> usize {
    fn free_occurrences<N>(e: &Term<N>, bound: &mut Vec<Name>, out: &mut BTreeMap<Name, usize>) {
        match e {
            Term::Var(x) if !bound.contains(x) => *out.entry(x.clone()).or_default() += 1,
            Term::Lam(x, b) => {
                bound.push(x.clone());
                free_occurrences(b, bound, out);
                bound.pop();
            }
            Term::App(a, b) | Term::Or(a, b) => {
                free_occurrences(a, bound, out);
                free_occurrences(b, bound, out);
            }
            _ => {}
        }
    }
    fn go<N: Integer>(v: &Value<N>, memo: &mut HashMap<*const Value<N>, usize>) -> usize {
        if let Some(&n) = memo.get(&(v as *const _)) {
            return n;
        }
        let n =
            match v {
                Value::Int(_) => 1,
                Value::Partial { args, .. } => args.iter().fold(1usize, |acc, a| {
                    acc.saturating_add(1).saturating_add(go(a, memo))
                }),
                Value::Closure { param, env, body } => {
                    let mut occurrences = BTreeMap::new();
                    free_occurrences(body, &mut vec![param.clone()], &mut occurrences);
                    occurrences.iter().fold(
                        1usize.saturating_add(body.size()),
                        |acc, (x, &count)| match env.lookup(x) {
                            Some(w) => acc.saturating_add(count.saturating_mul(go(w, memo) - 1)),
                            None => acc,
                        },
                    )
                }
            };
        memo.insert(v as *const _, n);
        n
    }
    go(v, &mut HashMap::new())
}

/// `readback(v)` if it has at most `limit` nodes.
pub fn readback_within<N: Integer>(v: &Value<N>, limit: usize) -> Option<Term<N>> {
    (readback_size(v) <= limit).then(|| readback(v))
}

/// α-equivalence of readbacks.
pub fn same_outcome<N: Integer>(a: &Value<N>, b: &Value<N>) -> bool {
    alpha_eq(&readback(a), &readback(b))
}

// ---------------------------------------------------------------------------
// Oracle

/// Result of the oracle evaluator; values are terms.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum OracleResult<N> {
    Value(Term<N>),
    Diverged(u64),
    Stuck(String),
    Halted(Term<N>),
}

enum Abort<N> {
    Diverged,
    Stuck(String),
    Halted(Term<N>),
}

struct Oracle {
    budget: u64,
    used: u64,
}

/// An oracle value: a λ, an integer, or a primitive with its collected
/// arguments.
fn prim_spine<N>(t: &Term<N>) -> Option<(Prim, Vec<&Term<N>>)> {
    match t {
        Term::Prim(op) => Some((*op, Vec::new())),
        Term::App(f, a) => {
            let (op, mut args) = prim_spine(f)?;
            args.push(a);
            Some((op, args))
        }
        _ => None,
    }
}

impl Oracle {
    fn tick<N>(&mut self) -> Result<(), Abort<N>> {
        if self.used == self.budget {
            return Err(Abort::Diverged);
        }
        self.used += 1;
        Ok(())
    }

    fn eval<N: Integer>(&mut self, e: &Term<N>) -> Result<Term<N>, Abort<N>> {
        let mut e = e.clone();
        loop {
            match &e {
                Term::Var(x) => return Err(Abort::Stuck(format!("unbound variable {x}"))),
                Term::Lam(..) | Term::Int(_) | Term::Prim(_) => return Ok(e),
                Term::Or(..) | Term::Fail => {
                    return Err(Abort::Stuck("non-conventional program".into()))
                }
                Term::App(f, a) => {
                    let arg = self.eval(a)?;
                    let fun = self.eval(f)?;
                    match &fun {
                        Term::Lam(x, body) => {
                            self.tick()?;
                            e = syntax::substitute_one(body, x, &arg);
                        }
                        Term::Int(n) => {
                            return Err(Abort::Stuck(format!("cannot apply integer {n}")))
                        }
                        _ => {
                            let (op, args) =
                                prim_spine(&fun).expect("values are λ, integer or primitive spine");
                            if args.len() + 1 < op.arity() {
                                return Ok(Term::app(fun.clone(), arg));
                            }
                            self.tick()?;
                            return match op {
                                Prim::Halt => Err(Abort::Halted(arg)),
                                Prim::Add | Prim::Mul => {
                                    let (Term::Int(a), Term::Int(b)) = (args[0], &arg) else {
                                        return Err(Abort::Stuck(format!(
                                            "{op} applied to a non-integer"
                                        )));
                                    };
                                    let r = if op == Prim::Add {
                                        a.checked_add(b)
                                    } else {
                                        a.checked_mul(b)
                                    };
                                    r.map(Term::Int).ok_or_else(|| {
                                        Abort::Stuck(format!("integer overflow in {op}"))
                                    })
                                }
                            };
                        }
                    }
                }
            }
        }
    }
}

/// Big-step call-by-value evaluation by capture-avoiding substitution,
/// argument before function. `budget` bounds β-reductions plus primitive
/// applications. Integers and all primitives are always available.
pub fn oracle_eval<N: Integer>(e: &Term<N>, budget: u64) -> Result<OracleResult<N>, MachineError> {
    if !is_conventional(e) {
        return Err(MachineError::NonConventional);
    }
    let mut oracle = Oracle { budget, used: 0 };
    Ok(match oracle.eval(e) {
        Ok(v) => OracleResult::Value(v),
        Err(Abort::Diverged) => OracleResult::Diverged(oracle.used),
        Err(Abort::Stuck(r)) => OracleResult::Stuck(r),
        Err(Abort::Halted(v)) => OracleResult::Halted(v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn t(s: &str) -> Term<i64> {
        parse_term(s).unwrap()
    }

    fn n(s: &str) -> Name {
        Name::new(s).unwrap()
    }

    fn term(s: &str) -> Control<i64> {
        Control::Term(Arc::new(t(s)))
    }

    #[test]
    fn load_examples() {
        let s = load(&t("\\x. x")).unwrap();
        assert_eq!(
            s,
            MachineState::from_parts(vec![], Env::empty(), vec![term("\\x. x")], None)
        );
        assert_eq!(load(&t("a or b")), Err(MachineError::NonConventional));
        let env: Env<i64> = [(n("x"), Value::Int(1))].into_iter().collect();
        let s = load_with(&t("x"), env.clone()).unwrap();
        assert_eq!(s.env, env);
        assert_eq!(
            step(&Machine::arith(), &s),
            Step::Next(MachineState::from_parts(
                vec![Value::Int(1)],
                env,
                vec![],
                None
            ))
        );
    }

    #[test]
    fn lambda_pushes_closure() {
        let s = load(&t("\\x. x")).unwrap();
        let closure = Value::Closure {
            param: n("x"),
            env: Env::empty(),
            body: Arc::new(t("x")),
        };
        let expected = MachineState::from_parts(vec![closure], Env::empty(), vec![], None);
        assert_eq!(step(&Machine::base(), &s), Step::Next(expected));
    }

    #[test]
    fn application_splits_argument_first() {
        let s = load(&t("(\\x. x) (\\y. y)")).unwrap();
        let expected = MachineState::from_parts(
            vec![],
            Env::empty(),
            vec![term("\\y. y"), term("\\x. x"), Control::Apply],
            None,
        );
        assert_eq!(step(&Machine::base(), &s), Step::Next(expected));
    }

    #[test]
    fn return_restores_dump() {
        let dumped =
            MachineState::from_parts(vec![Value::Int(7)], Env::empty(), vec![term("f")], None);
        let inner: Env<i64> = [(n("z"), Value::Int(0))].into_iter().collect();
        let s = MachineState::from_parts(vec![Value::Int(3)], inner, vec![], Some(dumped));
        let expected = MachineState::from_parts(
            vec![Value::Int(3), Value::Int(7)],
            Env::empty(),
            vec![term("f")],
            None,
        );
        assert_eq!(step(&Machine::arith(), &s), Step::Next(expected));
    }

    #[test]
    fn run_examples() {
        let id_y = Value::Closure {
            param: n("y"),
            env: Env::empty(),
            body: Arc::new(t("y")),
        };
        assert_eq!(
            run(&Machine::base(), &t("(\\x. x) (\\y. y)"), 100).unwrap(),
            EvalResult::Value(id_y)
        );
        assert_eq!(
            run(&Machine::arith(), &t("add 1 2"), 100).unwrap(),
            EvalResult::Value(Value::Int(3))
        );
        assert_eq!(
            run(&Machine::base(), &t("(\\x. x x) (\\x. x x)"), 1000).unwrap(),
            EvalResult::Diverged(1000)
        );
    }

    #[test]
    fn stuck_cases() {
        let stuck = |m: &Machine, s| match run(m, &t(s), 100).unwrap() {
            EvalResult::Stuck { reason, .. } => reason,
            other => panic!("{s}: {other:?}"),
        };
        assert_eq!(stuck(&Machine::base(), "x"), "unbound variable x");
        assert!(stuck(&Machine::base(), "add 1 2").contains("unsupported by machine base"));
        assert!(stuck(&Machine::base(), "add").contains("primitive add"));
        assert_eq!(stuck(&Machine::arith(), "3 4"), "cannot apply integer 3");
        assert_eq!(
            stuck(&Machine::arith(), "add (\\x. x) 1"),
            "add applied to a non-integer"
        );
        assert_eq!(
            stuck(&Machine::arith(), "mul 9223372036854775807 2"),
            "integer overflow in mul"
        );
    }

    #[test]
    fn big_integers_do_not_overflow() {
        let e: Term<num_bigint::BigInt> = parse_term("mul 9223372036854775807 2").unwrap();
        let r = run(&Machine::arith(), &e, 100).unwrap();
        assert_eq!(
            readback(r.outcome().unwrap()).to_string(),
            "18446744073709551614"
        );
    }

    #[test]
    fn halt_aborts_with_its_argument() {
        let r = run(&Machine::arith(), &t("add 1 (halt 5)"), 100).unwrap();
        assert_eq!(r, EvalResult::Halted(Value::Int(5)));
        assert_eq!(
            oracle_eval(&t("add 1 (halt 5)"), 100).unwrap(),
            OracleResult::Halted(t("5"))
        );
    }

    #[test]
    fn argument_is_evaluated_before_function() {
        // the argument halts before the unbound function is looked up
        let r = run(&Machine::arith(), &t("f (halt 1)"), 100).unwrap();
        assert_eq!(r, EvalResult::Halted(Value::Int(1)));
    }

    #[test]
    fn trace_lengths() {
        assert_eq!(
            trace(&Machine::base(), &t("\\x. x"), 10)
                .unwrap()
                .states
                .len(),
            2
        );
        let c = trace(&Machine::base(), &t("(\\x. x) (\\y. y)"), 100).unwrap();
        assert_eq!(c.states.len(), 7); // six rule firings after the initial state
        assert!(matches!(c.result, EvalResult::Value(_)));
        let c = trace(&Machine::base(), &t("x"), 10).unwrap();
        assert_eq!(c.states.len(), 1);
        assert!(matches!(c.result, EvalResult::Stuck { .. }));
    }

    #[test]
    fn readback_sizes() {
        for (src, size) in [
            ("3", 1),
            ("\\x. x", 2),
            ("(\\y. \\x. y y) (\\z. z)", 6),
            ("add 1", 3),
        ] {
            let r = run(&Machine::arith(), &t(src), 100).unwrap();
            let v = r.outcome().unwrap();
            assert_eq!(readback_size(v), size, "{src}");
            assert_eq!(readback(v).size(), size);
        }
        // sharing: each level doubles the readback
        let mut v: Value<i64> = Value::Int(1);
        for _ in 0..80 {
            let env = Env::empty().extend(Name::new("a").unwrap(), v);
            v = Value::Closure {
                param: Name::new("x").unwrap(),
                env,
                body: Arc::new(t("a a")),
            };
        }
        assert!(readback_size(&v) > READBACK_LIMIT);
        assert!(readback_within(&v, READBACK_LIMIT).is_none());
    }

    #[test]
    fn readback_examples() {
        assert_eq!(readback(&Value::<i64>::Int(3)), t("3"));
        let id = Value::<i64>::Closure {
            param: n("x"),
            env: Env::empty(),
            body: Arc::new(t("x")),
        };
        assert_eq!(readback(&id), t("\\x. x"));
        let c = Value::Closure {
            param: n("x"),
            env: [(n("y"), Value::Int(2))].into_iter().collect(),
            body: Arc::new(t("y x")),
        };
        assert_eq!(readback(&c), t("\\x. 2 x"));
        let partial = Value::<i64>::Partial {
            op: Prim::Add,
            args: vec![Value::Int(1)],
        };
        assert_eq!(readback(&partial), t("add 1"));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(
            oracle_eval(&t("(\\x. x) (\\y. y)"), 100).unwrap(),
            OracleResult::Value(t("\\y. y"))
        );
        assert_eq!(
            oracle_eval(&t("add (mul 2 3) 4"), 100).unwrap(),
            OracleResult::Value(t("10"))
        );
        assert_eq!(
            oracle_eval(&t("(\\x. \\y. x) 1 2"), 100).unwrap(),
            OracleResult::Value(t("1"))
        );
        assert_eq!(
            oracle_eval(&t("(\\x. x x) (\\x. x x)"), 50).unwrap(),
            OracleResult::Diverged(50)
        );
        assert!(matches!(
            oracle_eval(&t("1 2"), 10).unwrap(),
            OracleResult::Stuck(_)
        ));
    }

    #[test]
    fn machine_definitions() {
        assert_eq!(
            Machine::new("m", [Feature::Arith]),
            Err(MachineError::ArithWithoutIntegers)
        );
        let m = Machine::new("ints", [Feature::Integers]).unwrap();
        assert!(m.has(Feature::Base));
        assert!(Machine::by_name("lazy").is_err());
        assert!(Machine::base().check_program(&t("add 1 2")).is_err());
        assert!(Machine::arith().check_program(&t("add 1 (2 or 3)")).is_ok());
    }
}
