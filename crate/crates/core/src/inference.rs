//! A forward-chaining inference engine built on the non-determinism
//! primitive:
//!
//! ```text
//! inferenceengine(rules, data) =
//!   if terminated(data) then data
//!   else lhr (or) (λ_. fail) (map f (applicablerules(rules, data)))
//!     where f(r) = inferenceengine(rules, r(data))
//! ```
//!
//! `lhr (or) z` folds a list with `or`: `[] ↦ z ()`, `[x] ↦ x`,
//! `x :: xs ↦ x or lhr xs`. Every applicable rule therefore gets its own
//! branch, and a state where no rule applies is a `fail`. The resulting
//! `or`/`fail` tree is explored by [`crate::ndmachine::explore`], with the
//! same strategies and budgets as the non-deterministic machine.
//!
//! Data is a finite set of facts; rules are requires/adds/removes triples.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ndmachine::{explore, Diagnostics, Expansion, SearchBudget, Transitions};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Fact(Arc<str>);

impl Fact {
    pub fn new(text: &str) -> Result<Fact, InferenceError> {
        let ok = !text.is_empty()
            && !text
                .chars()
                .any(|c| c.is_whitespace() || ",;:#{}".contains(c));
        if ok {
            Ok(Fact(text.into()))
        } else {
            Err(InferenceError::InvalidFact(text.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type Facts = BTreeSet<Fact>;

/// Renders a fact set as `{a, b}`.
pub fn show_facts(facts: &Facts) -> String {
    let items: Vec<&str> = facts.iter().map(Fact::as_str).collect();
    format!("{{{}}}", items.join(", "))
}

/// Builds a fact set from tokens, panicking on invalid ones. For literals.
pub fn facts<'a>(items: impl IntoIterator<Item = &'a str>) -> Facts {
    items
        .into_iter()
        .map(|s| Fact::new(s).expect("valid fact"))
        .collect()
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub name: String,
    pub requires: Facts,
    pub adds: Facts,
    pub removes: Facts,
}

impl Rule {
    pub fn new(
        name: &str,
        requires: Facts,
        adds: Facts,
        removes: Facts,
    ) -> Result<Rule, InferenceError> {
        if let Some(f) = adds.intersection(&removes).next() {
            return Err(InferenceError::AddsAndRemoves {
                rule: name.to_string(),
                fact: f.to_string(),
            });
        }
        Ok(Rule {
            name: name.to_string(),
            requires,
            adds,
            removes,
        })
    }

    /// Applicable when its requirements hold and applying it changes the data.
    pub fn applicable(&self, data: &Facts) -> bool {
        self.requires.is_subset(data)
            && (!self.adds.is_subset(data) || !self.removes.is_disjoint(data))
    }
}

/// Satisfied by any fact set containing all of `facts`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Goal {
    pub facts: Facts,
}

impl Goal {
    pub fn all_of(facts: Facts) -> Goal {
        Goal { facts }
    }

    pub fn satisfied(&self, data: &Facts) -> bool {
        self.facts.is_subset(data)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferenceError {
    #[error("rule {0} is not applicable")]
    NotApplicable(String),
    #[error("more than {0} reachable states")]
    StateSpaceExceeded(usize),
    #[error("invalid fact `{0}`")]
    InvalidFact(String),
    #[error("rule {rule} both adds and removes {fact}")]
    AddsAndRemoves { rule: String, fact: String },
    #[error("rule file line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn applicable_rules<'r>(rules: &'r [Rule], data: &Facts) -> Vec<&'r Rule> {
    rules.iter().filter(|r| r.applicable(data)).collect()
}

/// `(data ∖ removes) ∪ adds`.
pub fn apply_rule(rule: &Rule, data: &Facts) -> Result<Facts, InferenceError> {
    if !rule.applicable(data) {
        return Err(InferenceError::NotApplicable(rule.name.clone()));
    }
    let mut out: Facts = data.difference(&rule.removes).cloned().collect();
    out.extend(rule.adds.iter().cloned());
    Ok(out)
}

/// The engine's control terms: a pending call of the engine on some data,
/// or the `or`/`fail` structure produced by folding its continuations.
#[derive(Clone, Debug)]
pub enum EngineTerm {
    Engine(Facts),
    Or(Arc<EngineTerm>, Arc<EngineTerm>),
    Fail,
}

/// `lhr (or) (λ_. fail)`.
fn lhr(mut items: Vec<EngineTerm>) -> EngineTerm {
    let Some(last) = items.pop() else {
        return EngineTerm::Fail;
    };
    items
        .into_iter()
        .rev()
        .fold(last, |acc, x| EngineTerm::Or(Arc::new(x), Arc::new(acc)))
}

struct Engine<'a> {
    rules: &'a [Rule],
    goal: &'a Goal,
}

impl Transitions for Engine<'_> {
    type State = EngineTerm;
    type Outcome = Facts;
    type Key = Facts;

    fn expand(&self, state: &EngineTerm) -> Expansion<EngineTerm, Facts> {
        match state {
            EngineTerm::Engine(data) if self.goal.satisfied(data) => {
                Expansion::Terminal(data.clone())
            }
            EngineTerm::Engine(data) => {
                let continuations = applicable_rules(self.rules, data)
                    .into_iter()
                    .map(|r| EngineTerm::Engine(apply_rule(r, data).expect("applicable")))
                    .collect();
                Expansion::Successors(vec![lhr(continuations)])
            }
            EngineTerm::Or(a, b) => Expansion::Successors(vec![(**a).clone(), (**b).clone()]),
            EngineTerm::Fail => Expansion::Successors(Vec::new()),
        }
    }

    fn key(&self, outcome: &Facts) -> Facts {
        outcome.clone()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InferenceResult {
    pub outcomes: BTreeSet<Facts>,
    pub complete: bool,
    /// Branches where the goal was unmet and no rule applied.
    pub dead_ends: usize,
    pub diagnostics: Diagnostics,
}

pub fn infer(rules: &[Rule], goal: &Goal, data: &Facts, budget: &SearchBudget) -> InferenceResult {
    let engine = Engine { rules, goal };
    let run = explore(&engine, EngineTerm::Engine(data.clone()), budget, false);
    InferenceResult {
        outcomes: run.outcomes.into_iter().collect(),
        complete: run.complete,
        // `fail` only arises from an empty continuation list
        dead_ends: run.diagnostics.pruned,
        diagnostics: run.diagnostics,
    }
}

/// Breadth-first closure over the rule-application graph. Goal states are
/// collected and not expanded further, matching [`infer`].
pub fn reachability_oracle(
    rules: &[Rule],
    goal: &Goal,
    data: &Facts,
    max_states: usize,
) -> Result<BTreeSet<Facts>, InferenceError> {
    let mut seen = BTreeSet::from([data.clone()]);
    let mut queue = VecDeque::from([data.clone()]);
    let mut found = BTreeSet::new();
    while let Some(d) = queue.pop_front() {
        if goal.satisfied(&d) {
            found.insert(d);
            continue;
        }
        for r in rules.iter().filter(|r| r.requires.is_subset(&d)) {
            let mut next: Facts = d.difference(&r.removes).cloned().collect();
            next.extend(r.adds.iter().cloned());
            if next != d && seen.insert(next.clone()) {
                if seen.len() > max_states {
                    return Err(InferenceError::StateSpaceExceeded(max_states));
                }
                queue.push_back(next);
            }
        }
    }
    Ok(found)
}

/// A parsed rule file.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RuleSystem {
    pub rules: Vec<Rule>,
    pub goal: Goal,
    pub start: Facts,
}

/// Parses lines of the forms
///
/// ```text
/// rule NAME: requires a, b; adds c; removes d
/// goal: x, y
/// start: a
/// ```
///
/// Rule clauses are optional; `#` starts a comment. A `goal:` line is
/// required; `start:` defaults to the empty set.
pub fn parse_rules(text: &str) -> Result<RuleSystem, InferenceError> {
    let mut rules: Vec<Rule> = Vec::new();
    let (mut goal, mut start) = (None, None);
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| InferenceError::Parse {
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fact_list = |s: &str| -> Result<Facts, InferenceError> {
            s.split(',')
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .map(|f| Fact::new(f).map_err(|e| err(e.to_string())))
                .collect()
        };
        let (head, rest) = line
            .split_once(':')
            .ok_or_else(|| err("expected `:`".into()))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        match head.as_slice() {
            ["goal"] if goal.is_none() => goal = Some(Goal::all_of(fact_list(rest)?)),
            ["start"] if start.is_none() => start = Some(fact_list(rest)?),
            ["goal"] | ["start"] => return Err(err(format!("duplicate `{}` line", head[0]))),
            ["rule", name] => {
                if rules.iter().any(|r| r.name == *name) {
                    return Err(err(format!("duplicate rule {name}")));
                }
                let (mut requires, mut adds, mut removes) = (None, None, None);
                for clause in rest.split(';').map(str::trim).filter(|c| !c.is_empty()) {
                    let (kw, facts) = clause
                        .split_once(char::is_whitespace)
                        .unwrap_or((clause, ""));
                    let slot = match kw {
                        "requires" => &mut requires,
                        "adds" => &mut adds,
                        "removes" => &mut removes,
                        other => return Err(err(format!("unknown clause `{other}`"))),
                    };
                    if slot.is_some() {
                        return Err(err(format!("duplicate `{kw}` clause")));
                    }
                    *slot = Some(fact_list(facts)?);
                }
                let rule = Rule::new(
                    name,
                    requires.unwrap_or_default(),
                    adds.unwrap_or_default(),
                    removes.unwrap_or_default(),
                )
                .map_err(|e| err(e.to_string()))?;
                rules.push(rule);
            }
            _ => {
                return Err(err(format!(
                    "expected `rule NAME:`, `goal:` or `start:`, found `{}`",
                    head.join(" ")
                )))
            }
        }
    }
    let goal = goal.ok_or(InferenceError::Parse {
        line: text.lines().count().max(1),
        message: "missing `goal:` line".into(),
    })?;
    Ok(RuleSystem {
        rules,
        goal,
        start: start.unwrap_or_default(),
    })
}
