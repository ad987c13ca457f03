//! Rewrite tables: program translations written as data.
//!
//! A table is a list of lines `LHS => RHS`. Patterns use the program syntax
//! plus metavariables `$1`, `$2`, … that match any subterm (a repeated
//! metavariable must match equal subterms). Rules are applied leftmost-
//! innermost, one rewrite at a time, until no rule matches or the step cap
//! is reached.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::int::Integer;
use crate::syntax::{
    self, parse_int, parse_raw, Name, PTerm, Prim, Raw, Syntax, SyntaxError, View,
};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Pattern<N> {
    Meta(u32),
    Var(Name),
    Lam(Name, Box<Pattern<N>>),
    App(Box<Pattern<N>>, Box<Pattern<N>>),
    Or(Box<Pattern<N>>, Box<Pattern<N>>),
    Fail,
    Int(N),
    Prim(Prim),
    Hole,
}

impl<N: std::fmt::Display> Syntax for Pattern<N> {
    fn view(&self) -> View<'_, Self> {
        match self {
            Pattern::Meta(n) => View::Meta(*n),
            Pattern::Var(x) => View::Var(x),
            Pattern::Lam(x, b) => View::Lam(x, b),
            Pattern::App(a, b) => View::App(a, b),
            Pattern::Or(a, b) => View::Or(a, b),
            Pattern::Fail => View::Fail,
            Pattern::Int(n) => View::Int(n),
            Pattern::Prim(p) => View::Prim(*p),
            Pattern::Hole => View::Hole,
        }
    }
}

impl<N: std::fmt::Display> std::fmt::Display for Pattern<N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        syntax::write_term(self, &mut out);
        f.write_str(&out)
    }
}

impl<N: Integer> Pattern<N> {
    pub fn parse(text: &str) -> Result<Pattern<N>, SyntaxError> {
        fn lower<N: Integer>(src: &str, raw: Raw) -> Result<Pattern<N>, SyntaxError> {
            Ok(match raw {
                Raw::Meta(n) => Pattern::Meta(n),
                Raw::Var(x) => Pattern::Var(x),
                Raw::Lam(x, b) => Pattern::Lam(x, Box::new(lower(src, *b)?)),
                Raw::App(a, b) => {
                    Pattern::App(Box::new(lower(src, *a)?), Box::new(lower(src, *b)?))
                }
                Raw::Or(a, b) => Pattern::Or(Box::new(lower(src, *a)?), Box::new(lower(src, *b)?)),
                Raw::Fail => Pattern::Fail,
                Raw::Int(digits, offset) => Pattern::Int(parse_int(src, &digits, offset)?),
                Raw::Prim(p) => Pattern::Prim(p),
                Raw::Hole(_) => Pattern::Hole,
            })
        }
        lower(text, parse_raw(text, true)?)
    }

    fn metas(&self, out: &mut BTreeSet<u32>) {
        match self {
            Pattern::Meta(n) => {
                out.insert(*n);
            }
            Pattern::Lam(_, b) => b.metas(out),
            Pattern::App(a, b) | Pattern::Or(a, b) => {
                a.metas(out);
                b.metas(out);
            }
            _ => {}
        }
    }

    fn matches(&self, t: &PTerm<N>, binds: &mut BTreeMap<u32, PTerm<N>>) -> bool {
        match (self, t) {
            (Pattern::Meta(n), _) => match binds.get(n) {
                Some(bound) => bound == t,
                None => {
                    binds.insert(*n, t.clone());
                    true
                }
            },
            (Pattern::Var(x), PTerm::Var(y)) => x == y,
            (Pattern::Lam(x, pb), PTerm::Lam(y, tb)) => x == y && pb.matches(tb, binds),
            (Pattern::App(pa, pb), PTerm::App(ta, tb))
            | (Pattern::Or(pa, pb), PTerm::Or(ta, tb)) => {
                pa.matches(ta, binds) && pb.matches(tb, binds)
            }
            (Pattern::Fail, PTerm::Fail) | (Pattern::Hole, PTerm::Hole) => true,
            (Pattern::Int(m), PTerm::Int(n)) => m == n,
            (Pattern::Prim(p), PTerm::Prim(q)) => p == q,
            _ => false,
        }
    }

    fn instantiate(&self, binds: &BTreeMap<u32, PTerm<N>>) -> PTerm<N> {
        match self {
            Pattern::Meta(n) => binds[n].clone(),
            Pattern::Var(x) => PTerm::Var(x.clone()),
            Pattern::Lam(x, b) => PTerm::lam(x.clone(), b.instantiate(binds)),
            Pattern::App(a, b) => PTerm::app(a.instantiate(binds), b.instantiate(binds)),
            Pattern::Or(a, b) => PTerm::or(a.instantiate(binds), b.instantiate(binds)),
            Pattern::Fail => PTerm::Fail,
            Pattern::Int(n) => PTerm::Int(n.clone()),
            Pattern::Prim(p) => PTerm::Prim(*p),
            Pattern::Hole => PTerm::Hole,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RewriteRule<N> {
    pub lhs: Pattern<N>,
    pub rhs: Pattern<N>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rewrite table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("rewriting did not reach a fixed point within {0} steps")]
    StepCapExceeded(usize),
}

pub const DEFAULT_STEP_CAP: usize = 10_000;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RewriteTable<N> {
    pub rules: Vec<RewriteRule<N>>,
    pub step_cap: usize,
}

impl<N: Integer> RewriteTable<N> {
    pub fn parse(text: &str) -> Result<RewriteTable<N>, RewriteError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |message: String| RewriteError::Table {
                line: line_no,
                message,
            };
            let (lhs, rhs) = body
                .split_once("=>")
                .ok_or_else(|| err("expected `LHS => RHS`".into()))?;
            let lhs = Pattern::parse(lhs).map_err(|e| err(format!("left-hand side: {e}")))?;
            let rhs = Pattern::parse(rhs).map_err(|e| err(format!("right-hand side: {e}")))?;
            let (mut bound, mut used) = (BTreeSet::new(), BTreeSet::new());
            lhs.metas(&mut bound);
            rhs.metas(&mut used);
            if let Some(m) = used.difference(&bound).next() {
                return Err(err(format!("${m} is not bound by the left-hand side")));
            }
            rules.push(RewriteRule { lhs, rhs });
        }
        Ok(RewriteTable {
            rules,
            step_cap: DEFAULT_STEP_CAP,
        })
    }

    /// Rewrites to a fixed point.
    pub fn apply(&self, t: &PTerm<N>) -> Result<PTerm<N>, RewriteError> {
        let mut current = t.clone();
        for _ in 0..self.step_cap {
            match self.rewrite_once(&current) {
                Some(next) => current = next,
                None => return Ok(current),
            }
        }
        match self.rewrite_once(&current) {
            None => Ok(current),
            Some(_) => Err(RewriteError::StepCapExceeded(self.step_cap)),
        }
    }

    /// One leftmost-innermost rewrite, or `None` at a fixed point.
    fn rewrite_once(&self, t: &PTerm<N>) -> Option<PTerm<N>> {
        let inner = match t {
            PTerm::Lam(x, b) => self.rewrite_once(b).map(|b| PTerm::lam(x.clone(), b)),
            PTerm::App(a, b) => match self.rewrite_once(a) {
                Some(a) => Some(PTerm::app(a, (**b).clone())),
                None => self.rewrite_once(b).map(|b| PTerm::app((**a).clone(), b)),
            },
            PTerm::Or(a, b) => match self.rewrite_once(a) {
                Some(a) => Some(PTerm::or(a, (**b).clone())),
                None => self.rewrite_once(b).map(|b| PTerm::or((**a).clone(), b)),
            },
            _ => None,
        };
        inner.or_else(|| {
            self.rules.iter().find_map(|rule| {
                let mut binds = BTreeMap::new();
                rule.lhs
                    .matches(t, &mut binds)
                    .then(|| rule.rhs.instantiate(&binds))
            })
        })
    }
}
