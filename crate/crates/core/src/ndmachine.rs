//! The non-deterministic SECD machine: a transition maps one state to a
//! *set* of states.
//!
//! The five deterministic rules lift to singleton sets; `k1 or k2` at the
//! head of the control yields the two states `(s, b, k1 :: c, d)` and
//! `(s, b, k2 :: c, d)`; `fail` yields the empty set, pruning its branch.
//!
//! Exploration is done by [`explore`], which works for any [`Transitions`]
//! system under a [`SearchBudget`]. The inference engine reuses it.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::marker::PhantomData;

use crate::int::Integer;
use crate::machine::{self, readback, Control, Env, Machine, MachineState, Step, Value};
use crate::syntax::{alpha_key, Term};

/// What one non-deterministic transition produces.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expansion<S, O> {
    /// Zero (`fail`), one, or two (`or`) successor states.
    Successors(Vec<S>),
    Terminal(O),
    Stuck(String),
    /// A branch that cannot be observed within resource limits other than
    /// the search budget; counted as truncated.
    Unobservable,
}

/// A non-deterministic transition system.
pub trait Transitions {
    type State: Clone;
    type Outcome: Clone;
    /// Outcomes with equal keys are the same outcome.
    type Key: Ord + Clone;

    fn expand(&self, state: &Self::State) -> Expansion<Self::State, Self::Outcome>;

    fn key(&self, outcome: &Self::Outcome) -> Self::Key;
}

pub type NdStep<N> = Expansion<MachineState<N>, Value<N>>;

/// One non-deterministic transition of machine `m`.
pub fn nd_step<N: Integer>(m: &Machine, s: &MachineState<N>) -> NdStep<N> {
    if let Some(Control::Term(t)) = s.control_head() {
        match &**t {
            Term::Or(k1, k2) => {
                let branch = |k: &std::sync::Arc<Term<N>>| {
                    let mut next = s.clone();
                    next.control.pop();
                    next.control.push(Control::Term(k.clone()));
                    next
                };
                return Expansion::Successors(vec![branch(k1), branch(k2)]);
            }
            Term::Fail => return Expansion::Successors(Vec::new()),
            _ => {}
        }
    }
    match machine::step(m, s) {
        Step::Next(n) => Expansion::Successors(vec![n]),
        Step::Terminal(v) | Step::Halted(v) => Expansion::Terminal(v),
        Step::StuckAt(reason) => Expansion::Stuck(reason),
    }
}

/// The SECD machine viewed as a [`Transitions`] system. Outcomes are
/// identified by the α-equivalence class of their readback.
pub struct NdSecd<'m, N> {
    machine: &'m Machine,
    _n: PhantomData<N>,
}

impl<'m, N> NdSecd<'m, N> {
    pub fn new(machine: &'m Machine) -> Self {
        NdSecd {
            machine,
            _n: PhantomData,
        }
    }
}

impl<N: Integer> Transitions for NdSecd<'_, N> {
    type State = MachineState<N>;
    type Outcome = Value<N>;
    type Key = String;

    fn expand(&self, state: &MachineState<N>) -> NdStep<N> {
        match nd_step(self.machine, state) {
            Expansion::Terminal(v) if machine::readback_size(&v) > machine::READBACK_LIMIT => {
                Expansion::Unobservable
            }
            other => other,
        }
    }

    fn key(&self, outcome: &Value<N>) -> String {
        alpha_key(&readback(outcome))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Strategy {
    Bfs,
    #[default]
    Dfs,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bfs" => Ok(Strategy::Bfs),
            "dfs" => Ok(Strategy::Dfs),
            other => Err(format!("unknown strategy `{other}` (expected bfs or dfs)")),
        }
    }
}

/// Resource limits for an exploration. `max_total_steps` is one pool shared
/// by all branches; `max_depth` limits each branch separately.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SearchBudget {
    pub max_total_steps: u64,
    pub max_depth: u64,
    pub max_outcomes: Option<usize>,
    pub strategy: Strategy,
}

impl SearchBudget {
    pub fn new(strategy: Strategy, max_total_steps: u64, max_depth: u64) -> Self {
        assert!(
            max_total_steps >= 1 && max_depth >= 1,
            "search limits must be at least 1"
        );
        SearchBudget {
            max_total_steps,
            max_depth,
            max_outcomes: None,
            strategy,
        }
    }

    pub fn unlimited(strategy: Strategy) -> Self {
        SearchBudget::new(strategy, u64::MAX, u64::MAX)
    }

    pub fn with_max_outcomes(mut self, cap: usize) -> Self {
        assert!(cap >= 1, "outcome cap must be at least 1");
        self.max_outcomes = Some(cap);
        self
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget::new(Strategy::Dfs, 100_000, 10_000)
    }
}

/// Counters describing how an exploration ended.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Diagnostics {
    pub steps_used: u64,
    pub terminal: usize,
    pub pruned: usize,
    pub stuck: usize,
    pub truncated: usize,
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pruned={} stuck={} truncated={}",
            self.pruned, self.stuck, self.truncated
        )
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum NodeStatus<O> {
    Branch,
    Terminal(O),
    Pruned,
    Stuck(String),
    Truncated,
}

/// An arena node: the run of states between two branching points.
#[derive(Clone, Debug)]
pub struct SearchNode<S, O> {
    pub parent: Option<usize>,
    pub segment: Vec<S>,
    pub children: Vec<usize>,
    pub status: NodeStatus<O>,
}

pub struct Exploration<T: Transitions> {
    /// Distinct outcomes in discovery order.
    pub outcomes: Vec<T::Outcome>,
    pub complete: bool,
    pub diagnostics: Diagnostics,
    /// Node 0 is the root. Segments are only filled when recording.
    pub nodes: Vec<SearchNode<T::State, T::Outcome>>,
}

struct Work<S> {
    node: usize,
    state: S,
    depth: u64,
}

/// Explores the transition tree from `init`.
///
/// Left successors are explored first: dfs keeps going down the leftmost
/// branch, bfs enqueues left before right. With `record` set, every visited
/// state is kept in the node arena so the calculation tree can be rebuilt.
pub fn explore<T: Transitions>(
    sys: &T,
    init: T::State,
    budget: &SearchBudget,
    record: bool,
) -> Exploration<T> {
    let mut nodes = vec![SearchNode {
        parent: None,
        segment: if record {
            vec![init.clone()]
        } else {
            Vec::new()
        },
        children: Vec::new(),
        status: NodeStatus::Truncated,
    }];
    let mut frontier = VecDeque::from([Work {
        node: 0,
        state: init,
        depth: 0,
    }]);
    let mut seen: BTreeSet<T::Key> = BTreeSet::new();
    let mut outcomes = Vec::new();
    let mut diag = Diagnostics::default();
    let cap_reached = |n: usize| budget.max_outcomes.is_some_and(|cap| n >= cap);

    while !cap_reached(outcomes.len()) {
        let next = match budget.strategy {
            Strategy::Dfs => frontier.pop_back(),
            Strategy::Bfs => frontier.pop_front(),
        };
        let Some(work) = next else { break };
        match sys.expand(&work.state) {
            Expansion::Terminal(o) => {
                diag.terminal += 1;
                if seen.insert(sys.key(&o)) {
                    outcomes.push(o.clone());
                }
                nodes[work.node].status = NodeStatus::Terminal(o);
            }
            Expansion::Stuck(reason) => {
                diag.stuck += 1;
                nodes[work.node].status = NodeStatus::Stuck(reason);
            }
            Expansion::Unobservable => {
                diag.truncated += 1;
                nodes[work.node].status = NodeStatus::Truncated;
            }
            Expansion::Successors(succ) => {
                if work.depth >= budget.max_depth || diag.steps_used >= budget.max_total_steps {
                    diag.truncated += 1;
                    nodes[work.node].status = NodeStatus::Truncated;
                    continue;
                }
                diag.steps_used += 1;
                let depth = work.depth + 1;
                match succ.len() {
                    0 => {
                        diag.pruned += 1;
                        nodes[work.node].status = NodeStatus::Pruned;
                    }
                    1 => {
                        let state = succ.into_iter().next().expect("one successor");
                        if record {
                            nodes[work.node].segment.push(state.clone());
                        }
                        frontier.push_back(Work {
                            node: work.node,
                            state,
                            depth,
                        });
                    }
                    _ => {
                        nodes[work.node].status = NodeStatus::Branch;
                        let mut items = Vec::with_capacity(succ.len());
                        for state in succ {
                            let id = nodes.len();
                            nodes.push(SearchNode {
                                parent: Some(work.node),
                                segment: if record {
                                    vec![state.clone()]
                                } else {
                                    Vec::new()
                                },
                                children: Vec::new(),
                                status: NodeStatus::Truncated,
                            });
                            nodes[work.node].children.push(id);
                            items.push(Work {
                                node: id,
                                state,
                                depth,
                            });
                        }
                        match budget.strategy {
                            Strategy::Dfs => frontier.extend(items.into_iter().rev()),
                            Strategy::Bfs => frontier.extend(items),
                        }
                    }
                }
            }
        }
    }
    // anything still queued was cut off by the outcome cap
    for work in frontier {
        diag.truncated += 1;
        nodes[work.node].status = NodeStatus::Truncated;
    }
    Exploration {
        outcomes,
        complete: diag.truncated == 0,
        diagnostics: diag,
        nodes,
    }
}

/// A set of outcomes, deduplicated by α-equivalence of readbacks and sorted
/// by rendered readback text.
#[derive(Clone, Debug)]
pub struct OutcomeSet<N> {
    pub values: Vec<Value<N>>,
    pub complete: bool,
    pub diagnostics: Diagnostics,
}

impl<N: Integer> OutcomeSet<N> {
    fn from_exploration(ex: Exploration<NdSecd<'_, N>>) -> Self {
        let mut keyed: Vec<(String, Value<N>)> = ex
            .outcomes
            .into_iter()
            .map(|v| (readback(&v).to_string(), v))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        OutcomeSet {
            values: keyed.into_iter().map(|(_, v)| v).collect(),
            complete: ex.complete,
            diagnostics: ex.diagnostics,
        }
    }

    pub fn readbacks(&self) -> Vec<Term<N>> {
        self.values.iter().map(readback).collect()
    }

    /// Rendered readbacks, in order.
    pub fn rendered(&self) -> Vec<String> {
        self.values
            .iter()
            .map(|v| readback(v).to_string())
            .collect()
    }

    /// α-classes of the readbacks.
    pub fn keys(&self) -> std::collections::BTreeSet<String> {
        self.values
            .iter()
            .map(|v| alpha_key(&readback(v)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_subset(&self, other: &OutcomeSet<N>) -> bool {
        self.keys().is_subset(&other.keys())
    }
}

/// All outcomes of `k` reachable within `budget`. Stuck branches contribute
/// nothing and are counted in the diagnostics.
pub fn enumerate<N: Integer>(m: &Machine, k: &Term<N>, budget: &SearchBudget) -> OutcomeSet<N> {
    enumerate_with(m, k, Env::empty(), budget)
}

pub fn enumerate_with<N: Integer>(
    m: &Machine,
    k: &Term<N>,
    env: Env<N>,
    budget: &SearchBudget,
) -> OutcomeSet<N> {
    let sys = NdSecd::new(m);
    let ex = explore(&sys, machine::initial_state(k, env), budget, false);
    OutcomeSet::from_exploration(ex)
}

/// `eval(M) : K → setof(V)`.
pub fn eval_nd<N: Integer>(m: &Machine, k: &Term<N>, budget: &SearchBudget) -> OutcomeSet<N> {
    enumerate(m, k, budget)
}

/// A calculation tree. Each node holds the states between two branching
/// points: a conventional program gives a single node whose segment is its
/// whole calculation.
#[derive(Clone, Debug)]
pub struct CalcTree<N> {
    pub segment: Vec<MachineState<N>>,
    pub status: NodeStatus<Value<N>>,
    pub children: Vec<CalcTree<N>>,
}

impl<N: Integer> CalcTree<N> {
    pub fn state(&self) -> &MachineState<N> {
        &self.segment[0]
    }

    /// Outcomes at terminal leaves, left to right.
    pub fn leaf_outcomes(&self) -> Vec<Value<N>> {
        let mut out = Vec::new();
        self.visit(&mut |t| {
            if let NodeStatus::Terminal(v) = &t.status {
                out.push(v.clone());
            }
        });
        out
    }

    pub fn count(&self, pred: impl Fn(&NodeStatus<Value<N>>) -> bool) -> usize {
        let mut n = 0;
        self.visit(&mut |t| {
            if pred(&t.status) {
                n += 1;
            }
        });
        n
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a CalcTree<N>)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    /// Indented text, one node per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.line());
        out.push('\n');
        self.render_children("", &mut out);
        out
    }

    fn render_children(&self, prefix: &str, out: &mut String) {
        let n = self.children.len();
        for (i, child) in self.children.iter().enumerate() {
            let last = i + 1 == n;
            out.push_str(prefix);
            out.push_str(if last { "└─ " } else { "├─ " });
            out.push_str(&child.line());
            out.push('\n');
            let deeper = format!("{prefix}{}", if last { "   " } else { "│  " });
            child.render_children(&deeper, out);
        }
    }

    fn line(&self) -> String {
        let head = match self.state().control_head() {
            Some(Control::Term(t)) => t.to_string(),
            Some(Control::Apply) => "@".to_string(),
            None => "return".to_string(),
        };
        let mut line = head;
        if self.segment.len() > 1 {
            line.push_str(&format!(" ({} states)", self.segment.len()));
        }
        match &self.status {
            NodeStatus::Branch => {}
            NodeStatus::Terminal(v) => line.push_str(&format!(" [terminal: {}]", readback(v))),
            NodeStatus::Pruned => line.push_str(" [pruned]"),
            NodeStatus::Stuck(r) => line.push_str(&format!(" [stuck: {r}]")),
            NodeStatus::Truncated => line.push_str(" [truncated]"),
        }
        line
    }
}

/// The explored calculation tree together with the outcome set found by
/// the same exploration.
pub fn calc_tree<N: Integer>(
    m: &Machine,
    k: &Term<N>,
    budget: &SearchBudget,
) -> (CalcTree<N>, OutcomeSet<N>) {
    let sys = NdSecd::new(m);
    let mut ex = explore(&sys, machine::initial_state(k, Env::empty()), budget, true);
    let mut nodes: Vec<Option<SearchNode<_, _>>> = std::mem::take(&mut ex.nodes)
        .into_iter()
        .map(Some)
        .collect();
    fn build<N: Integer>(
        id: usize,
        nodes: &mut [Option<SearchNode<MachineState<N>, Value<N>>>],
    ) -> CalcTree<N> {
        let node = nodes[id].take().expect("each node visited once");
        CalcTree {
            segment: node.segment,
            status: node.status,
            children: node.children.iter().map(|&c| build(c, nodes)).collect(),
        }
    }
    let tree = build(0, &mut nodes);
    (tree, OutcomeSet::from_exploration(ex))
}
