//! Seeded random generators shared by the property and acceptance tests.
#![allow(dead_code)]

use kbsm::devgraph::{ChangeKind, DevGraph, Edge, Node};
use kbsm::inference::{facts, Fact, Facts, Goal, Rule};
use kbsm::syntax::{paths, Name, Path, Prim, Term};
use kbsm::{Expr, PExpr};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

const NAMES: [&str; 4] = ["x", "y", "z", "w"];

#[derive(Clone, Copy)]
pub struct TermShape {
    /// Allow `or` and `fail`.
    pub kbs: bool,
    /// Allow integer literals and primitives.
    pub arith: bool,
    /// Only generate closed terms.
    pub closed: bool,
}

pub const CONVENTIONAL: TermShape = TermShape {
    kbs: false,
    arith: true,
    closed: true,
};
pub const KBS: TermShape = TermShape {
    kbs: true,
    arith: true,
    closed: true,
};
pub const OPEN_KBS: TermShape = TermShape {
    kbs: true,
    arith: true,
    closed: false,
};

fn name(s: &str) -> Name {
    Name::new(s).unwrap()
}

/// A term of size at most `max_size` (and at least 1).
pub fn term(rng: &mut impl Rng, max_size: usize, shape: TermShape) -> Expr {
    let size = rng.gen_range(1..=max_size.max(1));
    gen(rng, size, &mut Vec::new(), shape)
}

fn leaf(rng: &mut impl Rng, scope: &[Name], shape: TermShape) -> Expr {
    loop {
        match rng.gen_range(0..10) {
            0..=4 if !scope.is_empty() => return Term::Var(scope.choose(rng).unwrap().clone()),
            0..=4 if !shape.closed => return Term::Var(name(NAMES.choose(rng).unwrap())),
            5..=7 if shape.arith => return Term::Int(rng.gen_range(-2..6)),
            8 if shape.arith => {
                return Term::Prim(
                    *[Prim::Add, Prim::Mul, Prim::Add, Prim::Mul, Prim::Halt]
                        .choose(rng)
                        .unwrap(),
                )
            }
            9 if shape.kbs => return Term::Fail,
            _ if !shape.arith && scope.is_empty() && shape.closed => {
                // nothing closed fits in one node: fall back to the identity
                let x = name("x");
                return Term::lam(x.clone(), Term::Var(x));
            }
            _ => {}
        }
    }
}

fn gen(rng: &mut impl Rng, size: usize, scope: &mut Vec<Name>, shape: TermShape) -> Expr {
    if size <= 1 {
        return leaf(rng, scope, shape);
    }
    let choice = rng.gen_range(0..if shape.kbs { 10 } else { 8 });
    match choice {
        0..=2 => {
            let x = name(NAMES.choose(rng).unwrap());
            scope.push(x.clone());
            let body = gen(rng, size - 1, scope, shape);
            scope.pop();
            Term::lam(x, body)
        }
        3..=7 if size >= 3 => {
            let left = rng.gen_range(1..=size - 2);
            let f = gen(rng, left, scope, shape);
            let a = gen(rng, size - 1 - left, scope, shape);
            Term::app(f, a)
        }
        _ if size >= 3 && shape.kbs => {
            let left = rng.gen_range(1..=size - 2);
            let a = gen(rng, left, scope, shape);
            let b = gen(rng, size - 1 - left, scope, shape);
            Term::or(a, b)
        }
        _ => gen(rng, size - 1, scope, shape),
    }
}

/// A context with exactly one hole, built by replacing a random subterm.
pub fn context(rng: &mut impl Rng, max_size: usize, shape: TermShape) -> PExpr {
    let e = term(rng, max_size, shape);
    let all = paths(&e);
    let at: &Path = all.choose(rng).unwrap();
    kbsm::syntax::decompose(&e, at).unwrap().0
}

/// A full binary `or` tree of the given height with leaves `1..=2^height`.
pub fn or_tree(height: u32) -> Expr {
    fn build(lo: i64, n: i64) -> Expr {
        if n == 1 {
            Term::Int(lo)
        } else {
            Term::or(build(lo, n / 2), build(lo + n / 2, n / 2))
        }
    }
    build(1, 1 << height)
}

/// `add (1 or 2) (add (4 or 8) (…))`: one binary choice per level, every
/// combination a distinct sum.
pub fn or_sum(levels: u32) -> Expr {
    let choice = |i: u32| Term::or(Term::Int(1i64 << (2 * i)), Term::Int(2i64 << (2 * i)));
    (0..levels - 1).rev().fold(choice(levels - 1), |acc, i| {
        Term::app(Term::app(Term::Prim(Prim::Add), choice(i)), acc)
    })
}

// -- rule systems -------------------------------------------------------------

const FACTS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

fn fact_subset(rng: &mut impl Rng, universe: &[&str], p: f64) -> Facts {
    universe
        .iter()
        .filter(|_| rng.gen_bool(p))
        .map(|f| Fact::new(f).unwrap())
        .collect()
}

/// A random rule system over at most six facts with at most six rules.
/// `removal` is the chance of a fact being removed rather than added.
pub fn rule_system(rng: &mut impl Rng, removal: f64) -> (Vec<Rule>, Goal, Facts) {
    let universe = &FACTS[..rng.gen_range(1..=6)];
    let rules = (0..rng.gen_range(0..=6))
        .map(|i| {
            let requires = fact_subset(rng, universe, 0.25);
            let (mut adds, mut removes) = (Facts::new(), Facts::new());
            for f in universe {
                if rng.gen_bool(0.3) {
                    if rng.gen_bool(removal) {
                        removes.insert(Fact::new(f).unwrap());
                    } else {
                        adds.insert(Fact::new(f).unwrap());
                    }
                }
            }
            Rule::new(&format!("r{i}"), requires, adds, removes).unwrap()
        })
        .collect();
    let goal = Goal::all_of(fact_subset(rng, universe, 0.4));
    let start = fact_subset(rng, universe, 0.2);
    (rules, goal, start)
}

pub fn chain_rules() -> Vec<Rule> {
    vec![
        Rule::new("r1", facts([]), facts(["a"]), facts([])).unwrap(),
        Rule::new("r2", facts(["a"]), facts(["b"]), facts([])).unwrap(),
    ]
}

// -- development graphs -------------------------------------------------------

/// A random valid graph with up to `max_nodes` nodes, grown by applying
/// random modifications, extensions and ports to existing nodes.
pub fn dev_graph(rng: &mut impl Rng, max_nodes: usize) -> DevGraph {
    let n = rng.gen_range(1..=max_nodes);
    let mut g = DevGraph::new();
    let mut next = 0;
    while next < n {
        let id = format!("n{next}");
        let existing: Vec<Node> = g.nodes().cloned().collect();
        if existing.is_empty() || rng.gen_bool(0.15) {
            let program = term(rng, 12, OPEN_KBS);
            if let Ok(g2) = g.add_node(Node::new(&id, program, "arith", "root")) {
                g = g2;
                next += 1;
            }
            continue;
        }
        let from = existing.choose(rng).unwrap();
        let kind = match rng.gen_range(0..3) {
            0 => {
                let at = paths(&from.program).choose(rng).unwrap().clone();
                ChangeKind::Modification {
                    at,
                    replacement: term(rng, 5, OPEN_KBS),
                }
            }
            1 => ChangeKind::Extension {
                context: context(rng, 6, OPEN_KBS),
            },
            _ => ChangeKind::Port {
                port: [
                    "left-commit",
                    "right-commit",
                    "fail-elimination",
                    "identity",
                ]
                .choose(rng)
                .unwrap()
                .to_string(),
                report: None,
            },
        };
        let Ok(program) = kind.apply(&from.program) else {
            continue;
        };
        let Ok(g2) = g.add_node(Node::new(&id, program, "arith", "")) else {
            continue;
        };
        let edge = Edge {
            from: from.id.clone(),
            to: id.clone(),
            kind,
        };
        g = g2.add_change(edge).expect("recomputed edges validate");
        next += 1;
        // occasionally add a second incoming edge to make diamonds
        if rng.gen_bool(0.2) {
            let other = existing.choose(rng).unwrap();
            let target = g.node(&id).unwrap().program.clone();
            let edge = Edge {
                from: other.id.clone(),
                to: id.clone(),
                kind: ChangeKind::Modification {
                    at: Path::root(),
                    replacement: target,
                },
            };
            if let Ok(g3) = g.add_change(edge) {
                g = g3;
            }
        }
    }
    g
}
