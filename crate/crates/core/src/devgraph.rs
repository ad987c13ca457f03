//! Development graphs: programs as nodes, changes as edges.
//!
//! Every edge carries its change (a modification, an extension or a port),
//! so the graph can recompute each target program from its source and
//! detect corruption. Graph values are immutable; operations return a new
//! graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::machine::Machine;
use crate::ports::builtin_translations;
use crate::syntax::{extend, modify, parse, parse_term, Path};
use crate::{Expr, PExpr};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Node {
    pub id: String,
    pub program: Expr,
    pub machine: String,
    pub label: String,
}

impl Node {
    pub fn new(id: &str, program: Expr, machine: &str, label: &str) -> Node {
        Node {
            id: id.to_string(),
            program,
            machine: machine.to_string(),
            label: label.to_string(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ChangeKind {
    /// Replace the subterm at `at` by `replacement`.
    Modification { at: Path, replacement: Expr },
    /// Wrap the whole program in a single-hole context.
    Extension { context: PExpr },
    /// Apply a named program translation. `report` optionally points at the
    /// consistency report that justified the port.
    Port {
        port: String,
        report: Option<String>,
    },
}

impl ChangeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChangeKind::Modification { .. } => "modification",
            ChangeKind::Extension { .. } => "extension",
            ChangeKind::Port { .. } => "port",
        }
    }

    fn intra_language(&self) -> bool {
        !matches!(self, ChangeKind::Port { .. })
    }

    /// Recomputes the target program from the source program.
    pub fn apply(&self, source: &Expr) -> Result<Expr, GraphError> {
        match self {
            ChangeKind::Modification { at, replacement } => modify(source, at, replacement)
                .map_err(|e| GraphError::InvalidChange(e.to_string())),
            ChangeKind::Extension { context } => {
                extend(context, source).map_err(|e| GraphError::InvalidChange(e.to_string()))
            }
            ChangeKind::Port { port, .. } => {
                let (t, _) = builtin_translations(port)
                    .ok_or_else(|| GraphError::UnknownPort(port.clone()))?;
                t.apply(source)
                    .map_err(|e| GraphError::InvalidChange(e.to_string()))
            }
        }
    }
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChangeKind::Modification { at, replacement } => {
                write!(f, "modification at {at} := {replacement}")
            }
            ChangeKind::Extension { context } => write!(f, "extension {context}"),
            ChangeKind::Port { port, report: None } => write!(f, "port {port}"),
            ChangeKind::Port {
                port,
                report: Some(r),
            } => write!(f, "port {port} (report {r})"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: ChangeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node `{id}` has an invalid program: {reason}")]
    InvalidProgram { id: String, reason: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("{kind} edge {from} -> {to} crosses machines ({from_machine} vs {to_machine})")]
    MachineMismatch {
        kind: &'static str,
        from: String,
        to: String,
        from_machine: String,
        to_machine: String,
    },
    #[error("edge {from} -> {to} does not reproduce its target: recomputed `{recomputed}`, stored `{stored}`")]
    EdgeValidationFailed {
        from: String,
        to: String,
        recomputed: String,
        stored: String,
    },
    #[error("edge {from} -> {to} would create a cycle")]
    CycleCreated { from: String, to: String },
    #[error("unknown port `{0}`")]
    UnknownPort(String),
    #[error("change cannot be applied: {0}")]
    InvalidChange(String),
    #[error("not a path from a root: {0}")]
    InvalidGraphPath(String),
    #[error("replay of the path to `{node}` gives `{replayed}`, stored program is `{stored}`")]
    ReplayMismatch {
        node: String,
        replayed: String,
        stored: String,
    },
    #[error("malformed graph file: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
}

/// A walk through the graph: a start node and a sequence of edge indices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GraphPath {
    pub start: String,
    pub edges: Vec<usize>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct DevGraph {
    nodes: BTreeMap<String, Node>,
    edges: Vec<Edge>,
}

impl DevGraph {
    pub fn new() -> DevGraph {
        DevGraph::default()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Nodes with no incoming edge, by id.
    pub fn roots(&self) -> Vec<&str> {
        let targets: BTreeSet<&str> = self.edges.iter().map(|e| e.to.as_str()).collect();
        self.nodes
            .keys()
            .map(String::as_str)
            .filter(|id| !targets.contains(id))
            .collect()
    }

    pub fn add_node(&self, node: Node) -> Result<DevGraph, GraphError> {
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateId(node.id));
        }
        validate_node(&node)?;
        let mut g = self.clone();
        g.nodes.insert(node.id.clone(), node);
        Ok(g)
    }

    pub fn add_change(&self, edge: Edge) -> Result<DevGraph, GraphError> {
        self.validate_edge(&edge)?;
        if edge.from == edge.to || self.reaches(&edge.to, &edge.from) {
            return Err(GraphError::CycleCreated {
                from: edge.from,
                to: edge.to,
            });
        }
        let mut g = self.clone();
        g.edges.push(edge);
        Ok(g)
    }

    fn endpoint(&self, id: &str) -> Result<&Node, GraphError> {
        self.nodes
            .get(id)
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    fn validate_edge(&self, edge: &Edge) -> Result<(), GraphError> {
        let from = self.endpoint(&edge.from)?;
        let to = self.endpoint(&edge.to)?;
        if edge.kind.intra_language() && from.machine != to.machine {
            return Err(GraphError::MachineMismatch {
                kind: edge.kind.name(),
                from: from.id.clone(),
                to: to.id.clone(),
                from_machine: from.machine.clone(),
                to_machine: to.machine.clone(),
            });
        }
        let recomputed = edge.kind.apply(&from.program)?;
        if recomputed != to.program {
            return Err(GraphError::EdgeValidationFailed {
                from: from.id.clone(),
                to: to.id.clone(),
                recomputed: recomputed.to_string(),
                stored: to.program.to_string(),
            });
        }
        Ok(())
    }

    fn reaches(&self, from: &str, to: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(
                    self.edges
                        .iter()
                        .filter(|e| e.from == n)
                        .map(|e| e.to.as_str()),
                );
            }
        }
        false
    }

    /// All edge sequences from a root to `id`, in a fixed order.
    pub fn paths_to_node(&self, id: &str) -> Result<Vec<GraphPath>, GraphError> {
        self.endpoint(id)?;
        let mut out = Vec::new();
        let mut suffix = Vec::new();
        self.collect_paths(id, &mut suffix, &mut out);
        out.sort_by(|a, b| (&a.start, &a.edges).cmp(&(&b.start, &b.edges)));
        Ok(out)
    }

    fn collect_paths(&self, id: &str, suffix: &mut Vec<usize>, out: &mut Vec<GraphPath>) {
        let incoming: Vec<usize> = (0..self.edges.len())
            .filter(|&i| self.edges[i].to == id)
            .collect();
        if incoming.is_empty() {
            out.push(GraphPath {
                start: id.to_string(),
                edges: suffix.iter().rev().copied().collect(),
            });
            return;
        }
        for i in incoming {
            suffix.push(i);
            self.collect_paths(&self.edges[i].from, suffix, out);
            suffix.pop();
        }
    }

    /// Applies each change along the path to the start program and checks
    /// the result against the final node's stored program.
    pub fn replay(&self, path: &GraphPath) -> Result<Expr, GraphError> {
        let start = self.endpoint(&path.start)?;
        if !self.roots().contains(&start.id.as_str()) {
            return Err(GraphError::InvalidGraphPath(format!(
                "`{}` is not a root",
                start.id
            )));
        }
        let mut at = start;
        let mut program = start.program.clone();
        for &i in &path.edges {
            let edge = self
                .edges
                .get(i)
                .ok_or_else(|| GraphError::InvalidGraphPath(format!("no edge #{i}")))?;
            if edge.from != at.id {
                return Err(GraphError::InvalidGraphPath(format!(
                    "edge #{i} starts at `{}`, not `{}`",
                    edge.from, at.id
                )));
            }
            program = edge.kind.apply(&program)?;
            at = self.endpoint(&edge.to)?;
        }
        if program != at.program {
            return Err(GraphError::ReplayMismatch {
                node: at.id.clone(),
                replayed: program.to_string(),
                stored: at.program.to_string(),
            });
        }
        Ok(program)
    }

    pub fn describe_path(&self, path: &GraphPath) -> String {
        let mut out = path.start.clone();
        for &i in &path.edges {
            let e = &self.edges[i];
            out.push_str(&format!(" -[{}]-> {}", e.kind, e.to));
        }
        out
    }

    /// Revalidates every node and edge; returns every problem found.
    pub fn check(&self) -> Vec<GraphError> {
        let mut problems: Vec<GraphError> = self
            .nodes
            .values()
            .filter_map(|n| validate_node(n).err())
            .collect();
        let mut acyclic = DevGraph {
            nodes: self.nodes.clone(),
            edges: Vec::new(),
        };
        for edge in &self.edges {
            if let Err(e) = self.validate_edge(edge) {
                problems.push(e);
            }
            if edge.from == edge.to || acyclic.reaches(&edge.to, &edge.from) {
                problems.push(GraphError::CycleCreated {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                });
            }
            acyclic.edges.push(edge.clone());
        }
        problems
    }

    // -- persistence --------------------------------------------------------

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            version: FORMAT_VERSION,
            nodes: self
                .nodes
                .values()
                .map(|n| FileNode {
                    id: n.id.clone(),
                    machine: n.machine.clone(),
                    program: n.program.to_string(),
                    label: n.label.clone(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| FileEdge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    kind: match &e.kind {
                        ChangeKind::Modification { at, replacement } => FileKind::Modification {
                            at: at.steps().iter().map(|s| s.name().to_string()).collect(),
                            replacement: replacement.to_string(),
                        },
                        ChangeKind::Extension { context } => FileKind::Extension {
                            context: context.to_string(),
                        },
                        ChangeKind::Port { port, report } => FileKind::Port {
                            port: port.clone(),
                            report: report.clone(),
                        },
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serialises") + "\n"
    }

    /// Parses and fully validates a graph document.
    pub fn from_json(text: &str) -> Result<DevGraph, GraphError> {
        let (nodes, edges) = decode(text)?;
        let mut g = DevGraph::new();
        for n in nodes {
            g = g.add_node(n)?;
        }
        for e in edges {
            g = g.add_change(e)?;
        }
        Ok(g)
    }

    /// Parses a graph document without validating nodes or edges, so that
    /// [`DevGraph::check`] can report on a corrupted file.
    pub fn from_json_unchecked(text: &str) -> Result<DevGraph, GraphError> {
        let (nodes, edges) = decode(text)?;
        let mut g = DevGraph::new();
        for n in nodes {
            if g.nodes.contains_key(&n.id) {
                return Err(GraphError::DuplicateId(n.id));
            }
            g.nodes.insert(n.id.clone(), n);
        }
        for e in &edges {
            g.endpoint(&e.from)?;
            g.endpoint(&e.to)?;
        }
        g.edges = edges;
        Ok(g)
    }

    pub fn load(path: &FsPath) -> Result<DevGraph, GraphError> {
        DevGraph::from_json(&read(path)?)
    }

    pub fn load_unchecked(path: &FsPath) -> Result<DevGraph, GraphError> {
        DevGraph::from_json_unchecked(&read(path)?)
    }

    /// Writes atomically: a sibling temporary file is renamed over `path`.
    pub fn save(&self, path: &FsPath) -> Result<(), GraphError> {
        let io = |e: std::io::Error| GraphError::Io(format!("{}: {e}", path.display()));
        let mut tmp_name = path.as_os_str().to_owned();
        tmp_name.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp_name);
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(self.to_json().as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }
}

fn read(path: &FsPath) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))
}

fn validate_node(node: &Node) -> Result<(), GraphError> {
    let invalid = |reason: String| GraphError::InvalidProgram {
        id: node.id.clone(),
        reason,
    };
    if node.id.is_empty() {
        return Err(invalid("empty id".into()));
    }
    let machine = Machine::by_name(&node.machine).map_err(|e| invalid(e.to_string()))?;
    machine
        .check_program(&node.program)
        .map_err(|e| invalid(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: u32,
    nodes: Vec<FileNode>,
    edges: Vec<FileEdge>,
}

#[derive(Serialize, Deserialize)]
struct FileNode {
    id: String,
    machine: String,
    program: String,
    #[serde(default)]
    label: String,
}

#[derive(Serialize, Deserialize)]
struct FileEdge {
    from: String,
    to: String,
    #[serde(flatten)]
    kind: FileKind,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum FileKind {
    Modification {
        at: Vec<String>,
        replacement: String,
    },
    Extension {
        context: String,
    },
    Port {
        port: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        report: Option<String>,
    },
}

fn decode(text: &str) -> Result<(Vec<Node>, Vec<Edge>), GraphError> {
    let file: GraphFile =
        serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
    if file.version != FORMAT_VERSION {
        return Err(GraphError::Format(format!(
            "unsupported version {}",
            file.version
        )));
    }
    let fmt_err = |field: String, e: &dyn fmt::Display| GraphError::Format(format!("{field}: {e}"));
    let mut nodes = Vec::new();
    for (i, n) in file.nodes.into_iter().enumerate() {
        let program =
            parse_term(&n.program).map_err(|e| fmt_err(format!("nodes[{i}].program"), &e))?;
        nodes.push(Node {
            id: n.id,
            program,
            machine: n.machine,
            label: n.label,
        });
    }
    let mut edges = Vec::new();
    for (i, e) in file.edges.into_iter().enumerate() {
        let kind = match e.kind {
            FileKind::Modification { at, replacement } => ChangeKind::Modification {
                at: at
                    .join(",")
                    .parse()
                    .map_err(|err| fmt_err(format!("edges[{i}].at"), &err))?,
                replacement: parse_term(&replacement)
                    .map_err(|err| fmt_err(format!("edges[{i}].replacement"), &err))?,
            },
            FileKind::Extension { context } => ChangeKind::Extension {
                context: parse(&context, true)
                    .map_err(|err| fmt_err(format!("edges[{i}].context"), &err))?,
            },
            FileKind::Port { port, report } => ChangeKind::Port { port, report },
        };
        edges.push(Edge {
            from: e.from,
            to: e.to,
            kind,
        });
    }
    Ok((nodes, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Selector;

    fn t(s: &str) -> Expr {
        parse_term(s).unwrap()
    }

    fn node(id: &str, program: &str) -> Node {
        Node::new(id, t(program), "arith", "")
    }

    fn modification(from: &str, to: &str, at: &[Selector], replacement: &str) -> Edge {
        Edge {
            from: from.into(),
            to: to.into(),
            kind: ChangeKind::Modification {
                at: Path(at.to_vec()),
                replacement: t(replacement),
            },
        }
    }

    fn extension(from: &str, to: &str, context: &str) -> Edge {
        Edge {
            from: from.into(),
            to: to.into(),
            kind: ChangeKind::Extension {
                context: parse(context, true).unwrap(),
            },
        }
    }

    /// root --mod--> m --ext--> leaf
    fn chain() -> DevGraph {
        DevGraph::new()
            .add_node(node("root", "\\x. x"))
            .unwrap()
            .add_node(node("m", "\\x. 1"))
            .unwrap()
            .add_node(node("leaf", "(\\x. 1) 2"))
            .unwrap()
            .add_change(modification("root", "m", &[Selector::LamBody], "1"))
            .unwrap()
            .add_change(extension("m", "leaf", "_ 2"))
            .unwrap()
    }

    #[test]
    fn nodes_and_roots() {
        let g = DevGraph::new().add_node(node("a", "\\x. x")).unwrap();
        assert_eq!(g.roots(), vec!["a"]);
        assert_eq!(
            g.add_node(node("a", "1")),
            Err(GraphError::DuplicateId("a".into()))
        );
        let g = g.add_node(node("b", "2")).unwrap();
        assert_eq!(g.roots().len(), 2);
        let bad = Node::new("c", t("add 1 2"), "base", "");
        assert!(matches!(
            g.add_node(bad),
            Err(GraphError::InvalidProgram { .. })
        ));
    }

    #[test]
    fn edges_validate() {
        let g = chain();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.roots(), vec!["root"]);
        let g2 = g.add_node(node("wrong", "\\x. 2")).unwrap();
        assert!(matches!(
            g2.add_change(modification("root", "wrong", &[Selector::LamBody], "1")),
            Err(GraphError::EdgeValidationFailed { .. })
        ));
        let g3 = g
            .add_node(Node::new("other", t("\\x. y"), "base", ""))
            .unwrap();
        assert!(matches!(
            g3.add_change(modification("root", "other", &[Selector::LamBody], "y")),
            Err(GraphError::MachineMismatch { .. })
        ));
        assert!(matches!(
            g.add_change(modification("root", "nowhere", &[], "1")),
            Err(GraphError::UnknownNode(_))
        ));
    }

    #[test]
    fn cycles_are_rejected() {
        let g = DevGraph::new()
            .add_node(node("a", "1"))
            .unwrap()
            .add_node(node("b", "2"))
            .unwrap()
            .add_change(modification("a", "b", &[], "2"))
            .unwrap();
        assert!(matches!(
            g.add_change(modification("b", "a", &[], "1")),
            Err(GraphError::CycleCreated { .. })
        ));
        assert!(matches!(
            g.add_change(modification("a", "a", &[], "1")),
            Err(GraphError::CycleCreated { .. })
        ));
    }

    #[test]
    fn port_edges_may_change_machine() {
        let g = DevGraph::new()
            .add_node(node("src", "add 1 2"))
            .unwrap()
            .add_node(Node::new(
                "dst",
                crate::ports::ProgramTranslation::church_arithmetic()
                    .apply(&t("add 1 2"))
                    .unwrap(),
                "base",
                "",
            ))
            .unwrap();
        let port = |name: &str| Edge {
            from: "src".into(),
            to: "dst".into(),
            kind: ChangeKind::Port {
                port: name.into(),
                report: None,
            },
        };
        assert!(g.add_change(port("church-arithmetic")).is_ok());
        assert_eq!(
            g.add_change(port("nope")),
            Err(GraphError::UnknownPort("nope".into()))
        );
    }

    #[test]
    fn paths_and_replay() {
        let g = chain();
        let root_paths = g.paths_to_node("root").unwrap();
        assert_eq!(
            root_paths,
            vec![GraphPath {
                start: "root".into(),
                edges: vec![]
            }]
        );
        assert_eq!(g.replay(&root_paths[0]).unwrap(), t("\\x. x"));
        let m = g.paths_to_node("m").unwrap();
        assert_eq!(g.replay(&m[0]).unwrap(), t("\\x. 1"));
        let leaf = g.paths_to_node("leaf").unwrap();
        assert_eq!(leaf.len(), 1);
        assert_eq!(g.replay(&leaf[0]).unwrap(), t("(\\x. 1) 2"));
        assert!(matches!(
            g.paths_to_node("zzz"),
            Err(GraphError::UnknownNode(_))
        ));
        assert!(matches!(
            g.replay(&GraphPath {
                start: "m".into(),
                edges: vec![1]
            }),
            Err(GraphError::InvalidGraphPath(_))
        ));
    }

    #[test]
    fn diamond_has_two_paths() {
        let g = DevGraph::new()
            .add_node(node("a", "f x"))
            .unwrap()
            .add_node(node("b", "g x"))
            .unwrap()
            .add_node(node("c", "f y"))
            .unwrap()
            .add_node(node("d", "g y"))
            .unwrap()
            .add_change(modification("a", "b", &[Selector::AppFun], "g"))
            .unwrap()
            .add_change(modification("a", "c", &[Selector::AppArg], "y"))
            .unwrap()
            .add_change(modification("b", "d", &[Selector::AppArg], "y"))
            .unwrap()
            .add_change(modification("c", "d", &[Selector::AppFun], "g"))
            .unwrap();
        let paths = g.paths_to_node("d").unwrap();
        assert_eq!(paths.len(), 2);
        for p in &paths {
            assert_eq!(g.replay(p).unwrap(), t("g y"));
        }
    }

    #[test]
    fn tampering_is_detected() {
        let mut g = chain();
        g.nodes.get_mut("m").unwrap().program = t("\\x. 7");
        assert!(matches!(
            g.replay(&GraphPath {
                start: "root".into(),
                edges: vec![0]
            }),
            Err(GraphError::ReplayMismatch { .. })
        ));
        assert_eq!(g.check().len(), 2);
        assert!(chain().check().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let g = chain();
        let text = g.to_json();
        assert!(text.contains("\"kind\": \"modification\""));
        assert!(text.contains("\"lam-body\""));
        assert_eq!(DevGraph::from_json(&text).unwrap(), g);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.devg.json");
        g.save(&path).unwrap();
        assert_eq!(DevGraph::load(&path).unwrap(), g);
    }

    #[test]
    fn json_errors() {
        let text = chain().to_json().replace("\"extension\"", "\"teleport\"");
        assert!(matches!(
            DevGraph::from_json(&text),
            Err(GraphError::Format(_))
        ));
        let text = chain()
            .to_json()
            .replace("\"replacement\": \"1\"", "\"replacement\": \"2\"");
        assert!(matches!(
            DevGraph::from_json(&text),
            Err(GraphError::EdgeValidationFailed { .. })
        ));
        assert_eq!(
            DevGraph::from_json_unchecked(&text).unwrap().check().len(),
            1
        );
        assert!(matches!(
            DevGraph::from_json("{"),
            Err(GraphError::Format(_))
        ));
    }
}
