//! `kbsm`: evaluate, enumerate and trace programs, check ports, manage
//! development graphs and run the inference engine.
//!
//! Exit codes: 0 success, 1 stuck evaluation or failed verdict, 2 usage or
//! parse error, 3 inconclusive within the budget.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kbsm::devgraph::{ChangeKind, DevGraph, Edge, GraphError, Node};
use kbsm::inference::{infer, parse_rules, show_facts};
use kbsm::machine::{self, readback_within, Machine, READBACK_LIMIT};
use kbsm::ndmachine::{calc_tree, enumerate, Diagnostics, SearchBudget, Strategy};
use kbsm::ports::{
    check_completeness, check_consistency_conventional, check_consistency_kbs, check_equivalence,
    parse_corpus, OutcomeTranslation, Port, ProgramTranslation, Verdict, BUILTIN_PORTS,
};
use kbsm::rewrite::RewriteTable;
use kbsm::syntax::{parse, parse_term, Path as TermPath};
use kbsm::{EvalResult, Expr};

const OK: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;
const INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "kbsm",
    version,
    about = "SECD machine workbench for conventional and non-deterministic programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a conventional program on the deterministic machine.
    Eval {
        /// Program file (`-` for standard input).
        file: PathBuf,
        #[arg(long, default_value = "arith")]
        machine: String,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Enumerate the outcomes of a program on the non-deterministic machine.
    Enumerate(SearchArgs),
    /// Print the calculation tree of a program.
    Tree(SearchArgs),
    /// Check a port (or machine equivalence) over a corpus.
    CheckPort(CheckPortArgs),
    /// Manage a development graph.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Run the inference engine on a rule file.
    Infer {
        #[arg(long)]
        rules: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long, default_value = "dfs")]
    strategy: Strategy,
    #[arg(long, default_value_t = 100_000)]
    max_steps: u64,
    #[arg(long, default_value_t = 10_000)]
    max_depth: u64,
    /// Stop after this many distinct outcomes (default: unlimited).
    #[arg(long)]
    max_outcomes: Option<usize>,
}

impl BudgetArgs {
    fn budget(&self) -> SearchBudget {
        let b = SearchBudget::new(self.strategy, self.max_steps, self.max_depth);
        match self.max_outcomes {
            Some(cap) => b.with_max_outcomes(cap),
            None => b,
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Program file (`-` for standard input).
    file: PathBuf,
    #[arg(long, default_value = "arith")]
    machine: String,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Conventional,
    Kbs,
    Completeness,
    Equivalence,
}

#[derive(Args)]
struct CheckPortArgs {
    /// A built-in port.
    #[arg(long, conflicts_with = "rewrites")]
    port: Option<String>,
    /// A rewrite-table file used as the program translation.
    #[arg(long)]
    rewrites: Option<PathBuf>,
    #[arg(long, default_value = "arith")]
    source: String,
    #[arg(long, default_value = "arith")]
    target: String,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "kbs")]
    mode: Mode,
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Create an empty graph file.
    Init {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Add a program node.
    AddNode {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        id: String,
        /// Program source text.
        #[arg(long)]
        program: String,
        #[arg(long, default_value = "arith")]
        machine: String,
        #[arg(long, default_value = "")]
        label: String,
    },
    /// Add a modification edge. The target node is created when it does not
    /// exist yet.
    AddMod {
        #[command(flatten)]
        edge: EdgeArgs,
        /// Comma-separated selectors, e.g. `lam-body,app-arg`.
        #[arg(long, default_value = "")]
        at: String,
        #[arg(long)]
        replacement: String,
    },
    /// Add an extension edge.
    AddExt {
        #[command(flatten)]
        edge: EdgeArgs,
        /// A context with one hole `_`.
        #[arg(long)]
        context: String,
    },
    /// Add a port edge.
    AddPort {
        #[command(flatten)]
        edge: EdgeArgs,
        #[arg(long)]
        port: String,
        /// Machine of a newly created target node (default: the source's).
        #[arg(long)]
        machine: Option<String>,
        /// Reference to the check report justifying the port.
        #[arg(long)]
        report: Option<String>,
        /// Refuse the edge unless `--report` is given.
        #[arg(long)]
        require_report: bool,
    },
    /// List every path from a root to a node.
    Paths {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: String,
    },
    /// Replay the paths to a node and print its program.
    Replay {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: String,
    },
    /// Revalidate every node and edge.
    Check {
        #[arg(long)]
        graph: PathBuf,
    },
}

#[derive(Args)]
struct EdgeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    /// Label of a newly created target node.
    #[arg(long, default_value = "")]
    label: String,
}

/// A failure that ends the command with a message on standard error.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: USAGE,
            message: message.into(),
        }
    }
}

type Outcome = Result<u8, Failure>;

/// Evaluation and readback recurse over program structure, so deep terms need
/// more stack than the main thread provides.
const WORKER_STACK: usize = 256 << 20;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let worker = std::thread::Builder::new()
        .name("kbsm".into())
        .stack_size(WORKER_STACK)
        .spawn(move || dispatch(cli));
    let result = match worker.map(|handle| handle.join()) {
        Ok(Ok(result)) => result,
        Ok(Err(_)) => Err(Failure {
            code: FAILED,
            message: "internal error".into(),
        }),
        Err(e) => Err(Failure {
            code: FAILED,
            message: format!("cannot start worker thread: {e}"),
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("kbsm: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Command::Eval {
            file,
            machine,
            budget,
        } => cmd_eval(&file, &machine, budget),
        Command::Enumerate(args) => cmd_enumerate(&args),
        Command::Tree(args) => cmd_tree(&args),
        Command::CheckPort(args) => cmd_check_port(&args),
        Command::Graph { command } => cmd_graph(command),
        Command::Infer { rules, budget } => cmd_infer(&rules, &budget),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        return std::io::read_to_string(std::io::stdin())
            .map_err(|e| Failure::usage(format!("stdin: {e}")));
    }
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_program(path: &Path) -> Result<Expr, Failure> {
    let text = read_text(path)?;
    parse_term(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn machine(name: &str) -> Result<Machine, Failure> {
    Machine::by_name(name).map_err(|e| Failure::usage(e.to_string()))
}

fn cmd_eval(file: &Path, machine_name: &str, budget: u64) -> Outcome {
    let m = machine(machine_name)?;
    let e = read_program(file)?;
    let result = machine::run(&m, &e, budget).map_err(|e| Failure::usage(e.to_string()))?;
    let too_large = || {
        println!("TOO LARGE: outcome readback exceeds {READBACK_LIMIT} nodes");
        INCONCLUSIVE
    };
    Ok(match result {
        EvalResult::Value(v) => match readback_within(&v, READBACK_LIMIT) {
            Some(t) => {
                println!("{t}");
                OK
            }
            None => too_large(),
        },
        EvalResult::Halted(v) => match readback_within(&v, READBACK_LIMIT) {
            Some(t) => {
                println!("HALTED: {t}");
                OK
            }
            None => too_large(),
        },
        EvalResult::Stuck { reason, .. } => {
            println!("STUCK: {reason}");
            FAILED
        }
        EvalResult::Diverged(n) => {
            println!("DIVERGED({n})");
            INCONCLUSIVE
        }
    })
}

fn completion_line(complete: bool, d: &Diagnostics) -> (String, u8) {
    if complete {
        ("COMPLETE".into(), OK)
    } else {
        (format!("TRUNCATED ({d})"), INCONCLUSIVE)
    }
}

fn cmd_enumerate(args: &SearchArgs) -> Outcome {
    let m = machine(&args.machine)?;
    let k = read_program(&args.file)?;
    let set = enumerate(&m, &k, &args.budget.budget());
    for line in set.rendered() {
        println!("{line}");
    }
    let (line, code) = completion_line(set.complete, &set.diagnostics);
    println!("{line}");
    Ok(code)
}

fn cmd_tree(args: &SearchArgs) -> Outcome {
    let m = machine(&args.machine)?;
    let k = read_program(&args.file)?;
    let (tree, set) = calc_tree(&m, &k, &args.budget.budget());
    print!("{}", tree.render());
    let (line, code) = completion_line(set.complete, &set.diagnostics);
    println!("{line}");
    Ok(code)
}

fn cmd_check_port(args: &CheckPortArgs) -> Outcome {
    let source = machine(&args.source)?;
    let target = machine(&args.target)?;
    let corpus_text = read_text(&args.corpus)?;
    let corpus = parse_corpus(&corpus_text)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.corpus.display())))?;

    let report = if let Mode::Equivalence = args.mode {
        check_equivalence(&source, &target, &corpus, args.budget)
    } else {
        let port = match (&args.port, &args.rewrites) {
            (Some(name), None) => Port::builtin(name, source, target).ok_or_else(|| {
                Failure::usage(format!(
                    "unknown port `{name}` (known: {})",
                    BUILTIN_PORTS.join(", ")
                ))
            })?,
            (None, Some(path)) => {
                let table = RewriteTable::parse(&read_text(path)?)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                let name = path
                    .file_stem()
                    .map_or("rewrites".into(), |s| s.to_string_lossy().into_owned());
                Port::new(
                    source,
                    target,
                    ProgramTranslation::from_rewrites(&name, table),
                    OutcomeTranslation::identity(),
                )
            }
            _ => {
                return Err(Failure::usage(
                    "exactly one of --port or --rewrites is required",
                ))
            }
        };
        match args.mode {
            Mode::Conventional => check_consistency_conventional(&port, &corpus, args.budget)
                .map_err(|e| Failure::usage(e.to_string()))?,
            Mode::Kbs => check_consistency_kbs(&port, &corpus, args.budget),
            Mode::Completeness => check_completeness(&port, &corpus, args.budget),
            Mode::Equivalence => unreachable!(),
        }
    };
    println!("{report}");
    Ok(if report.verdict == Verdict::Inconsistent {
        FAILED
    } else if !report.inconclusive.is_empty() {
        INCONCLUSIVE
    } else if !report.passes() {
        FAILED
    } else {
        OK
    })
}

fn graph_failure(e: GraphError) -> Failure {
    let code = match e {
        GraphError::Format(_) | GraphError::Io(_) => USAGE,
        _ => FAILED,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn load_graph(path: &Path) -> Result<DevGraph, Failure> {
    DevGraph::load(path).map_err(graph_failure)
}

fn save_graph(g: &DevGraph, path: &Path) -> Result<(), Failure> {
    g.save(path).map_err(graph_failure)
}

/// Adds `kind` from `args.from` to `args.to`, first creating the target node
/// from the recomputed program when it does not exist.
fn add_edge(args: &EdgeArgs, kind: ChangeKind, new_machine: Option<&str>) -> Outcome {
    let mut g = load_graph(&args.graph)?;
    let from = g
        .node(&args.from)
        .ok_or_else(|| graph_failure(GraphError::UnknownNode(args.from.clone())))?
        .clone();
    if g.node(&args.to).is_none() {
        let program = kind.apply(&from.program).map_err(graph_failure)?;
        let machine = new_machine.unwrap_or(&from.machine);
        g = g
            .add_node(Node::new(&args.to, program, machine, &args.label))
            .map_err(graph_failure)?;
    }
    let g = g
        .add_change(Edge {
            from: args.from.clone(),
            to: args.to.clone(),
            kind,
        })
        .map_err(graph_failure)?;
    save_graph(&g, &args.graph)?;
    println!("{}", g.node(&args.to).expect("target exists").program);
    Ok(OK)
}

fn cmd_graph(command: GraphCommand) -> Outcome {
    match command {
        GraphCommand::Init { graph, force } => {
            if graph.exists() && !force {
                return Err(Failure::usage(format!(
                    "{} exists (use --force to overwrite)",
                    graph.display()
                )));
            }
            save_graph(&DevGraph::new(), &graph)?;
            println!("initialised {}", graph.display());
            Ok(OK)
        }
        GraphCommand::AddNode {
            graph,
            id,
            program,
            machine,
            label,
        } => {
            let program = parse_term(&program).map_err(|e| Failure::usage(e.to_string()))?;
            let g = load_graph(&graph)?
                .add_node(Node::new(&id, program, &machine, &label))
                .map_err(graph_failure)?;
            save_graph(&g, &graph)?;
            println!("added {id}");
            Ok(OK)
        }
        GraphCommand::AddMod {
            edge,
            at,
            replacement,
        } => {
            let at: TermPath = at.parse().map_err(Failure::usage)?;
            let replacement =
                parse_term(&replacement).map_err(|e| Failure::usage(e.to_string()))?;
            add_edge(&edge, ChangeKind::Modification { at, replacement }, None)
        }
        GraphCommand::AddExt { edge, context } => {
            let context = parse(&context, true).map_err(|e| Failure::usage(e.to_string()))?;
            add_edge(&edge, ChangeKind::Extension { context }, None)
        }
        GraphCommand::AddPort {
            edge,
            port,
            machine: target_machine,
            report,
            require_report,
        } => {
            if require_report && report.is_none() {
                return Err(Failure::usage("--require-report given but no --report"));
            }
            if let Some(m) = &target_machine {
                machine(m)?;
            }
            add_edge(
                &edge,
                ChangeKind::Port { port, report },
                target_machine.as_deref(),
            )
        }
        GraphCommand::Paths { graph, node } => {
            let g = load_graph(&graph)?;
            for p in g.paths_to_node(&node).map_err(graph_failure)? {
                println!("{}", g.describe_path(&p));
            }
            Ok(OK)
        }
        GraphCommand::Replay { graph, node } => {
            let g = load_graph(&graph)?;
            let paths = g.paths_to_node(&node).map_err(graph_failure)?;
            let mut program = None;
            for p in &paths {
                program = Some(g.replay(p).map_err(graph_failure)?);
            }
            println!("{}", program.expect("at least one path"));
            Ok(OK)
        }
        GraphCommand::Check { graph } => {
            let g = DevGraph::load_unchecked(&graph).map_err(graph_failure)?;
            let problems = g.check();
            if problems.is_empty() {
                println!(
                    "OK ({} nodes, {} edges)",
                    g.nodes().count(),
                    g.edges().len()
                );
                Ok(OK)
            } else {
                for p in &problems {
                    println!("INVALID: {p}");
                }
                Ok(FAILED)
            }
        }
    }
}

fn cmd_infer(rules: &Path, budget: &BudgetArgs) -> Outcome {
    let text = read_text(rules)?;
    let system =
        parse_rules(&text).map_err(|e| Failure::usage(format!("{}: {e}", rules.display())))?;
    let result = infer(&system.rules, &system.goal, &system.start, &budget.budget());
    let mut lines: Vec<String> = result.outcomes.iter().map(show_facts).collect();
    lines.sort();
    for line in lines {
        println!("{line}");
    }
    let (line, code) = completion_line(result.complete, &result.diagnostics);
    println!("{line}");
    Ok(code)
}
