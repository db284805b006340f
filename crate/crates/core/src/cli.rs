//! The `pjtree` command line: `plan`, `count`, `validate` and `convert`.
//!
//! [`run`] takes its streams as arguments so the whole driver is testable
//! in-process. Exit codes: 0 success, 1 validation failure, 2 parse or I/O
//! error, 3 resource cap exceeded.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::add::{self, AddError, DiagramOrder};
use crate::decomposition::{build_td_minfill, parse_td, td_validate, TdError, TdStreamReader, TdViolation, TreeDecomposition};
use crate::formula::{gaifman_graph, parse_cnf, CnfError, CnfFormula};
use crate::jointree::{read_jt, tree_to_td, validate, write_jt, JtError, ProjectJoinTree, TreeError, Violation};
use crate::oracle::{brute_force_wmc, make_nice, nice_td_wmc, OracleError};
use crate::order::OrderHeuristic;
use crate::planner::htb::{build_tree, ClauseRank, Clustering, HtbConfig, HtbError};
use crate::planner::td::{best_of_stream, td_to_pjt, CostModel, TdPlanError, DEFAULT_KAPPA};
use crate::tensor::{estimate_flops, valuate_tensor, TensorError};

#[derive(Debug, Parser)]
#[command(name = "pjtree", version, about = "Weighted model counting with project-join trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a project-join tree and print it in JT format.
    Plan(PlanArgs),
    /// Compute the weighted model count.
    Count(CountArgs),
    /// Check a JT or PACE decomposition against a CNF.
    Validate(ValidateArgs),
    /// Turn a JT into a PACE decomposition or the reverse.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlannerKind {
    Htb,
    Td,
    TdStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExecutorKind {
    Add,
    Tensor,
    OracleBrute,
    OracleNicetd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostKind {
    Add,
    Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Human,
    Kv,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// DIMACS CNF file, optionally with `w` weight lines.
    pub cnf: PathBuf,
    #[arg(long, value_enum, default_value = "htb")]
    pub planner: PlannerKind,
    /// Cluster variable order for the heuristic planner.
    #[arg(long, default_value = "invlexp", value_parser = parse_order_name)]
    pub order: String,
    #[arg(long, default_value = "be", value_parser = parse_rank)]
    pub rank: ClauseRank,
    #[arg(long, default_value = "tree", value_parser = parse_clustering)]
    pub cluster: Clustering,
    /// PACE decomposition file, or `-` for standard input. Without it the
    /// `td` planner uses a built-in min-fill decomposition.
    #[arg(long)]
    pub td: Option<String>,
    /// Stream stopping coefficient, seconds per cost unit.
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    pub kappa: f64,
    #[arg(long, value_enum, default_value = "add")]
    pub cost: CostKind,
    /// Seed for the `random` order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Use this JT instead of planning.
    #[arg(long)]
    pub jt: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "add")]
    pub executor: ExecutorKind,
    /// Diagram variable order: any order name, or `identity`.
    #[arg(long, default_value = "mcs")]
    pub diagram_order: String,
    #[arg(long, value_enum, default_value = "human")]
    pub emit: Emit,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    pub cnf: PathBuf,
    #[arg(long, conflicts_with = "td", required_unless_present = "td")]
    pub jt: Option<PathBuf>,
    #[arg(long)]
    pub td: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    pub cnf: PathBuf,
    /// JT input; prints a PACE decomposition.
    #[arg(long, conflicts_with = "td", required_unless_present = "td")]
    pub jt: Option<PathBuf>,
    /// PACE input (`-` for standard input); prints a JT.
    #[arg(long)]
    pub td: Option<String>,
}

fn parse_order_name(s: &str) -> Result<String, String> {
    OrderHeuristic::parse(s, 0)
        .map(|_| s.to_string())
        .ok_or_else(|| format!("unknown order `{s}`"))
}

fn parse_rank(s: &str) -> Result<ClauseRank, String> {
    s.parse()
}

fn parse_clustering(s: &str) -> Result<Clustering, String> {
    s.parse()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("CNF: {0}")]
    Cnf(#[from] CnfError),
    #[error("JT: {0}")]
    Jt(#[from] JtError),
    #[error("TD: {0}")]
    Td(#[from] TdError),
    #[error("invalid project-join tree")]
    InvalidTree(Vec<Violation>),
    #[error("invalid tree decomposition")]
    InvalidTd(Vec<TdViolation>),
    #[error(transparent)]
    Htb(#[from] HtbError),
    #[error(transparent)]
    TdPlan(#[from] TdPlanError),
    #[error(transparent)]
    Add(AddError),
    #[error(transparent)]
    Tensor(TensorError),
    #[error(transparent)]
    Oracle(OracleError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidTree(_) | CliError::InvalidTd(_) => 1,
            CliError::TdPlan(TdPlanError::ClauseNotCovered { .. }) => 1,
            CliError::Add(AddError::InvalidTree(_)) | CliError::Tensor(TensorError::InvalidTree(_)) => 1,
            CliError::Oracle(OracleError::ClauseNotCovered { .. }) => 1,
            CliError::Tensor(TensorError::CapExceeded { .. } | TensorError::TooLarge { .. }) => 3,
            CliError::Oracle(OracleError::TooManyVariables { .. }) => 3,
            _ => 2,
        }
    }

    /// Lines describing the failure, one violation per line.
    pub fn lines(&self) -> Vec<String> {
        match self {
            CliError::InvalidTree(v) | CliError::Add(AddError::InvalidTree(v)) | CliError::Tensor(TensorError::InvalidTree(v)) => {
                v.iter().map(|x| x.to_string()).collect()
            }
            CliError::InvalidTd(v) => v.iter().map(|x| x.to_string()).collect(),
            other => vec![other.to_string()],
        }
    }
}

impl From<AddError> for CliError {
    fn from(e: AddError) -> Self {
        CliError::Add(e)
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        CliError::Tensor(e)
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Oracle(e)
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::Invalid(v) => CliError::InvalidTree(v),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command, stdin, out, err) {
        Ok(code) => code,
        Err(e) => {
            for line in e.lines() {
                let _ = writeln!(err, "error: {line}");
            }
            e.exit_code()
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn read_source(source: &str, stdin: &mut dyn BufRead) -> Result<String, CliError> {
    if source == "-" {
        let mut text = String::new();
        stdin.read_to_string(&mut text).map_err(|e| CliError::Io {
            path: "<stdin>".into(),
            message: e.to_string(),
        })?;
        Ok(text)
    } else {
        read_file(Path::new(source))
    }
}

fn io_error(e: std::io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        message: e.to_string(),
    }
}

fn load_cnf(path: &Path) -> Result<CnfFormula, CliError> {
    Ok(parse_cnf(&read_file(path)?)?)
}

/// A planned tree and a label for the planner that made it.
struct Planned {
    tree: ProjectJoinTree,
    planner: String,
}

fn plan(formula: &CnfFormula, args: &PlanArgs, stdin: &mut dyn BufRead) -> Result<Planned, CliError> {
    match args.planner {
        PlannerKind::Htb => {
            let order = OrderHeuristic::parse(&args.order, args.seed).expect("validated by clap");
            let cfg = HtbConfig::new(order, args.rank, args.cluster);
            Ok(Planned {
                tree: build_tree(formula, &cfg)?,
                planner: format!("htb {cfg}"),
            })
        }
        PlannerKind::Td => {
            let (td, source) = match &args.td {
                Some(path) => (parse_td(&read_source(path, stdin)?)?, "file"),
                None => (build_td_minfill(&gaifman_graph(formula)), "minfill"),
            };
            td_validate(&td, &gaifman_graph(formula)).map_err(CliError::InvalidTd)?;
            Ok(Planned {
                tree: td_to_pjt(formula, &td)?,
                planner: format!("td {source} tw={}", td.width()),
            })
        }
        PlannerKind::TdStream => {
            let source = args
                .td
                .as_deref()
                .ok_or_else(|| CliError::Usage("--planner td-stream needs --td FILE|-".into()))?;
            let cost = match args.cost {
                CostKind::Add => CostModel::Add,
                CostKind::Tensor => CostModel::Tensor,
            };
            let outcome = if source == "-" {
                best_of_stream(formula, TdStreamReader::new(stdin), cost, args.kappa)?
            } else {
                let file = fs::File::open(source).map_err(|e| CliError::Io {
                    path: source.to_string(),
                    message: e.to_string(),
                })?;
                best_of_stream(formula, TdStreamReader::new(std::io::BufReader::new(file)), cost, args.kappa)?
            };
            Ok(Planned {
                tree: outcome.tree,
                planner: format!("td-stream chosen={} seen={}", outcome.chosen + 1, outcome.seen),
            })
        }
    }
}

fn execute(
    command: &Command,
    stdin: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        Command::Plan(args) => {
            let formula = load_cnf(&args.cnf)?;
            let planned = plan(&formula, args, stdin)?;
            let tree = planned.tree;
            let width = tree.width(&formula);
            let mut text = write_jt(&tree)?;
            text.push_str(&format!("c planner {}\n", planned.planner));
            text.push_str(&format!("c width {width}\n"));
            text.push_str(&format!("c cost_add {}\n", 2f64.powi(width as i32)));
            text.push_str(&format!("c cost_tensor {}\n", estimate_flops(&tree, &formula)));
            out.write_all(text.as_bytes()).map_err(io_error)?;
            Ok(0)
        }
        Command::Count(args) => count(args, stdin, out, err),
        Command::Validate(args) => {
            let formula = load_cnf(&args.cnf)?;
            let problems: Vec<String> = if let Some(jt) = &args.jt {
                let tree = read_jt(&read_file(jt)?)?;
                match validate(&tree, &formula) {
                    Ok(()) => Vec::new(),
                    Err(v) => v.iter().map(|x| x.to_string()).collect(),
                }
            } else {
                let td = parse_td(&read_source(args.td.as_deref().expect("clap requires one"), stdin)?)?;
                match td_validate(&td, &gaifman_graph(&formula)) {
                    Ok(()) => Vec::new(),
                    Err(v) => v.iter().map(|x| x.to_string()).collect(),
                }
            };
            if problems.is_empty() {
                writeln!(out, "ok").map_err(io_error)?;
                Ok(0)
            } else {
                for p in &problems {
                    writeln!(out, "{p}").map_err(io_error)?;
                }
                Ok(1)
            }
        }
        Command::Convert(args) => {
            let formula = load_cnf(&args.cnf)?;
            let text = if let Some(jt) = &args.jt {
                let tree = read_jt(&read_file(jt)?)?;
                tree_to_td(&tree, &formula)?.to_pace()
            } else {
                let td = parse_td(&read_source(args.td.as_deref().expect("clap requires one"), stdin)?)?;
                td_validate(&td, &gaifman_graph(&formula)).map_err(CliError::InvalidTd)?;
                write_jt(&td_to_pjt(&formula, &td)?)?
            };
            out.write_all(text.as_bytes()).map_err(io_error)?;
            Ok(0)
        }
    }
}

fn diagram_order(name: &str, formula: &CnfFormula, seed: u64) -> Result<DiagramOrder, CliError> {
    if name == "identity" {
        return Ok(DiagramOrder::identity(formula.var_count));
    }
    let h = OrderHeuristic::parse(name, seed).ok_or_else(|| CliError::Usage(format!("unknown diagram order `{name}`")))?;
    Ok(DiagramOrder::from_var_order(&h.order(&gaifman_graph(formula))))
}

fn count(args: &CountArgs, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let start = Instant::now();
    let formula = load_cnf(&args.plan.cnf)?;
    let mut diag: Vec<(&str, String)> = Vec::new();
    let needs_tree = !matches!(args.executor, ExecutorKind::OracleBrute) || args.jt.is_some();
    let tree = if needs_tree {
        let planned = match &args.jt {
            Some(path) => Planned {
                tree: read_jt(&read_file(path)?)?,
                planner: "jt".into(),
            },
            None => plan(&formula, &args.plan, stdin)?,
        };
        validate(&planned.tree, &formula).map_err(CliError::InvalidTree)?;
        diag.push(("planner", planned.planner));
        diag.push(("width", planned.tree.width(&formula).to_string()));
        Some(planned.tree)
    } else {
        None
    };
    let value = match args.executor {
        ExecutorKind::Add => {
            diag.push(("executor", "add".into()));
            let order = diagram_order(&args.diagram_order, &formula, args.plan.seed)?;
            add::valuate(tree.as_ref().expect("planned"), &formula, &order)?
        }
        ExecutorKind::Tensor => {
            diag.push(("executor", "tensor".into()));
            let (value, stats) = valuate_tensor(tree.as_ref().expect("planned"), &formula)?;
            diag.push(("max_rank", stats.max_rank.to_string()));
            diag.push(("flops", stats.flops.to_string()));
            value
        }
        ExecutorKind::OracleBrute => {
            diag.push(("executor", "oracle-brute".into()));
            brute_force_wmc(&formula)?
        }
        ExecutorKind::OracleNicetd => {
            diag.push(("executor", "oracle-nicetd".into()));
            let td: TreeDecomposition = tree_to_td(tree.as_ref().expect("planned"), &formula)?;
            nice_td_wmc(&formula, &make_nice(&td)?)?
        }
    };
    let mut text = String::new();
    match args.emit {
        Emit::Human => {
            for (k, v) in &diag {
                text.push_str(&format!("c {k} {v}\n"));
            }
            text.push_str(&format!("{value}\n"));
        }
        Emit::Kv => {
            for (k, v) in &diag {
                text.push_str(&format!("{k}={v}\n"));
            }
            text.push_str(&format!("count={value}\n"));
        }
    }
    out.write_all(text.as_bytes()).map_err(io_error)?;
    // Timing would break byte-identical output, so it goes to stderr.
    let _ = writeln!(err, "c elapsed {:.6}", start.elapsed().as_secs_f64());
    Ok(0)
}
