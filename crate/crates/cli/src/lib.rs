//! Command-line front end: instance generation, solving, model export,
//! plan evaluation, benchmarking and plotting.
//!
//! Exit codes: 0 success, 2 bad flags or unusable input, 3 infeasible,
//! 4 a limit was hit before any feasible plan was found.

pub mod bench;
pub mod plot;
pub mod solvers;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pisr_core::milp::{build_formulation, Formulation, ModelFormat};
use pisr_core::plan::PlanError;
use pisr_core::{evaluate_plan, generate_instance, ConstraintPolicy, GeneratorConfig, Instance, RoutePlan};

use crate::bench::{render_latex, run_bench, write_csv, BenchConfig, DEFAULT_SIZES};
use crate::solvers::{run_method, Limits, Method};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_LIMIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pisr", version, about = "Multi-UAV persistent surveillance route planner")]
pub struct Cli {
    /// Log verbosity: -v progress lines, -vv debug, -vvv per-node trace.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve an instance and write the plan.
    Solve(SolveArgs),
    /// Write a MILP model in LP or MPS format.
    Emit(EmitArgs),
    /// Report timings and feasibility of a plan.
    Eval(EvalArgs),
    /// Run a seeded instance suite and tabulate the results.
    Bench(BenchArgs),
    /// Draw a plan as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub tasks: usize,
    #[arg(long, default_value_t = 4)]
    pub vehicles: usize,
    #[arg(long, default_value_t = 4000.0)]
    pub grid: f64,
    /// Constrain the task farthest from the depot.
    #[arg(long)]
    pub farthest: Option<bool>,
    /// Number of tasks nearest to the farthest one that are also constrained.
    #[arg(long)]
    pub nearest_k: Option<usize>,
    #[arg(long, default_value_t = 1.1)]
    pub factor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Node budget; the heuristic defaults to one million.
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Wall-clock limit in seconds for the branch-and-bound methods.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormulationArg {
    F1,
    F2,
    F3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Lp,
    Mps,
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    #[arg(long, value_enum)]
    pub formulation: FormulationArg,
    #[arg(long, value_enum, default_value = "lp")]
    pub format: FormatArg,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed0: u64,
    #[arg(long, default_value_t = 4)]
    pub vehicles: usize,
    #[arg(long, value_delimiter = ',', value_enum, default_values_t = [Method::BnbF1, Method::BnbF3, Method::Heuristic])]
    pub methods: Vec<Method>,
    /// Per-cell wall-clock limit in seconds for the branch-and-bound methods.
    #[arg(long, default_value_t = 120.0)]
    pub time_limit: f64,
    /// Heuristic node budget.
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also print the rows as a LaTeX table.
    #[arg(long)]
    pub latex: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

type Outcome = Result<i32, Failure>;

/// Runs one command, writing reports to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Outcome {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args, out),
        Command::Solve(args) => cmd_solve(&args, out),
        Command::Emit(args) => cmd_emit(&args, out),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Bench(args) => cmd_bench(&args, out),
        Command::Plot(args) => cmd_plot(&args),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure::usage(format!("cannot write output: {e}")))
}

pub fn load_instance(path: &Path) -> Result<Instance, Failure> {
    Instance::from_json(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_plan(path: &Path, instance: &Instance) -> Result<RoutePlan, Failure> {
    RoutePlan::from_json_for(&read(path)?, instance).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Outcome {
    let protocol = ConstraintPolicy::protocol(args.tasks);
    let policy = ConstraintPolicy {
        farthest: args.farthest.unwrap_or(protocol.farthest),
        nearest_k: args.nearest_k.unwrap_or(protocol.nearest_k),
        factor: args.factor,
    };
    let config = GeneratorConfig::new(args.tasks, args.vehicles).with_policy(policy).with_grid(args.grid);
    let instance = generate_instance(args.seed, &config).map_err(|e| Failure::usage(e.to_string()))?;
    write_file(&args.out, &instance.to_json())?;
    emit(out, &format!("{}\n", instance.hash()))?;
    Ok(EXIT_OK)
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Outcome {
    let instance = load_instance(&args.input)?;
    let time = match args.time_limit {
        Some(t) if t.is_finite() && t >= 0.0 => Some(Duration::from_secs_f64(t)),
        Some(t) => return Err(Failure::usage(format!("bad --time-limit {t}"))),
        None => None,
    };
    let limits = Limits { nodes: args.node_limit, time };
    let report = run_method(&instance, args.method, &limits);
    if let Some(message) = &report.error {
        return Err(Failure::usage(message.clone()));
    }
    if let (Some(path), Some(plan)) = (&args.out, &report.plan) {
        write_file(path, &plan.to_json(&instance.hash()))?;
    }
    emit(out, &format!("{}\n", report.summary()))?;
    Ok(report.outcome.exit_code())
}

fn cmd_emit(args: &EmitArgs, out: &mut dyn Write) -> Outcome {
    let instance = load_instance(&args.input)?;
    let formulation = match args.formulation {
        FormulationArg::F1 => Formulation::F1,
        FormulationArg::F2 => Formulation::F2,
        FormulationArg::F3 => Formulation::F3,
    };
    let format = match args.format {
        FormatArg::Lp => ModelFormat::Lp,
        FormatArg::Mps => ModelFormat::Mps,
    };
    let model = build_formulation(&instance, formulation);
    let text = model.write(format).map_err(|e| Failure::usage(e.to_string()))?;
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => emit(out, &text)?,
    }
    Ok(EXIT_OK)
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Outcome {
    let instance = load_instance(&args.input)?;
    let plan = load_plan(&args.plan, &instance)?;
    let metrics = match evaluate_plan(&instance, &plan) {
        Ok(m) => m,
        Err(e @ PlanError::MissingTask(_)) => return Err(Failure::usage(format!("MissingTask: {e}"))),
        Err(e) => return Err(Failure::usage(e.to_string())),
    };
    let mut text = String::new();
    let _ = writeln!(text, "task cycle u v D R");
    for t in &metrics.timings {
        let limit = instance.revisit_limit(t.task).map_or_else(|| "-".to_string(), |r| format!("{r:.6}"));
        let _ = writeln!(text, "{} {} {:.6} {:.6} {:.6} {}", t.task, t.cycle + 1, t.u, t.v, t.v, limit);
    }
    let _ = writeln!(text, "cycle L tasks");
    for (k, (len, cycle)) in metrics.cycle_lengths.iter().zip(plan.cycles()).enumerate() {
        let tasks: Vec<String> = cycle.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(text, "{} {:.6} {}", k + 1, len, tasks.join(","));
    }
    let _ = writeln!(text, "z {:.6}", metrics.z);
    let _ = writeln!(text, "constraint task R L ok");
    for (&task, &limit) in instance.revisit_limits() {
        let len = metrics.cycle_lengths[metrics.cycle_of(task)];
        let ok = !metrics.violations.iter().any(|v| v.task == task);
        let _ = writeln!(text, "revisit {task} {limit:.6} {len:.6} {}", if ok { "yes" } else { "no" });
    }
    for v in &metrics.violations {
        let _ = writeln!(
            text,
            "violation: task {} cycle length {:.6} exceeds revisit limit {:.6}",
            v.task, v.cycle_length, v.limit
        );
    }
    let _ = writeln!(text, "feasible {}", metrics.feasible);
    emit(out, &text)?;
    Ok(if metrics.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

/// Worker count from `PISR_THREADS`, ignored unless a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("PISR_THREADS").ok()?.trim().parse().ok().filter(|&t: &usize| t > 0)
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Outcome {
    if !(args.time_limit.is_finite() && args.time_limit >= 0.0) {
        return Err(Failure::usage(format!("bad --time-limit {}", args.time_limit)));
    }
    if args.sizes.is_empty() || args.methods.is_empty() {
        return Err(Failure::usage("--sizes and --methods must not be empty"));
    }
    let mut methods = args.methods.clone();
    methods.dedup();
    let config = BenchConfig {
        sizes: args.sizes.clone(),
        count: args.count,
        seed0: args.seed0,
        vehicles: args.vehicles,
        methods,
        limits: Limits { nodes: None, time: Some(Duration::from_secs_f64(args.time_limit)) },
        heuristic_nodes: args.node_limit,
        threads: threads_from_env(),
    };
    let rows = run_bench(&config);
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv).map_err(|e| Failure::usage(e.to_string()))?;
    let csv = String::from_utf8(csv).expect("csv output is utf-8");
    match &args.out {
        Some(path) => write_file(path, &csv)?,
        None => emit(out, &csv)?,
    }
    if args.latex {
        emit(out, &render_latex(&rows))?;
    }
    Ok(EXIT_OK)
}

fn cmd_plot(args: &PlotArgs) -> Outcome {
    let instance = load_instance(&args.input)?;
    let plan = load_plan(&args.plan, &instance)?;
    plan.validate(&instance).map_err(|e| Failure::usage(e.to_string()))?;
    write_file(&args.out, &plot::render_svg(&instance, &plan))?;
    Ok(EXIT_OK)
}

/// Parses `argv` and runs it, printing failures to stderr.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
