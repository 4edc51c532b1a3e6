#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ipop_core::analysis::TargetGrid;
use ipop_core::experiment::{analyze_dir, run_plan, Algorithm, ExperimentPlan};
use ipop_core::objectives::FunctionId;

#[derive(Parser)]
#[command(
    name = "ipop",
    version,
    about = "Parallel IPOP-CMA-ES experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write one log per (algorithm, problem, run).
    Run(Box<RunArgs>),
    /// Compute ERT, ECDF, speedup and best-K tables for a run directory.
    Analyze(AnalyzeArgs),
    /// Print the available objective functions.
    ListFunctions,
}

#[derive(Args)]
struct RunArgs {
    /// Plan file (`key = value` lines); a previous manifest also works.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    dim: Option<Vec<usize>>,
    /// Added cost per evaluation, in milliseconds.
    #[arg(long, value_delimiter = ',')]
    cost_ms: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    functions: Option<Vec<String>>,
    /// seq-ipop, k-replicated, k-distributed
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<String>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    lambda_start: Option<usize>,
    /// Largest population multiplier, applied to every algorithm.
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    wall_limit_min: Option<f64>,
    /// Total evaluations for seq-ipop; per descent for the parallel strategies.
    #[arg(long)]
    eval_limit: Option<u64>,
    /// Stop a run once within this gap of the optimum.
    #[arg(long)]
    target_gap: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restart finished K-Distributed descents until the wall limit.
    #[arg(long)]
    restart_on_finish: bool,
    /// Deterministic single-threaded mode with simulated time.
    #[arg(long)]
    virtual_time: bool,
    /// Re-run cells whose logs already exist.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory written by `ipop run`.
    dir: PathBuf,
    /// Target gaps, largest first. Defaults to 1e2 down to 1e-8.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(*args),
        Command::Analyze(args) => analyze(args),
        Command::ListFunctions => {
            println!("{:<16} {:>5}  description", "id", "group");
            for f in FunctionId::ALL {
                println!("{:<16} {:>5}  {}", f.name(), f.group(), f.description());
            }
            Ok(())
        }
    }
}

fn build_plan(args: &RunArgs) -> Result<ExperimentPlan> {
    let mut plan = ExperimentPlan::default();
    if let Some(path) = &args.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        plan.apply_kv(&text, path)?;
    }
    if let Some(d) = &args.dim {
        plan.dimensions = d.clone();
    }
    if let Some(c) = &args.cost_ms {
        plan.costs_ms = c.clone();
    }
    if let Some(fs) = &args.functions {
        plan.functions = fs.iter().map(|f| f.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(a) = &args.algo {
        plan.algorithms = a
            .iter()
            .map(|s| s.parse::<Algorithm>())
            .collect::<Result<_, _>>()?;
    }
    if args.workers.is_some() {
        plan.workers = args.workers;
    }
    if let Some(l) = args.lambda_start {
        plan.lambda_start = l;
    }
    if let Some(k) = args.kmax {
        plan.kmax_seq_ipop = k;
        plan.kmax_replicated = k;
        plan.kmax_distributed = k;
    }
    if let Some(r) = args.runs {
        plan.runs = r;
    }
    if let Some(s) = args.seed {
        plan.seed = s;
    }
    if let Some(m) = args.wall_limit_min {
        if !(m > 0.0) {
            bail!("--wall-limit-min must be positive");
        }
        plan.wall_limit_ms = m * 60_000.0;
    }
    if args.eval_limit.is_some() {
        plan.eval_limit = args.eval_limit;
    }
    if args.target_gap.is_some() {
        plan.target_gap = args.target_gap;
    }
    if let Some(o) = &args.out {
        plan.out_dir = o.clone();
    }
    plan.restart_on_finish |= args.restart_on_finish;
    plan.virtual_time |= args.virtual_time;
    plan.validate()?;
    Ok(plan)
}

fn run(args: RunArgs) -> Result<()> {
    let plan = build_plan(&args)?;
    let total = ipop_core::experiment::plan_cells(&plan)?.len();
    let mut seen = 0;
    let summary = run_plan(&plan, args.force, |cell, skipped| {
        seen += 1;
        let what = if skipped { "skip" } else { "done" };
        eprintln!(
            "[{seen}/{total}] {what} {} {} run{:02}",
            cell.algorithm,
            cell.problem(),
            cell.run
        );
    })?;
    println!(
        "{} runs written, {} already present, output in {}",
        summary.ran,
        summary.skipped,
        plan.out_dir.display()
    );
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let grid = match args.targets {
        Some(t) => TargetGrid::new(t)?,
        None => TargetGrid::default(),
    };
    let files = analyze_dir(&args.dir, &grid)?;
    for f in &files.written {
        println!("{}", args.dir.join(f).display());
    }
    Ok(())
}
