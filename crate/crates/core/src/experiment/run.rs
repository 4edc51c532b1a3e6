use std::fs;
use std::path::{Path, PathBuf};

use super::plan::{kv_lines, Algorithm, ExperimentPlan};
use crate::error::{Error, Result};
use crate::fabric::{
    run_k_distributed, run_k_replicated, ResourcePartition, StrategyConfig, TimeMode,
};
use crate::objectives::{FunctionId, Objective};
use crate::restart::{run_ipop, IpopConfig};
use crate::rng::mix_seed;
use crate::runlog::{write_atomic, RunLog};

pub const MANIFEST: &str = "manifest.kv";

/// Problem label: function, dimension and cost.
pub fn problem_label(function: FunctionId, dimension: usize, cost_ms: f64) -> String {
    format!("{function}-d{dimension}-c{cost_ms}")
}

/// One (algorithm, problem, run) entry of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub function: FunctionId,
    pub dimension: usize,
    pub cost_ms: f64,
    pub run: usize,
    /// Shared by all algorithms on the same problem and run.
    pub instance_seed: u64,
    pub seed: u64,
    pub f_opt: f64,
}

impl Cell {
    pub fn problem(&self) -> String {
        problem_label(self.function, self.dimension, self.cost_ms)
    }

    pub fn key(&self) -> String {
        format!(
            "cell.{}.{}.run{:02}",
            self.algorithm,
            self.problem(),
            self.run
        )
    }

    pub fn records_path(&self) -> PathBuf {
        PathBuf::from("runs")
            .join(self.algorithm.name())
            .join(self.problem())
            .join(format!("run{:02}.csv", self.run))
    }

    pub fn descents_path(&self) -> PathBuf {
        PathBuf::from("descents")
            .join(self.algorithm.name())
            .join(self.problem())
            .join(format!("run{:02}.csv", self.run))
    }
}

/// Expands a plan into its cells, in execution order.
pub fn plan_cells(plan: &ExperimentPlan) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for &algorithm in &plan.algorithms {
        for &dimension in &plan.dimensions {
            for &cost_ms in &plan.costs_ms {
                for &function in &plan.functions {
                    for run in 0..plan.runs {
                        let instance_seed = mix_seed(plan.seed, &[dimension as u64, run as u64]);
                        let seed = mix_seed(
                            plan.seed,
                            &[
                                algorithm.index(),
                                function as u64,
                                dimension as u64,
                                cost_ms.to_bits(),
                                run as u64,
                            ],
                        );
                        let f_opt =
                            Objective::new(function, dimension, instance_seed, 0.0)?.f_opt();
                        cells.push(Cell {
                            algorithm,
                            function,
                            dimension,
                            cost_ms,
                            run,
                            instance_seed,
                            seed,
                            f_opt,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// Simulated duration of one evaluation round in virtual-time runs.
pub fn virtual_eval_ms(cost_ms: f64) -> f64 {
    if cost_ms > 0.0 {
        cost_ms
    } else {
        1.0
    }
}

/// Runs one cell and returns its (merged) log.
pub fn run_cell(plan: &ExperimentPlan, cell: &Cell) -> Result<RunLog> {
    let time_mode = if plan.virtual_time {
        TimeMode::Virtual {
            eval_ms: virtual_eval_ms(cell.cost_ms),
        }
    } else {
        TimeMode::Real
    };
    let workers = plan.resolved_workers();
    match cell.algorithm {
        Algorithm::SeqIpop => {
            let cfg = IpopConfig {
                lambda_start: plan.lambda_start,
                k_max: plan.kmax_seq_ipop,
                dimension: cell.dimension,
                objective: cell.function.name().to_string(),
                instance_seed: cell.instance_seed,
                additional_cost_ms: cell.cost_ms,
                max_wall_ms: Some(plan.wall_limit_ms),
                max_evals_total: plan.eval_limit,
                target_gap: plan.target_gap,
                seed: cell.seed,
                time_mode,
            };
            let fabric = ResourcePartition::root(workers)?;
            Ok(run_ipop(&cfg, Some(&fabric))?.log)
        }
        Algorithm::KReplicated | Algorithm::KDistributed => {
            let objective = Objective::new(
                cell.function,
                cell.dimension,
                cell.instance_seed,
                cell.cost_ms,
            )?;
            let objective = if plan.virtual_time {
                objective.without_cost()
            } else {
                objective
            };
            let mut cfg = StrategyConfig::new(cell.dimension, workers, plan.lambda_start);
            cfg.k_max_replicated = plan.kmax_replicated;
            cfg.k_max_distributed = plan.kmax_distributed;
            cfg.restart_on_finish = plan.restart_on_finish;
            cfg.descent_max_evals = plan.eval_limit;
            cfg.deadline_ms = Some(plan.wall_limit_ms);
            cfg.target = plan.target_gap.map(|g| objective.f_opt() + g);
            cfg.seed = cell.seed;
            cfg.time_mode = time_mode;
            let outcome = if cell.algorithm == Algorithm::KReplicated {
                cfg.total_workers = plan.required_workers(Algorithm::KReplicated);
                run_k_replicated(&cfg, &objective)?
            } else {
                run_k_distributed(&cfg, &objective)?
            };
            Ok(outcome.merged())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlanSummary {
    pub ran: usize,
    pub skipped: usize,
}

/// Runs every cell whose log is missing (or all of them with `force`),
/// keeping the manifest in `plan.out_dir` current after each one.
pub fn run_plan(
    plan: &ExperimentPlan,
    force: bool,
    mut progress: impl FnMut(&Cell, bool),
) -> Result<PlanSummary> {
    plan.validate()?;
    let cells = plan_cells(plan)?;
    let out = &plan.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut done: Vec<bool> = cells
        .iter()
        .map(|c| !force && out.join(c.records_path()).exists())
        .collect();
    write_manifest(plan, &cells, &done)?;
    let mut summary = PlanSummary::default();
    for (i, cell) in cells.iter().enumerate() {
        if done[i] {
            summary.skipped += 1;
            progress(cell, true);
            continue;
        }
        let log = run_cell(plan, cell)?;
        log.save(
            &out.join(cell.records_path()),
            Some(&out.join(cell.descents_path())),
        )?;
        done[i] = true;
        write_manifest(plan, &cells, &done)?;
        summary.ran += 1;
        progress(cell, false);
    }
    Ok(summary)
}

fn write_manifest(plan: &ExperimentPlan, cells: &[Cell], done: &[bool]) -> Result<()> {
    let mut text = String::from("# resolved plan\n");
    text.push_str(&plan.to_kv());
    text.push_str(&format!(
        "# workers resolved to {}\n",
        plan.resolved_workers()
    ));
    for (cell, &ok) in cells.iter().zip(done) {
        text.push_str(&format!(
            "{} = seed={} instance_seed={} f_opt={} file={} status={}\n",
            cell.key(),
            cell.seed,
            cell.instance_seed,
            cell.f_opt,
            cell.records_path().display(),
            if ok { "done" } else { "pending" }
        ));
    }
    write_atomic(&plan.out_dir.join(MANIFEST), text.as_bytes())
}

/// A manifest read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub plan: ExperimentPlan,
    pub cells: Vec<(Cell, bool)>,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut plan = ExperimentPlan::default();
    plan.apply_kv(&text, &path)?;
    let expected = plan_cells(&plan)?;
    let mut status = std::collections::HashMap::new();
    for (key, value) in kv_lines(&text, &path)? {
        if let Some(rest) = key.strip_prefix("cell.") {
            let fields: std::collections::HashMap<&str, &str> = value
                .split_whitespace()
                .filter_map(|kv| kv.split_once('='))
                .collect();
            status.insert(
                format!("cell.{rest}"),
                fields.get("status") == Some(&"done"),
            );
            let seed_ok = expected
                .iter()
                .find(|c| c.key() == key)
                .map(|c| fields.get("seed") == Some(&c.seed.to_string().as_str()));
            if seed_ok != Some(true) {
                return Err(Error::parse(
                    &path,
                    format!("entry `{key}` does not match the plan"),
                ));
            }
        }
    }
    let cells = expected
        .into_iter()
        .map(|c| {
            let ok = status.get(&c.key()).copied().unwrap_or(false);
            (c, ok)
        })
        .collect();
    Ok(Manifest { plan, cells })
}
