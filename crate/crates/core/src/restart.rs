//! Sequential IPOP: descents with population `K·λ_start` for
//! `K = 1, 2, 4, …, K_max`, one after the other.

use std::time::Instant;

use crate::cmaes::{Best, StopLimits, StopReason};
use crate::descent::{run_descent, DescentEnv, DescentSpec};
use crate::error::{Error, Result};
use crate::fabric::{Executor, ResourcePartition, TimeMode};
use crate::objectives::Objective;
use crate::rng::descent_seed;
use crate::runlog::{Record, RunLog};

#[derive(Debug, Clone, PartialEq)]
pub struct IpopConfig {
    pub lambda_start: usize,
    pub k_max: usize,
    pub dimension: usize,
    pub objective: String,
    pub instance_seed: u64,
    pub additional_cost_ms: f64,
    pub max_wall_ms: Option<f64>,
    pub max_evals_total: Option<u64>,
    /// Stop once `best - f_opt` is at or below this gap.
    pub target_gap: Option<f64>,
    pub seed: u64,
    pub time_mode: TimeMode,
}

impl IpopConfig {
    pub fn new(objective: &str, dimension: usize) -> Self {
        Self {
            lambda_start: 12,
            k_max: 1,
            dimension,
            objective: objective.to_string(),
            instance_seed: 0,
            additional_cost_ms: 0.0,
            max_wall_ms: None,
            max_evals_total: None,
            target_gap: None,
            seed: 0,
            time_mode: TimeMode::Real,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambda_start < 2 {
            return Err(Error::Config("lambda_start must be at least 2".into()));
        }
        if !self.k_max.is_power_of_two() {
            return Err(Error::Config(format!(
                "k_max must be a power of two, got {}",
                self.k_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IpopOutcome {
    /// Records carry the run-wide evaluation count and best-so-far quality.
    pub log: RunLog,
    pub best: Best,
    pub f_opt: f64,
}

pub fn run_ipop(cfg: &IpopConfig, fabric: Option<&ResourcePartition>) -> Result<IpopOutcome> {
    cfg.validate()?;
    let objective = Objective::by_name(
        &cfg.objective,
        cfg.dimension,
        cfg.instance_seed,
        cfg.additional_cost_ms,
    )?;
    let objective = if cfg.time_mode.is_virtual() {
        objective.without_cost()
    } else {
        objective
    };
    let executor = match (fabric, cfg.time_mode) {
        (None, _) => Executor::sequential(1),
        (Some(p), TimeMode::Virtual { .. }) => Executor::sequential(p.size()),
        (Some(p), TimeMode::Real) => Executor::threaded(p.size())?,
    };
    let first_worker = fabric.map_or(0, ResourcePartition::first);
    let target = cfg.target_gap.map(|gap| objective.f_opt() + gap);

    let origin = Instant::now();
    let mut log = RunLog::new();
    let mut best = Best {
        x: Vec::new(),
        quality: f64::INFINITY,
    };
    let mut used_evals = 0u64;
    let mut start_ms = 0.0;
    let mut k = 1usize;
    while k <= cfg.k_max {
        let lambda = k * cfg.lambda_start;
        let limits = StopLimits {
            target,
            ..StopLimits::default()
        };
        let spec = DescentSpec {
            id: DescentSpec::label(first_worker, k as u64, 0),
            dimension: cfg.dimension,
            k: k as u64,
            lambda,
            first_worker,
            restart: 0,
            seed: descent_seed(cfg.seed, first_worker, k, 0),
            limits,
            deadline_ms: cfg.max_wall_ms,
            eval_budget: cfg
                .max_evals_total
                .map(|total| total.saturating_sub(used_evals)),
        };
        let env = DescentEnv {
            executor: &executor,
            time_mode: cfg.time_mode,
            origin,
            start_ms,
            idle_ms: 0.0,
            signal: None,
        };
        let outcome = run_descent(&spec, &env, &objective)?;
        for r in outcome.log.records {
            log.records.push(Record {
                evals: used_evals + r.evals,
                best_f: r.best_f.min(best.quality),
                ..r
            });
        }
        log.descents.extend(outcome.log.descents);
        used_evals += outcome.evals;
        start_ms = outcome.end_ms;
        if outcome.best.quality < best.quality {
            best = outcome.best;
        }
        if matches!(
            outcome.stop,
            StopReason::TargetHit | StopReason::ExternalDeadline
        ) {
            break;
        }
        k *= 2;
    }
    Ok(IpopOutcome {
        log,
        best,
        f_opt: objective.f_opt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(k_max: usize) -> IpopConfig {
        let mut cfg = IpopConfig::new("rastrigin", 3);
        cfg.lambda_start = 6;
        cfg.k_max = k_max;
        cfg.time_mode = TimeMode::Virtual { eval_ms: 1.0 };
        cfg.seed = 5;
        cfg
    }

    #[test]
    fn single_descent_without_restarts() {
        let out = run_ipop(&quick(1), None).unwrap();
        assert_eq!(out.log.descents.len(), 1);
        assert_eq!(out.log.descents[0].lambda, 6);
    }

    #[test]
    fn populations_double() {
        let out = run_ipop(&quick(8), None).unwrap();
        let lambdas: Vec<_> = out.log.descents.iter().map(|d| d.lambda).collect();
        assert_eq!(lambdas, vec![6, 12, 24, 48]);
    }

    #[test]
    fn global_trace_is_monotone_and_best_is_min() {
        let out = run_ipop(&quick(4), None).unwrap();
        for w in out.log.records.windows(2) {
            assert!(w[1].wall_ms >= w[0].wall_ms);
            assert!(w[1].evals > w[0].evals);
            assert!(w[1].best_f <= w[0].best_f);
        }
        let min_desc = out
            .log
            .descents
            .iter()
            .map(|d| d.best_f)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.best.quality, min_desc);
    }

    #[test]
    fn total_budget_truncates_with_deadline_stop() {
        let mut cfg = quick(8);
        cfg.max_evals_total = Some(100);
        let out = run_ipop(&cfg, None).unwrap();
        assert_eq!(
            out.log.descents.last().unwrap().stop,
            StopReason::ExternalDeadline
        );
        assert!(out.log.total_evals() <= 100);
    }

    #[test]
    fn unknown_objective_is_config_error() {
        let cfg = IpopConfig::new("katsuura", 2);
        assert!(matches!(run_ipop(&cfg, None), Err(Error::Config(_))));
    }
}
