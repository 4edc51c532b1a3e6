//! K-Distributed: one descent per `K = 2^i`, all started together on
//! partitions sized in proportion to their population.

use std::thread;
use std::time::Instant;

use super::{
    Evaluate, Executor, ResourcePartition, StopSignal, StrategyConfig, StrategyOutcome, TimeMode,
};
use crate::cmaes::{StopLimits, StopReason};
use crate::descent::{run_descent, DescentEnv, DescentOutcome, DescentSpec};
use crate::error::{Error, Result};
use crate::rng::descent_seed;

/// `(K, partition)` for `K = 1, 2, 4, …, k_max`, laid out contiguously from
/// worker 0.
pub fn distributed_layout(
    total_workers: usize,
    unit_workers: usize,
    k_max: usize,
) -> Result<Vec<(u64, ResourcePartition)>> {
    if !k_max.is_power_of_two() {
        return Err(Error::Config(format!(
            "k_max must be a power of two, got {k_max}"
        )));
    }
    let needed = (2 * k_max - 1) * unit_workers;
    if unit_workers == 0 || total_workers < needed {
        return Err(Error::Config(format!(
            "K-Distributed up to K={k_max} needs {needed} workers, have {total_workers}"
        )));
    }
    let root = ResourcePartition::root(total_workers)?;
    let mut layout = Vec::new();
    let mut offset = 0;
    let mut k = 1;
    while k <= k_max {
        let size = k * unit_workers;
        layout.push((k as u64, root.sub(offset, size)?));
        offset += size;
        k *= 2;
    }
    Ok(layout)
}

pub fn run_k_distributed<E: Evaluate + ?Sized>(
    cfg: &StrategyConfig,
    f: &E,
) -> Result<StrategyOutcome> {
    cfg.validate()?;
    if cfg.restart_on_finish && cfg.deadline_ms.is_none() {
        return Err(Error::Config("restart_on_finish needs a deadline".into()));
    }
    let layout = distributed_layout(cfg.total_workers, cfg.unit_workers, cfg.k_max_distributed)?;
    let origin = Instant::now();
    let signal = StopSignal::new();

    let lane = |k: u64, part: &ResourcePartition| -> Result<Vec<DescentOutcome>> {
        let executor = match cfg.time_mode {
            TimeMode::Virtual { .. } => Executor::sequential(part.size()),
            TimeMode::Real => Executor::threaded(part.size())?,
        };
        let lambda = k as usize * cfg.lambda_start;
        let limits = StopLimits {
            target: cfg.target,
            max_evals: cfg.descent_eval_cap(lambda),
            ..StopLimits::default()
        };
        let mut outcomes = Vec::new();
        let mut start_ms = 0.0;
        for restart in 0.. {
            let spec = DescentSpec {
                id: DescentSpec::label(part.first(), k, restart),
                dimension: cfg.dimension,
                k,
                lambda,
                first_worker: part.first(),
                restart,
                seed: descent_seed(cfg.seed, part.first(), k as usize, restart),
                limits: limits.clone(),
                deadline_ms: cfg.deadline_ms,
                eval_budget: None,
            };
            let env = DescentEnv {
                executor: &executor,
                time_mode: cfg.time_mode,
                origin,
                start_ms,
                idle_ms: 0.0,
                signal: Some(&signal),
            };
            let outcome = run_descent(&spec, &env, f)?;
            let stop = outcome.stop;
            let ran = outcome.evals > 0;
            start_ms = outcome.end_ms;
            if ran || restart == 0 {
                outcomes.push(outcome);
            }
            if !cfg.restart_on_finish
                || !ran
                || matches!(stop, StopReason::TargetHit | StopReason::ExternalDeadline)
            {
                break;
            }
        }
        Ok(outcomes)
    };

    let outcomes: Vec<DescentOutcome> = match cfg.time_mode {
        TimeMode::Virtual { .. } => {
            let mut all = Vec::new();
            for (k, part) in &layout {
                all.extend(lane(*k, part)?);
            }
            all
        }
        TimeMode::Real => thread::scope(|s| {
            let handles: Vec<_> = layout
                .iter()
                .map(|(k, part)| {
                    let lane = &lane;
                    s.spawn(move || lane(*k, part))
                })
                .collect();
            let mut all = Vec::new();
            for h in handles {
                let lane_out = h
                    .join()
                    .unwrap_or_else(|_| Err(Error::Contract("descent thread panicked".into())))?;
                all.extend(lane_out);
            }
            Ok::<_, Error>(all)
        })?,
    };
    Ok(StrategyOutcome::from_outcomes(outcomes))
}
