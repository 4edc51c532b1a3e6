//! Drives one CMA-ES descent to a stop on a partition's workers.

use std::time::Instant;

use rand::Rng;

use crate::cmaes::{
    check_stop, maybe_eigendecompose, sample_population, update, Best, CmaParams, CmaState,
    StopLimits, StopReason,
};
use crate::error::Result;
use crate::fabric::{Clock, Evaluate, Executor, StopSignal, TimeMode};
use crate::objectives::{DOMAIN_LOWER, DOMAIN_UPPER};
use crate::rng::rng_from_seed;
use crate::runlog::{DescentInfo, Record, RunLog};

/// Initial step size: a quarter of the domain width.
pub const SIGMA0: f64 = (DOMAIN_UPPER - DOMAIN_LOWER) / 4.0;

#[derive(Debug, Clone)]
pub struct DescentSpec {
    pub id: String,
    pub dimension: usize,
    pub k: u64,
    pub lambda: usize,
    pub first_worker: usize,
    pub restart: usize,
    pub seed: u64,
    pub limits: StopLimits,
    pub deadline_ms: Option<f64>,
    /// Evaluations still available to the run as a whole.
    pub eval_budget: Option<u64>,
}

impl DescentSpec {
    pub fn label(first_worker: usize, k: u64, restart: usize) -> String {
        format!("w{first_worker}-k{k}-r{restart}")
    }
}

/// Where and when a descent runs.
pub struct DescentEnv<'a> {
    pub executor: &'a Executor,
    pub time_mode: TimeMode,
    pub origin: Instant,
    pub start_ms: f64,
    pub idle_ms: f64,
    pub signal: Option<&'a StopSignal>,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    /// Per-iteration records plus a single descent summary.
    pub log: RunLog,
    pub best: Best,
    pub stop: StopReason,
    pub end_ms: f64,
    pub evals: u64,
}

pub fn run_descent<E: Evaluate + ?Sized>(
    spec: &DescentSpec,
    env: &DescentEnv<'_>,
    f: &E,
) -> Result<DescentOutcome> {
    let params = CmaParams::new(spec.dimension, spec.lambda)?;
    let mut rng = rng_from_seed(spec.seed);
    let m0: Vec<f64> = (0..spec.dimension)
        .map(|_| rng.random_range(DOMAIN_LOWER..DOMAIN_UPPER))
        .collect();
    let mut state = CmaState::new(&params, m0, SIGMA0)?;
    let mut clock = Clock::new(env.time_mode, env.origin, env.start_ms);
    let start_ms = clock.now_ms();
    let mut log = RunLog::new();
    let lambda = spec.lambda as u64;

    let cutoff = |clock_deadline: Option<f64>| {
        let signal = env.signal.map_or(f64::INFINITY, StopSignal::raised_at);
        clock_deadline.unwrap_or(f64::INFINITY).min(signal)
    };

    let stop = loop {
        let limit = cutoff(spec.deadline_ms);
        if clock.now_ms() >= limit {
            break StopReason::ExternalDeadline;
        }
        if spec
            .eval_budget
            .is_some_and(|b| state.eval_count + lambda > b)
        {
            break StopReason::ExternalDeadline;
        }
        if maybe_eigendecompose(&mut state, &params).is_err() {
            break StopReason::ConditionCov;
        }
        let mut pop = sample_population(&state, &params, &mut rng);
        let qualities = env.executor.evaluate(&pop.x, f);
        clock.charge(env.executor.rounds(spec.lambda));
        let now = clock.now_ms();
        if now > cutoff(spec.deadline_ms) {
            break StopReason::ExternalDeadline;
        }
        pop.set_qualities(qualities)?;
        if update(&mut state, &params, &pop).is_err() {
            break StopReason::ConditionCov;
        }
        log.push(Record {
            wall_ms: now,
            evals: state.eval_count,
            best_f: state.best.quality,
            descent_id: spec.id.clone(),
            k: spec.k,
        })?;
        if let Some(reason) = check_stop(&state, &params, &spec.limits) {
            if reason == StopReason::TargetHit {
                if let Some(signal) = env.signal {
                    signal.raise(now);
                }
            }
            break reason;
        }
    };

    let end_ms = log.records.last().map_or(start_ms, |r| r.wall_ms);
    log.descents.push(DescentInfo {
        id: spec.id.clone(),
        k: spec.k,
        lambda: spec.lambda,
        first_worker: spec.first_worker,
        workers: env.executor.size(),
        restart: spec.restart,
        start_ms,
        end_ms,
        idle_ms: env.idle_ms,
        iterations: state.iter_count,
        evals: state.eval_count,
        stop,
        best_f: state.best.quality,
    });
    Ok(DescentOutcome {
        log,
        best: state.best,
        stop,
        end_ms,
        evals: state.eval_count,
    })
}
