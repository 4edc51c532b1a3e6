//! K-Replicated: every unit partition runs a `K = 1` descent; when both
//! halves of a partition are done, the partition runs one descent of twice
//! their `K`.

use std::thread;
use std::time::Instant;

use super::{
    Evaluate, Executor, ResourcePartition, StopSignal, StrategyConfig, StrategyOutcome, TimeMode,
};
use crate::cmaes::StopLimits;
use crate::descent::{run_descent, DescentEnv, DescentOutcome, DescentSpec};
use crate::error::{Error, Result};
use crate::rng::descent_seed;

struct Ctx<'a, E: ?Sized> {
    cfg: &'a StrategyConfig,
    f: &'a E,
    origin: Instant,
    signal: StopSignal,
}

pub fn run_k_replicated<E: Evaluate + ?Sized>(
    cfg: &StrategyConfig,
    f: &E,
) -> Result<StrategyOutcome> {
    cfg.validate()?;
    let units = cfg.total_workers / cfg.unit_workers;
    if !cfg.total_workers.is_multiple_of(cfg.unit_workers) || !units.is_power_of_two() {
        return Err(Error::Config(format!(
            "{} workers is not a power-of-two multiple of {} workers per unit",
            cfg.total_workers, cfg.unit_workers
        )));
    }
    if !cfg.k_max_replicated.is_power_of_two() || cfg.k_max_replicated > units {
        return Err(Error::Config(format!(
            "k_max {} must be a power of two no larger than the {units} units available",
            cfg.k_max_replicated
        )));
    }
    let ctx = Ctx {
        cfg,
        f,
        origin: Instant::now(),
        signal: StopSignal::new(),
    };
    let root = ResourcePartition::root(cfg.total_workers)?;
    let (outcomes, _) = replicate(&ctx, root, units as u64, 0.0)?;
    Ok(StrategyOutcome::from_outcomes(outcomes))
}

/// Runs the subtree rooted at `part` and returns its descents and end time.
fn replicate<E: Evaluate + ?Sized>(
    ctx: &Ctx<'_, E>,
    part: ResourcePartition,
    k: u64,
    start_ms: f64,
) -> Result<(Vec<DescentOutcome>, f64)> {
    let mut outcomes = Vec::new();
    let mut begin = start_ms;
    let mut idle_ms = 0.0;

    if k > 1 {
        let (left, right) = part.split()?;
        let ((mut a, a_end), (b, b_end)) = match ctx.cfg.time_mode {
            TimeMode::Virtual { .. } => (
                replicate(ctx, left, k / 2, start_ms)?,
                replicate(ctx, right, k / 2, start_ms)?,
            ),
            TimeMode::Real => thread::scope(|s| {
                let handle = s.spawn(|| replicate(ctx, left, k / 2, start_ms));
                let b = replicate(ctx, right, k / 2, start_ms);
                let a = handle
                    .join()
                    .unwrap_or_else(|_| Err(Error::Contract("descent thread panicked".into())));
                Ok::<_, Error>((a?, b?))
            })?,
        };
        begin = match ctx.cfg.time_mode {
            TimeMode::Virtual { .. } => a_end.max(b_end),
            TimeMode::Real => ctx.origin.elapsed().as_secs_f64() * 1000.0,
        };
        idle_ms = (a_end - b_end).abs();
        a.extend(b);
        outcomes = a;
    }

    if k as usize > ctx.cfg.k_max_replicated {
        return Ok((outcomes, begin));
    }
    let cutoff = ctx
        .cfg
        .deadline_ms
        .unwrap_or(f64::INFINITY)
        .min(ctx.signal.raised_at());
    if begin >= cutoff {
        return Ok((outcomes, begin));
    }

    let lambda = k as usize * ctx.cfg.lambda_start;
    let executor = match ctx.cfg.time_mode {
        TimeMode::Virtual { .. } => Executor::sequential(part.size()),
        TimeMode::Real => Executor::threaded(part.size())?,
    };
    let limits = StopLimits {
        target: ctx.cfg.target,
        max_evals: ctx.cfg.descent_eval_cap(lambda),
        ..StopLimits::default()
    };
    let spec = DescentSpec {
        id: DescentSpec::label(part.first(), k, 0),
        dimension: ctx.cfg.dimension,
        k,
        lambda,
        first_worker: part.first(),
        restart: 0,
        seed: descent_seed(ctx.cfg.seed, part.first(), k as usize, 0),
        limits,
        deadline_ms: ctx.cfg.deadline_ms,
        eval_budget: None,
    };
    let env = DescentEnv {
        executor: &executor,
        time_mode: ctx.cfg.time_mode,
        origin: ctx.origin,
        start_ms: begin,
        idle_ms,
        signal: Some(&ctx.signal),
    };
    let outcome = run_descent(&spec, &env, ctx.f)?;
    let end = outcome.end_ms;
    outcomes.push(outcome);
    Ok((outcomes, end))
}
