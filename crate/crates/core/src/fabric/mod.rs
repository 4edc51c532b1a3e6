//! Logical workers, per-descent scatter/gather evaluation, and the two
//! parallel restart strategies.

use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::objectives::Objective;

mod distributed;
mod replicated;

pub use distributed::{distributed_layout, run_k_distributed};
pub use replicated::run_k_replicated;

/// A contiguous range of logical worker ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourcePartition {
    first: usize,
    size: usize,
    parent: Option<Range<usize>>,
}

impl ResourcePartition {
    pub fn root(size: usize) -> Result<Self> {
        Self::new(0, size)
    }

    pub fn new(first: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Partition(
                "a partition needs at least one worker".into(),
            ));
        }
        Ok(Self {
            first,
            size,
            parent: None,
        })
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn range(&self) -> Range<usize> {
        self.first..self.first + self.size
    }

    pub fn parent(&self) -> Option<&Range<usize>> {
        self.parent.as_ref()
    }

    /// Two equal halves.
    pub fn split(&self) -> Result<(Self, Self)> {
        if self.size < 2 || !self.size.is_multiple_of(2) {
            return Err(Error::Partition(format!(
                "cannot halve a partition of {} workers",
                self.size
            )));
        }
        let half = self.size / 2;
        Ok((self.child(0, half), self.child(half, half)))
    }

    /// Sub-range `[offset, offset + size)` of this partition.
    pub fn sub(&self, offset: usize, size: usize) -> Result<Self> {
        if size == 0 || offset + size > self.size {
            return Err(Error::Partition(format!(
                "sub-partition {offset}+{size} does not fit in {} workers",
                self.size
            )));
        }
        Ok(self.child(offset, size))
    }

    fn child(&self, offset: usize, size: usize) -> Self {
        Self {
            first: self.first + offset,
            size,
            parent: Some(self.range()),
        }
    }
}

/// Candidate index ranges handed to each worker: `λ / workers` points each,
/// remainder to the last. With fewer points than workers, one point per
/// worker and the rest idle.
pub fn block_ranges(lambda: usize, workers: usize) -> Vec<Range<usize>> {
    let workers = workers.max(1);
    if lambda < workers {
        return (0..lambda).map(|k| k..k + 1).collect();
    }
    let per = lambda / workers;
    (0..workers)
        .map(|w| {
            let end = if w + 1 == workers {
                lambda
            } else {
                (w + 1) * per
            };
            w * per..end
        })
        .collect()
}

/// Anything that can score a point. `None` marks a failed evaluation.
pub trait Evaluate: Sync {
    fn try_evaluate(&self, x: &[f64]) -> Option<f64>;
}

impl Evaluate for Objective {
    fn try_evaluate(&self, x: &[f64]) -> Option<f64> {
        self.evaluate(x).ok()
    }
}

impl<F> Evaluate for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn try_evaluate(&self, x: &[f64]) -> Option<f64> {
        Some(self(x))
    }
}

/// Scores one point; failures and panics become `+∞`.
pub fn guarded_evaluate<E: Evaluate + ?Sized>(f: &E, x: &[f64]) -> f64 {
    match catch_unwind(AssertUnwindSafe(|| f.try_evaluate(x))) {
        Ok(Some(v)) => v,
        Ok(None) | Err(_) => f64::INFINITY,
    }
}

/// Column-by-column loop on the calling thread.
pub fn evaluate_sequential<E: Evaluate + ?Sized>(points: &Matrix, f: &E) -> Vec<f64> {
    (0..points.cols())
        .map(|k| guarded_evaluate(f, &points.column(k)))
        .collect()
}

/// The workers of one partition. With the `parallel` feature, a partition of
/// more than one worker owns a thread pool of that many threads; otherwise
/// blocks are evaluated in order on the calling thread.
pub struct Executor {
    size: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("size", &self.size)
            .field("threaded", &self.is_threaded())
            .finish()
    }
}

impl Executor {
    /// Block bookkeeping only; evaluates on the calling thread.
    pub fn sequential(size: usize) -> Self {
        Self {
            size: size.max(1),
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    pub fn threaded(size: usize) -> Result<Self> {
        #[cfg(feature = "parallel")]
        if size > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(size)
                .thread_name(|i| format!("worker-{i}"))
                .build()
                .map_err(|e| Error::Partition(format!("cannot start {size} workers: {e}")))?;
            return Ok(Self {
                size,
                pool: Some(pool),
            });
        }
        Ok(Self::sequential(size))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_threaded(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Longest block for `lambda` points: the evaluation rounds one
    /// scatter/gather takes.
    pub fn rounds(&self, lambda: usize) -> usize {
        block_ranges(lambda, self.size)
            .iter()
            .map(|r| r.len())
            .max()
            .unwrap_or(0)
    }

    /// Scatters the columns of `points` in contiguous blocks, one per worker,
    /// and gathers the qualities in column order.
    pub fn evaluate<E: Evaluate + ?Sized>(&self, points: &Matrix, f: &E) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            let blocks = block_ranges(points.cols(), self.size);
            let gathered: Vec<Vec<f64>> = pool.install(|| {
                blocks
                    .into_par_iter()
                    .with_max_len(1)
                    .map(|block| {
                        block
                            .map(|k| guarded_evaluate(f, &points.column(k)))
                            .collect()
                    })
                    .collect()
            });
            return gathered.into_iter().flatten().collect();
        }
        evaluate_sequential(points, f)
    }
}

/// One-shot scatter/gather over a partition's workers.
pub fn evaluate_scatter_gather<E: Evaluate + ?Sized>(
    partition: &ResourcePartition,
    points: &Matrix,
    f: &E,
) -> Result<Vec<f64>> {
    Ok(Executor::threaded(partition.size())?.evaluate(points, f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeMode {
    /// Monotonic clock, descents run concurrently.
    Real,
    /// Single-threaded and reproducible: one evaluation round costs
    /// `eval_ms` of simulated time.
    Virtual { eval_ms: f64 },
}

impl TimeMode {
    pub fn is_virtual(&self) -> bool {
        matches!(self, TimeMode::Virtual { .. })
    }
}

/// Time as seen by one descent, in milliseconds since the run origin.
#[derive(Debug, Clone)]
pub(crate) struct Clock {
    mode: TimeMode,
    origin: Instant,
    virtual_ms: f64,
}

impl Clock {
    pub(crate) fn new(mode: TimeMode, origin: Instant, start_ms: f64) -> Self {
        Self {
            mode,
            origin,
            virtual_ms: start_ms,
        }
    }

    pub(crate) fn now_ms(&self) -> f64 {
        match self.mode {
            TimeMode::Real => self.origin.elapsed().as_secs_f64() * 1000.0,
            TimeMode::Virtual { .. } => self.virtual_ms,
        }
    }

    pub(crate) fn charge(&mut self, rounds: usize) {
        if let TimeMode::Virtual { eval_ms } = self.mode {
            self.virtual_ms += rounds as f64 * eval_ms;
        }
    }
}

/// Earliest time at which any descent of a run reached the target.
#[derive(Debug)]
pub struct StopSignal(AtomicU64);

impl Default for StopSignal {
    fn default() -> Self {
        Self(AtomicU64::new(f64::INFINITY.to_bits()))
    }
}

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raise(&self, at_ms: f64) {
        let mut cur = self.0.load(Ordering::Acquire);
        while at_ms < f64::from_bits(cur) {
            match self
                .0
                .compare_exchange(cur, at_ms.to_bits(), Ordering::AcqRel, Ordering::Acquire)
            {
                Ok(_) => break,
                Err(seen) => cur = seen,
            }
        }
    }

    pub fn raised_at(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }
}

/// Settings shared by both parallel strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub dimension: usize,
    pub total_workers: usize,
    /// Workers given to one `K = 1` descent.
    pub unit_workers: usize,
    pub lambda_start: usize,
    pub k_max_replicated: usize,
    pub k_max_distributed: usize,
    pub restart_on_finish: bool,
    /// Iteration cap per descent; reaching it stops with `MaxEvals`.
    pub descent_max_iters: Option<u64>,
    pub descent_max_evals: Option<u64>,
    pub deadline_ms: Option<f64>,
    pub target: Option<f64>,
    pub seed: u64,
    pub time_mode: TimeMode,
}

impl StrategyConfig {
    pub fn new(dimension: usize, total_workers: usize, lambda_start: usize) -> Self {
        Self {
            dimension,
            total_workers,
            unit_workers: lambda_start,
            lambda_start,
            k_max_replicated: 1,
            k_max_distributed: 1,
            restart_on_finish: false,
            descent_max_iters: None,
            descent_max_evals: None,
            deadline_ms: None,
            target: None,
            seed: 0,
            time_mode: TimeMode::Real,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.unit_workers == 0 {
            return Err(Error::Config("unit_workers must be at least 1".into()));
        }
        if self.lambda_start < 2 {
            return Err(Error::Config("lambda_start must be at least 2".into()));
        }
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if let TimeMode::Virtual { eval_ms } = self.time_mode {
            if !(eval_ms > 0.0 && eval_ms.is_finite()) {
                return Err(Error::Config(format!(
                    "virtual evaluation time must be positive, got {eval_ms}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn descent_eval_cap(&self, lambda: usize) -> Option<u64> {
        let by_iters = self.descent_max_iters.map(|i| i * lambda as u64);
        match (by_iters, self.descent_max_evals) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

/// Result of a parallel strategy: one log per descent.
#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub logs: Vec<crate::runlog::RunLog>,
    pub best: crate::cmaes::Best,
}

impl StrategyOutcome {
    pub fn merged(&self) -> crate::runlog::RunLog {
        crate::runlog::RunLog::merge(self.logs.iter().cloned())
    }

    pub(crate) fn from_outcomes(outcomes: Vec<crate::descent::DescentOutcome>) -> Self {
        let best = outcomes
            .iter()
            .map(|o| &o.best)
            .min_by(|a, b| a.quality.total_cmp(&b.quality))
            .cloned()
            .unwrap_or(crate::cmaes::Best {
                x: Vec::new(),
                quality: f64::INFINITY,
            });
        let mut logs: Vec<_> = outcomes.into_iter().map(|o| o.log).collect();
        logs.sort_by(|a, b| {
            let (da, db) = (&a.descents[0], &b.descents[0]);
            da.start_ms
                .total_cmp(&db.start_ms)
                .then(da.first_worker.cmp(&db.first_worker))
        });
        Self { logs, best }
    }
}
