//! Target hitting times, expected runtime, ECDFs, speedup and best-K tables.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::runlog::RunLog;

/// Quality gaps to the optimum, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGrid {
    epsilons: Vec<f64>,
}

impl Default for TargetGrid {
    fn default() -> Self {
        Self {
            epsilons: [2.0, 1.5, 1.0, 0.5, 0.0, -2.0, -4.0, -6.0, -8.0]
                .iter()
                .map(|e| 10f64.powf(*e))
                .collect(),
        }
    }
}

impl TargetGrid {
    pub fn new(epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Config(
                "target gaps must be positive and finite".into(),
            ));
        }
        if epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "target gaps must be strictly decreasing".into(),
            ));
        }
        Ok(Self { epsilons })
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }
}

/// Which column of a log measures elapsed effort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    WallMs,
    Evals,
}

impl Axis {
    fn of(self, r: &crate::runlog::Record) -> f64 {
        match self {
            Axis::WallMs => r.wall_ms,
            Axis::Evals => r.evals as f64,
        }
    }
}

/// Earliest time at which some record is within each gap of `f_opt`.
/// Records may come from several descents, so every record is scanned.
pub fn hitting_times(log: &RunLog, f_opt: f64, grid: &TargetGrid) -> Vec<Option<f64>> {
    hitting_times_on(log, f_opt, grid, Axis::WallMs)
}

pub fn hitting_times_on(
    log: &RunLog,
    f_opt: f64,
    grid: &TargetGrid,
    axis: Axis,
) -> Vec<Option<f64>> {
    grid.epsilons
        .iter()
        .map(|&eps| {
            log.records
                .iter()
                .filter(|r| r.best_f - f_opt <= eps)
                .map(|r| axis.of(r))
                .min_by(f64::total_cmp)
        })
        .collect()
}

/// Effort the run actually spent.
pub fn spent_on(log: &RunLog, axis: Axis) -> f64 {
    log.records.iter().map(|r| axis.of(r)).fold(0.0, f64::max)
}

/// Sum over runs of (hit time if successful, else spent time), divided by the
/// number of successes. `None` without any success.
pub fn ert(runs: &[(Option<f64>, f64)]) -> Result<Option<f64>> {
    if runs.is_empty() {
        return Err(Error::Contract("expected runtime of zero runs".into()));
    }
    let successes = runs.iter().filter(|(hit, _)| hit.is_some()).count();
    if successes == 0 {
        return Ok(None);
    }
    let total: f64 = runs.iter().map(|(hit, spent)| hit.unwrap_or(*spent)).sum();
    Ok(Some(total / successes as f64))
}

/// Fraction of (function, target, run) triplets hit by each time.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfCurve {
    /// `(time, fraction)` at each distinct hit time.
    pub points: Vec<(f64, f64)>,
    pub hits: usize,
    pub total: usize,
}

impl EcdfCurve {
    pub fn final_fraction(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }

    pub fn fraction_at(&self, t: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.0 <= t)
            .last()
            .map_or(0.0, |p| p.1)
    }
}

pub fn ecdf(hits: &[Option<f64>], total: usize) -> EcdfCurve {
    let mut times: Vec<f64> = hits.iter().flatten().copied().collect();
    times.sort_by(f64::total_cmp);
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let fraction = (i + 1) as f64 / total as f64;
        match points.last_mut() {
            Some(last) if last.0 == t => last.1 = fraction,
            _ => points.push((t, fraction)),
        }
    }
    EcdfCurve {
        points,
        hits: times.len(),
        total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErtEntry {
    pub ert: Option<f64>,
    pub successes: usize,
    pub runs: usize,
}

/// Outcome of one run on one problem, as needed by [`ErtTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunHits {
    pub function: String,
    pub hits: Vec<Option<f64>>,
    pub spent: f64,
}

/// ERT per function and target for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ErtTable {
    pub algorithm: String,
    pub grid: TargetGrid,
    pub rows: BTreeMap<String, Vec<ErtEntry>>,
}

impl ErtTable {
    pub fn from_runs(algorithm: &str, grid: &TargetGrid, runs: &[RunHits]) -> Result<Self> {
        let mut by_function: BTreeMap<String, Vec<&RunHits>> = BTreeMap::new();
        for r in runs {
            if r.hits.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "{} hitting times for a grid of {}",
                    r.hits.len(),
                    grid.len()
                )));
            }
            by_function.entry(r.function.clone()).or_default().push(r);
        }
        let mut rows = BTreeMap::new();
        for (function, list) in by_function {
            let entries = (0..grid.len())
                .map(|t| {
                    let pairs: Vec<(Option<f64>, f64)> =
                        list.iter().map(|r| (r.hits[t], r.spent)).collect();
                    Ok(ErtEntry {
                        ert: ert(&pairs)?,
                        successes: pairs.iter().filter(|p| p.0.is_some()).count(),
                        runs: pairs.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.insert(function, entries);
        }
        Ok(Self {
            algorithm: algorithm.to_string(),
            grid: grid.clone(),
            rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedupCell {
    /// `ert_base / ert_other`.
    Ratio(f64),
    /// Only the base algorithm reached the target.
    BaseOnly,
    /// Only the other algorithm reached the target.
    OtherOnly,
    /// Neither did.
    Neither,
}

impl fmt::Display for SpeedupCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedupCell::Ratio(r) => write!(f, "{r}"),
            SpeedupCell::BaseOnly => f.write_str("X"),
            SpeedupCell::OtherOnly => f.write_str("other-only"),
            SpeedupCell::Neither => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupTable {
    pub cells: BTreeMap<String, Vec<SpeedupCell>>,
    /// Cells where the base reached the target first, or alone.
    pub base_wins: usize,
    /// Cells where the other algorithm reached it first, or alone.
    pub other_wins: usize,
}

pub fn speedup_table(base: &ErtTable, other: &ErtTable) -> SpeedupTable {
    let mut cells = BTreeMap::new();
    let (mut base_wins, mut other_wins) = (0, 0);
    let functions: std::collections::BTreeSet<&String> =
        base.rows.keys().chain(other.rows.keys()).collect();
    let width = base.grid.len().max(other.grid.len());
    for function in functions {
        let row: Vec<SpeedupCell> = (0..width)
            .map(|t| {
                let b = base
                    .rows
                    .get(function)
                    .and_then(|r| r.get(t))
                    .and_then(|e| e.ert);
                let o = other
                    .rows
                    .get(function)
                    .and_then(|r| r.get(t))
                    .and_then(|e| e.ert);
                match (b, o) {
                    (Some(b), Some(o)) => {
                        if b < o {
                            base_wins += 1;
                        } else if o < b {
                            other_wins += 1;
                        }
                        SpeedupCell::Ratio(b / o)
                    }
                    (Some(_), None) => {
                        base_wins += 1;
                        SpeedupCell::BaseOnly
                    }
                    (None, Some(_)) => {
                        other_wins += 1;
                        SpeedupCell::OtherOnly
                    }
                    (None, None) => SpeedupCell::Neither,
                }
            })
            .collect();
        cells.insert(function.clone(), row);
    }
    SpeedupTable {
        cells,
        base_wins,
        other_wins,
    }
}

/// Per target: the `K` of the descent that reached it first in one run, and
/// whether another descent reached it at the same time (the smaller `K` is
/// kept).
pub fn first_hitting_k(log: &RunLog, f_opt: f64, grid: &TargetGrid) -> Vec<Option<(u64, bool)>> {
    grid.epsilons
        .iter()
        .map(|&eps| {
            let mut first: BTreeMap<&str, (f64, u64)> = BTreeMap::new();
            for r in log.records.iter().filter(|r| r.best_f - f_opt <= eps) {
                first
                    .entry(r.descent_id.as_str())
                    .and_modify(|e| {
                        if r.wall_ms < e.0 {
                            *e = (r.wall_ms, r.k)
                        }
                    })
                    .or_insert((r.wall_ms, r.k));
            }
            let t_min = first.values().map(|e| e.0).min_by(f64::total_cmp)?;
            let ks: Vec<u64> = first
                .values()
                .filter(|e| e.0 == t_min)
                .map(|e| e.1)
                .collect();
            let k = *ks.iter().min().expect("at least one descent at t_min");
            Some((k, ks.len() > 1))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestKCell {
    /// Mean `log2 K` over the runs that reached the target.
    pub mean_log2_k: Option<f64>,
    pub runs_hit: usize,
    pub ties: usize,
}

impl fmt::Display for BestKCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mean_log2_k {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("-"),
        }
    }
}

/// Averages [`first_hitting_k`] over runs of one function.
pub fn best_k_table(runs: &[(&RunLog, f64)], grid: &TargetGrid) -> Vec<BestKCell> {
    let per_run: Vec<_> = runs
        .iter()
        .map(|(log, f_opt)| first_hitting_k(log, *f_opt, grid))
        .collect();
    (0..grid.len())
        .map(|t| {
            let hits: Vec<(u64, bool)> = per_run.iter().filter_map(|r| r[t]).collect();
            let mean_log2_k = if hits.is_empty() {
                None
            } else {
                Some(hits.iter().map(|(k, _)| (*k as f64).log2()).sum::<f64>() / hits.len() as f64)
            };
            BestKCell {
                mean_log2_k,
                runs_hit: hits.len(),
                ties: hits.iter().filter(|h| h.1).count(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runlog::Record;

    fn log(points: &[(f64, f64, &str, u64)]) -> RunLog {
        RunLog {
            records: points
                .iter()
                .enumerate()
                .map(|(i, &(t, f, id, k))| Record {
                    wall_ms: t,
                    evals: (i as u64 + 1) * 10,
                    best_f: f,
                    descent_id: id.into(),
                    k,
                })
                .collect(),
            descents: Vec::new(),
        }
    }

    #[test]
    fn default_grid() {
        let g = TargetGrid::default();
        assert_eq!(g.len(), 9);
        assert_eq!(g.epsilons()[0], 100.0);
        assert_eq!(g.epsilons()[4], 1.0);
        assert_eq!(g.epsilons()[8], 1e-8);
        assert!(TargetGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TargetGrid::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn ert_worked_examples() {
        assert_eq!(ert(&[(Some(10.0), 10.0); 3]).unwrap(), Some(10.0));
        assert_eq!(
            ert(&[(Some(5.0), 5.0), (None, 7.0), (Some(9.0), 9.0)]).unwrap(),
            Some(10.5)
        );
        assert_eq!(ert(&[(None, 7.0), (None, 8.0)]).unwrap(), None);
        assert!(matches!(ert(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn ecdf_counts() {
        let c = ecdf(&[Some(1.0), Some(2.0), Some(3.0), None], 4);
        assert_eq!(c.points, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.75)]);
        let c = ecdf(&[Some(2.0), Some(2.0), None], 3);
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.final_fraction() * 3.0, 2.0);
        let c = ecdf(&[None, None], 2);
        assert!(c.points.is_empty());
        assert_eq!(c.fraction_at(1e9), 0.0);
    }

    #[test]
    fn hitting_time_cases() {
        let grid = TargetGrid::new(vec![10.0, 1.0, 0.1]).unwrap();
        let l = log(&[(1.0, 5.0, "a", 1), (2.0, 3.0, "a", 1), (3.0, 0.5, "a", 1)]);
        assert_eq!(
            hitting_times(&l, 0.0, &grid),
            vec![Some(1.0), Some(3.0), None]
        );
        assert_eq!(
            hitting_times_on(&l, 0.0, &grid, Axis::Evals),
            vec![Some(10.0), Some(30.0), None]
        );
    }

    #[test]
    fn speedup_markers() {
        let grid = TargetGrid::new(vec![1.0, 0.1, 0.01]).unwrap();
        let mk = |name: &str, erts: [Option<f64>; 3]| ErtTable {
            algorithm: name.into(),
            grid: grid.clone(),
            rows: [(
                "f".to_string(),
                erts.iter()
                    .map(|e| ErtEntry {
                        ert: *e,
                        successes: e.is_some() as usize,
                        runs: 1,
                    })
                    .collect(),
            )]
            .into(),
        };
        let base = mk("a", [Some(20.0), None, None]);
        let other = mk("b", [Some(10.0), Some(3.0), None]);
        let t = speedup_table(&base, &other);
        assert_eq!(
            t.cells["f"],
            vec![
                SpeedupCell::Ratio(2.0),
                SpeedupCell::OtherOnly,
                SpeedupCell::Neither
            ]
        );
        assert_eq!((t.base_wins, t.other_wins), (0, 2));
        let same = speedup_table(&other, &other);
        assert_eq!(same.cells["f"][0], SpeedupCell::Ratio(1.0));
        assert_eq!(SpeedupCell::BaseOnly.to_string(), "X");
    }

    #[test]
    fn best_k_cases() {
        let grid = TargetGrid::new(vec![1.0, 1e-3]).unwrap();
        let a = log(&[(1.0, 0.5, "k1", 1), (2.0, 0.4, "k4", 4)]);
        let b = log(&[
            (1.0, 2.0, "k2", 2),
            (1.5, 0.2, "k8", 8),
            (2.0, 0.9, "k2", 2),
        ]);
        let cells = best_k_table(&[(&a, 0.0), (&b, 0.0)], &grid);
        assert_eq!(cells[0].mean_log2_k, Some(1.5));
        assert_eq!(cells[0].runs_hit, 2);
        assert_eq!(cells[1].mean_log2_k, None);
        assert_eq!(cells[1].to_string(), "-");

        let only = best_k_table(&[(&a, 0.0)], &grid);
        assert_eq!(only[0].mean_log2_k, Some(0.0));

        let tied = log(&[(3.0, 0.1, "x", 8), (3.0, 0.1, "y", 2)]);
        let hit = first_hitting_k(&tied, 0.0, &grid);
        assert_eq!(hit[0], Some((2, true)));
    }

    #[test]
    fn two_runs_average_log2_k() {
        let grid = TargetGrid::new(vec![1.0]).unwrap();
        let a = log(&[(1.0, 0.0, "d", 2)]);
        let b = log(&[(1.0, 0.0, "d", 8)]);
        assert_eq!(
            best_k_table(&[(&a, 0.0), (&b, 0.0)], &grid)[0].mean_log2_k,
            Some(2.0)
        );
    }
}
