use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::plan::Algorithm;
use super::run::{read_manifest, Cell};
use crate::analysis::{
    best_k_table, ecdf, hitting_times_on, speedup_table, spent_on, Axis, ErtTable, RunHits,
    TargetGrid,
};
use crate::error::{Error, Result};
use crate::runlog::{write_atomic, RunLog};

/// Files written by [`analyze_dir`], relative to the input directory.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisFiles {
    pub written: Vec<PathBuf>,
}

struct Loaded {
    cell: Cell,
    log: RunLog,
}

/// Reads every completed run under `dir` and writes the analysis tables to
/// `dir/analysis`.
pub fn analyze_dir(dir: &Path, grid: &TargetGrid) -> Result<AnalysisFiles> {
    let manifest = read_manifest(dir)?;
    let mut loaded = Vec::new();
    for (cell, done) in manifest.cells {
        if !done {
            continue;
        }
        let records = dir.join(cell.records_path());
        let descents = dir.join(cell.descents_path());
        let log = RunLog::load(&records, Some(&descents))?;
        loaded.push(Loaded { cell, log });
    }
    if loaded.is_empty() {
        return Err(Error::Contract(format!(
            "no completed runs under {}",
            dir.display()
        )));
    }

    let algorithms: Vec<Algorithm> = manifest
        .plan
        .algorithms
        .iter()
        .copied()
        .filter(|a| loaded.iter().any(|l| l.cell.algorithm == *a))
        .collect();
    let out = dir.join("analysis");
    let mut written = Vec::new();
    let mut emit = |rel: &str, text: String| -> Result<()> {
        write_atomic(&out.join(rel), text.as_bytes())?;
        written.push(PathBuf::from("analysis").join(rel));
        Ok(())
    };

    for (axis, prefix, unit) in [(Axis::WallMs, "", "ms"), (Axis::Evals, "evals/", "evals")] {
        let tables = ert_tables(&loaded, &algorithms, grid, axis)?;
        let mut ert_csv = format!("algorithm,function,epsilon,ert_{unit},successes,runs\n");
        for table in &tables {
            for (function, entries) in &table.rows {
                for (eps, e) in grid.epsilons().iter().zip(entries) {
                    let value = e.ert.map_or("NA".to_string(), |v| v.to_string());
                    writeln!(
                        ert_csv,
                        "{},{function},{eps},{value},{},{}",
                        table.algorithm, e.successes, e.runs
                    )
                    .unwrap();
                }
            }
        }
        emit(&format!("{prefix}ert.csv"), ert_csv)?;

        let time_col = if axis == Axis::WallMs {
            "time_ms"
        } else {
            "evals"
        };
        let mut ecdf_csv = format!("algorithm,{time_col},fraction\n");
        for &alg in &algorithms {
            let runs: Vec<&Loaded> = loaded.iter().filter(|l| l.cell.algorithm == alg).collect();
            let hits: Vec<Option<f64>> = runs
                .iter()
                .flat_map(|l| hitting_times_on(&l.log, l.cell.f_opt, grid, axis))
                .collect();
            let curve = ecdf(&hits, hits.len());
            if curve.points.is_empty() {
                writeln!(ecdf_csv, "{alg},0,0").unwrap();
            }
            for (t, f) in &curve.points {
                writeln!(ecdf_csv, "{alg},{t},{f}").unwrap();
            }
        }
        emit(&format!("{prefix}ecdf.csv"), ecdf_csv)?;

        if axis == Axis::WallMs {
            let (base, other) = primary_pair(&tables);
            emit("speedup.csv", speedup_csv(base, other, grid))?;
            if tables.len() >= 2 {
                let mut wins = String::from("base,other,base_wins,other_wins\n");
                for i in 0..tables.len() {
                    for j in i + 1..tables.len() {
                        let (a, b) = (&tables[i], &tables[j]);
                        emit(
                            &format!("speedup_{}_vs_{}.csv", a.algorithm, b.algorithm),
                            speedup_csv(a, b, grid),
                        )?;
                        let t = speedup_table(a, b);
                        writeln!(
                            wins,
                            "{},{},{},{}",
                            a.algorithm, b.algorithm, t.base_wins, t.other_wins
                        )
                        .unwrap();
                    }
                }
                emit("wins.csv", wins)?;
            }
        }
    }

    let mut best_k = String::from("algorithm,function,epsilon,mean_log2_k,runs_hit,ties\n");
    for &alg in &algorithms {
        let mut by_problem: BTreeMap<String, Vec<(&RunLog, f64)>> = BTreeMap::new();
        for l in loaded.iter().filter(|l| l.cell.algorithm == alg) {
            by_problem
                .entry(l.cell.problem())
                .or_default()
                .push((&l.log, l.cell.f_opt));
        }
        for (function, runs) in by_problem {
            for (eps, cell) in grid.epsilons().iter().zip(best_k_table(&runs, grid)) {
                writeln!(
                    best_k,
                    "{alg},{function},{eps},{cell},{},{}",
                    cell.runs_hit, cell.ties
                )
                .unwrap();
            }
        }
    }
    emit("best_k.csv", best_k)?;

    Ok(AnalysisFiles { written })
}

fn ert_tables(
    loaded: &[Loaded],
    algorithms: &[Algorithm],
    grid: &TargetGrid,
    axis: Axis,
) -> Result<Vec<ErtTable>> {
    algorithms
        .iter()
        .map(|&alg| {
            let runs: Vec<RunHits> = loaded
                .iter()
                .filter(|l| l.cell.algorithm == alg)
                .map(|l| RunHits {
                    function: l.cell.problem(),
                    hits: hitting_times_on(&l.log, l.cell.f_opt, grid, axis),
                    spent: spent_on(&l.log, axis),
                })
                .collect();
            ErtTable::from_runs(alg.name(), grid, &runs)
        })
        .collect()
}

/// K-Replicated against K-Distributed when both ran, else the first two
/// algorithms, else the single algorithm against itself.
fn primary_pair(tables: &[ErtTable]) -> (&ErtTable, &ErtTable) {
    let find = |a: Algorithm| tables.iter().find(|t| t.algorithm == a.name());
    match (find(Algorithm::KReplicated), find(Algorithm::KDistributed)) {
        (Some(r), Some(d)) => (r, d),
        _ if tables.len() >= 2 => (&tables[0], &tables[1]),
        _ => (&tables[0], &tables[0]),
    }
}

fn speedup_csv(base: &ErtTable, other: &ErtTable, grid: &TargetGrid) -> String {
    let table = speedup_table(base, other);
    let mut csv = String::from("function,epsilon,ratio_or_marker\n");
    for (function, row) in &table.cells {
        for (eps, cell) in grid.epsilons().iter().zip(row) {
            writeln!(csv, "{function},{eps},{cell}").unwrap();
        }
    }
    csv
}
