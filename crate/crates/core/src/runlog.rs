//! Best-so-far traces and descent summaries, with their CSV forms.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::cmaes::StopReason;
use crate::error::{Error, Result};

pub const RECORD_HEADER: [&str; 5] = ["wall_ms", "evals", "best_f", "descent_id", "k"];
pub const DESCENT_HEADER: [&str; 13] = [
    "id",
    "k",
    "lambda",
    "first_worker",
    "workers",
    "restart",
    "start_ms",
    "end_ms",
    "idle_ms",
    "iterations",
    "evals",
    "stop",
    "best_f",
];

/// One iteration end.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub wall_ms: f64,
    /// Cumulative evaluation count.
    pub evals: u64,
    pub best_f: f64,
    pub descent_id: String,
    pub k: u64,
}

/// Lifetime summary of one descent.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentInfo {
    pub id: String,
    pub k: u64,
    pub lambda: usize,
    pub first_worker: usize,
    pub workers: usize,
    pub restart: usize,
    pub start_ms: f64,
    pub end_ms: f64,
    /// Time the partition waited at a join barrier before this descent began.
    pub idle_ms: f64,
    pub iterations: u64,
    pub evals: u64,
    pub stop: StopReason,
    pub best_f: f64,
}

impl DescentInfo {
    pub fn worker_range(&self) -> std::ops::Range<usize> {
        self.first_worker..self.first_worker + self.workers
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<Record>,
    pub descents: Vec<DescentInfo>,
}

impl RunLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record, rejecting time, count or quality going backwards
    /// within one descent.
    pub fn push(&mut self, record: Record) -> Result<()> {
        if let Some(prev) = self
            .records
            .iter()
            .rev()
            .find(|r| r.descent_id == record.descent_id)
        {
            if record.wall_ms < prev.wall_ms
                || record.evals < prev.evals
                || record.best_f > prev.best_f
            {
                return Err(Error::Contract(format!(
                    "record for {} goes backwards: {:?} after {:?}",
                    record.descent_id, record, prev
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn best_f(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.best_f)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest timestamp seen, the time actually spent by the run.
    pub fn spent_ms(&self) -> f64 {
        self.records.iter().map(|r| r.wall_ms).fold(0.0, f64::max)
    }

    pub fn total_evals(&self) -> u64 {
        self.records.iter().map(|r| r.evals).max().unwrap_or(0)
    }

    /// Interleaves concurrently produced logs by time. Record `evals` becomes
    /// the cumulative count over all descents; `best_f` stays per descent.
    pub fn merge(logs: impl IntoIterator<Item = RunLog>) -> RunLog {
        let mut records = Vec::new();
        let mut descents = Vec::new();
        for log in logs {
            records.extend(log.records);
            descents.extend(log.descents);
        }
        records.sort_by(|a, b| {
            a.wall_ms
                .total_cmp(&b.wall_ms)
                .then(a.k.cmp(&b.k))
                .then_with(|| a.descent_id.cmp(&b.descent_id))
        });
        let mut last: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for r in &mut records {
            let prev = last.insert(r.descent_id.clone(), r.evals).unwrap_or(0);
            total += r.evals.saturating_sub(prev);
            r.evals = total;
        }
        descents.sort_by(|a, b| {
            a.start_ms
                .total_cmp(&b.start_ms)
                .then(a.first_worker.cmp(&b.first_worker))
                .then_with(|| a.id.cmp(&b.id))
        });
        RunLog { records, descents }
    }

    pub fn write_records<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::io("<records>", std::io::Error::other(e));
        w.write_record(RECORD_HEADER).map_err(err)?;
        for r in &self.records {
            w.write_record([
                r.wall_ms.to_string(),
                r.evals.to_string(),
                r.best_f.to_string(),
                r.descent_id.clone(),
                r.k.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<records>", e))
    }

    pub fn write_descents<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::io("<descents>", std::io::Error::other(e));
        w.write_record(DESCENT_HEADER).map_err(err)?;
        for d in &self.descents {
            w.write_record([
                d.id.clone(),
                d.k.to_string(),
                d.lambda.to_string(),
                d.first_worker.to_string(),
                d.workers.to_string(),
                d.restart.to_string(),
                d.start_ms.to_string(),
                d.end_ms.to_string(),
                d.idle_ms.to_string(),
                d.iterations.to_string(),
                d.evals.to_string(),
                d.stop.to_string(),
                d.best_f.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<descents>", e))
    }

    pub fn read_records<R: Read>(reader: R, origin: &Path) -> Result<Vec<Record>> {
        let rows = read_rows(reader, origin, &RECORD_HEADER)?;
        rows.iter()
            .enumerate()
            .map(|(line, row)| {
                let ctx = |field: &str| format!("line {}: bad {field}", line + 2);
                Ok(Record {
                    wall_ms: field(row, 0, origin, &ctx("wall_ms"))?,
                    evals: field(row, 1, origin, &ctx("evals"))?,
                    best_f: field(row, 2, origin, &ctx("best_f"))?,
                    descent_id: row[3].to_string(),
                    k: field(row, 4, origin, &ctx("k"))?,
                })
            })
            .collect()
    }

    pub fn read_descents<R: Read>(reader: R, origin: &Path) -> Result<Vec<DescentInfo>> {
        let rows = read_rows(reader, origin, &DESCENT_HEADER)?;
        rows.iter()
            .enumerate()
            .map(|(line, row)| {
                let ctx = |name: &str| format!("line {}: bad {name}", line + 2);
                Ok(DescentInfo {
                    id: row[0].to_string(),
                    k: field(row, 1, origin, &ctx("k"))?,
                    lambda: field(row, 2, origin, &ctx("lambda"))?,
                    first_worker: field(row, 3, origin, &ctx("first_worker"))?,
                    workers: field(row, 4, origin, &ctx("workers"))?,
                    restart: field(row, 5, origin, &ctx("restart"))?,
                    start_ms: field(row, 6, origin, &ctx("start_ms"))?,
                    end_ms: field(row, 7, origin, &ctx("end_ms"))?,
                    idle_ms: field(row, 8, origin, &ctx("idle_ms"))?,
                    iterations: field(row, 9, origin, &ctx("iterations"))?,
                    evals: field(row, 10, origin, &ctx("evals"))?,
                    stop: row[11].parse().map_err(|e: String| {
                        Error::parse(origin, format!("{}: {e}", ctx("stop")))
                    })?,
                    best_f: field(row, 12, origin, &ctx("best_f"))?,
                })
            })
            .collect()
    }

    /// Writes the records CSV and, when `descents_path` is given, the descent
    /// summary next to it. Both are written to a temporary name first.
    pub fn save(&self, records_path: &Path, descents_path: Option<&Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_records(&mut buf)?;
        write_atomic(records_path, &buf)?;
        if let Some(path) = descents_path {
            let mut buf = Vec::new();
            self.write_descents(&mut buf)?;
            write_atomic(path, &buf)?;
        }
        Ok(())
    }

    pub fn load(records_path: &Path, descents_path: Option<&Path>) -> Result<RunLog> {
        let file = fs::File::open(records_path).map_err(|e| Error::io(records_path, e))?;
        let records = Self::read_records(file, records_path)?;
        let descents = match descents_path {
            Some(p) if p.exists() => {
                let file = fs::File::open(p).map_err(|e| Error::io(p, e))?;
                Self::read_descents(file, p)?
            }
            _ => Vec::new(),
        };
        Ok(RunLog { records, descents })
    }
}

fn read_rows<R: Read>(reader: R, origin: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let found = r
        .headers()
        .map_err(|e| Error::parse(origin, e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::parse(
            origin,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    r.records()
        .map(|row| row.map_err(|e| Error::parse(origin, e.to_string())))
        .collect()
}

fn field<T: std::str::FromStr>(
    row: &csv::StringRecord,
    i: usize,
    origin: &Path,
    ctx: &str,
) -> Result<T> {
    row.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(origin, ctx.to_string()))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(wall_ms: f64, evals: u64, best_f: f64, id: &str, k: u64) -> Record {
        Record {
            wall_ms,
            evals,
            best_f,
            descent_id: id.into(),
            k,
        }
    }

    #[test]
    fn push_rejects_regressions_within_a_descent() {
        let mut log = RunLog::new();
        log.push(rec(1.0, 12, 5.0, "a", 1)).unwrap();
        log.push(rec(0.5, 24, 9.0, "b", 2)).unwrap();
        assert!(log.push(rec(2.0, 24, 6.0, "a", 1)).is_err());
        assert!(log.push(rec(0.9, 24, 4.0, "a", 1)).is_err());
        log.push(rec(2.0, 24, 4.0, "a", 1)).unwrap();
    }

    #[test]
    fn merge_recomputes_cumulative_evals() {
        let mut a = RunLog::new();
        a.push(rec(1.0, 2, 5.0, "a", 1)).unwrap();
        a.push(rec(3.0, 4, 4.0, "a", 1)).unwrap();
        let mut b = RunLog::new();
        b.push(rec(2.0, 4, 7.0, "b", 2)).unwrap();
        b.push(rec(3.0, 8, 1.0, "b", 2)).unwrap();
        let m = RunLog::merge([a, b]);
        let evals: Vec<u64> = m.records.iter().map(|r| r.evals).collect();
        let ids: Vec<&str> = m.records.iter().map(|r| r.descent_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "a", "b"]);
        assert_eq!(evals, [2, 6, 8, 12]);
        assert_eq!(m.best_f(), 1.0);
        assert_eq!(m.spent_ms(), 3.0);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut log = RunLog::new();
        log.push(rec(0.1 + 0.2, 12, 1.0 / 3.0, "w0-k1-r0", 1))
            .unwrap();
        log.push(rec(7.25, 24, f64::MIN_POSITIVE, "w0-k1-r0", 1))
            .unwrap();
        log.push(rec(8.0, 36, f64::INFINITY, "w12-k1-r0", 1))
            .unwrap();
        log.descents.push(DescentInfo {
            id: "w0-k1-r0".into(),
            k: 1,
            lambda: 12,
            first_worker: 0,
            workers: 12,
            restart: 0,
            start_ms: 0.0,
            end_ms: 7.25,
            idle_ms: 0.0,
            iterations: 2,
            evals: 24,
            stop: StopReason::TolFun,
            best_f: f64::MIN_POSITIVE,
        });
        let dir = tempfile::tempdir().unwrap();
        let rp = dir.path().join("run.csv");
        let dp = dir.path().join("run.descents.csv");
        log.save(&rp, Some(&dp)).unwrap();
        let back = RunLog::load(&rp, Some(&dp)).unwrap();
        assert_eq!(back, log);
        let text = fs::read_to_string(&rp).unwrap();
        assert!(text.starts_with("wall_ms,evals,best_f,descent_id,k\n"));
    }

    #[test]
    fn bad_header_is_named() {
        let err = RunLog::read_records("a,b\n1,2\n".as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(err.to_string().contains("x.csv"));
    }
}
