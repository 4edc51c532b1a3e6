use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::objectives::FunctionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    SeqIpop,
    KReplicated,
    KDistributed,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::SeqIpop,
        Algorithm::KReplicated,
        Algorithm::KDistributed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SeqIpop => "seq-ipop",
            Algorithm::KReplicated => "k-replicated",
            Algorithm::KDistributed => "k-distributed",
        }
    }

    pub(crate) fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Everything needed to reproduce an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub algorithms: Vec<Algorithm>,
    pub dimensions: Vec<usize>,
    pub costs_ms: Vec<f64>,
    pub functions: Vec<FunctionId>,
    pub runs: usize,
    pub lambda_start: usize,
    pub kmax_seq_ipop: usize,
    pub kmax_replicated: usize,
    pub kmax_distributed: usize,
    /// `None` means the smallest count every selected strategy can run on.
    pub workers: Option<usize>,
    pub wall_limit_ms: f64,
    /// Total for seq-ipop, per descent for the parallel strategies.
    pub eval_limit: Option<u64>,
    /// Runs stop once the best quality is this close to the optimum.
    pub target_gap: Option<f64>,
    pub restart_on_finish: bool,
    pub virtual_time: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            dimensions: vec![10],
            costs_ms: vec![0.0, 1.0, 10.0],
            functions: FunctionId::ALL.to_vec(),
            runs: 20,
            lambda_start: 12,
            kmax_seq_ipop: 16,
            kmax_replicated: 16,
            kmax_distributed: 16,
            workers: None,
            wall_limit_ms: 10_000.0,
            eval_limit: None,
            target_gap: Some(1e-8),
            restart_on_finish: false,
            virtual_time: false,
            seed: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: [&str; 17] = [
    "algorithms",
    "dimensions",
    "costs_ms",
    "functions",
    "runs",
    "lambda_start",
    "kmax_seq_ipop",
    "kmax_replicated",
    "kmax_distributed",
    "workers",
    "wall_limit_ms",
    "eval_limit",
    "target_gap",
    "restart_on_finish",
    "virtual_time",
    "seed",
    "out",
];

impl ExperimentPlan {
    /// Workers needed by a strategy with this plan's settings.
    pub fn required_workers(&self, algorithm: Algorithm) -> usize {
        match algorithm {
            Algorithm::SeqIpop => 1,
            Algorithm::KReplicated => self.kmax_replicated * self.lambda_start,
            Algorithm::KDistributed => (2 * self.kmax_distributed - 1) * self.lambda_start,
        }
    }

    pub fn resolved_workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            self.algorithms
                .iter()
                .map(|&a| self.required_workers(a))
                .max()
                .unwrap_or(1)
                .max(self.lambda_start)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.algorithms.is_empty() || self.functions.is_empty() {
            return fail("plan needs at least one algorithm and one function".into());
        }
        if self.dimensions.is_empty() || self.dimensions.contains(&0) {
            return fail("dimensions must be non-empty and positive".into());
        }
        if self.costs_ms.is_empty() || self.costs_ms.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return fail("costs must be non-empty, finite and non-negative".into());
        }
        if self.runs == 0 {
            return fail("runs must be at least 1".into());
        }
        if self.lambda_start < 2 {
            return fail("lambda_start must be at least 2".into());
        }
        for (name, k) in [
            ("kmax_seq_ipop", self.kmax_seq_ipop),
            ("kmax_replicated", self.kmax_replicated),
            ("kmax_distributed", self.kmax_distributed),
        ] {
            if !k.is_power_of_two() {
                return fail(format!("{name} must be a power of two, got {k}"));
            }
        }
        if !(self.wall_limit_ms > 0.0) {
            return fail("wall limit must be positive".into());
        }
        let workers = self.resolved_workers();
        for &a in &self.algorithms {
            if a == Algorithm::SeqIpop {
                continue;
            }
            let need = self.required_workers(a);
            if workers < need {
                return fail(format!(
                    "{a} with lambda_start={} needs {need} workers, plan has {workers}",
                    self.lambda_start
                ));
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what} `{value}` for `{key}`"));
        let v = value.trim();
        match key {
            "algorithms" => self.algorithms = parse_list(v)?,
            "dimensions" => self.dimensions = parse_list(v).map_err(|_| bad("dimension list"))?,
            "costs_ms" => self.costs_ms = parse_list(v).map_err(|_| bad("cost list"))?,
            "functions" => self.functions = parse_list(v)?,
            "runs" => self.runs = v.parse().map_err(|_| bad("count"))?,
            "lambda_start" => self.lambda_start = v.parse().map_err(|_| bad("count"))?,
            "kmax_seq_ipop" => self.kmax_seq_ipop = v.parse().map_err(|_| bad("count"))?,
            "kmax_replicated" => self.kmax_replicated = v.parse().map_err(|_| bad("count"))?,
            "kmax_distributed" => self.kmax_distributed = v.parse().map_err(|_| bad("count"))?,
            "workers" => self.workers = parse_opt(v).map_err(|_| bad("count"))?,
            "wall_limit_ms" => self.wall_limit_ms = v.parse().map_err(|_| bad("duration"))?,
            "eval_limit" => self.eval_limit = parse_opt(v).map_err(|_| bad("count"))?,
            "target_gap" => self.target_gap = parse_opt(v).map_err(|_| bad("gap"))?,
            "restart_on_finish" => {
                self.restart_on_finish = v.parse().map_err(|_| bad("boolean"))?
            }
            "virtual_time" => self.virtual_time = v.parse().map_err(|_| bad("boolean"))?,
            "seed" => self.seed = v.parse().map_err(|_| bad("seed"))?,
            "out" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown plan key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines, `#` comments and `cell.*`
    /// entries are skipped.
    pub fn apply_kv(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, (key, value)) in kv_lines(text, origin)?.into_iter().enumerate() {
            if key.starts_with("cell.") {
                continue;
            }
            self.set(&key, &value)
                .map_err(|e| Error::parse(origin, format!("entry {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let join = |items: Vec<String>| items.join(",");
        let opt = |o: Option<String>| o.unwrap_or_else(|| "none".into());
        let values = [
            join(self.algorithms.iter().map(|a| a.to_string()).collect()),
            join(self.dimensions.iter().map(|d| d.to_string()).collect()),
            join(self.costs_ms.iter().map(|c| c.to_string()).collect()),
            join(self.functions.iter().map(|f| f.to_string()).collect()),
            self.runs.to_string(),
            self.lambda_start.to_string(),
            self.kmax_seq_ipop.to_string(),
            self.kmax_replicated.to_string(),
            self.kmax_distributed.to_string(),
            opt(self.workers.map(|w| w.to_string())),
            self.wall_limit_ms.to_string(),
            opt(self.eval_limit.map(|e| e.to_string())),
            opt(self.target_gap.map(|g| g.to_string())),
            self.restart_on_finish.to_string(),
            self.virtual_time.to_string(),
            self.seed.to_string(),
            self.out_dir.display().to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

pub(crate) fn kv_lines(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::parse(origin, format!("line {}: expected `key = value`", n + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| Error::Config(e.to_string())))
        .collect()
}

fn parse_opt<T: FromStr>(v: &str) -> std::result::Result<Option<T>, T::Err> {
    if v == "none" {
        Ok(None)
    } else {
        v.parse().map(Some)
    }
}
