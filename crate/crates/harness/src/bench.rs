//! Benchmark grids: one protocol run per (n, trial, learner), one CSV row
//! per run, plus per-cell summaries and fitted growth constants.
//!
//! Run seeds are `seed_i = base ^ splitmix64(i)` where `i` enumerates the
//! `(n, trial)` grid in order, so every learner meets the same instances.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use smlab_core::generate::random_full_market;
use smlab_core::protocol::Outcome;
use smlab_core::rng::{run_seed, splitmix64, SimRng};

use crate::run::{learn_market, learn_serial, strategy_from_name, Adversary, LearnerParams};
use crate::HarnessError;

pub const CSV_HEADER: [&str; 10] = [
    "run_id", "n", "quota_max", "seed", "learner", "policy", "queries", "wall_ns", "restarts",
    "outcome",
];

/// Salt separating the market generator stream from the adversary stream.
const MARKET_SALT: u64 = 0x6d61_726b_6574;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub learners: Vec<String>,
    pub policy: String,
    pub n: Vec<usize>,
    #[serde(default = "one")]
    pub quota_max: usize,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub max_rounds: Option<usize>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub threshold: Option<f64>,
    pub mcmc_steps: Option<u64>,
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> LearnerParams {
        LearnerParams {
            alpha: self.alpha,
            k: self.k,
            threshold: self.threshold,
            mcmc_steps: self.mcmc_steps,
        }
    }

    pub fn adversary(&self) -> Result<Adversary, HarnessError> {
        self.policy.parse()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.learners.is_empty() {
            return bad("learners must not be empty".into());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("n must be a nonempty list of positive sizes".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.quota_max == 0 {
            return bad("quota_max must be positive".into());
        }
        if self.max_rounds == Some(0) {
            return bad("max_rounds must be positive".into());
        }
        let adversary = self.adversary()?;
        if adversary == Adversary::Serial && self.quota_max != 1 {
            return bad("the serial adversary is one-to-one; set quota_max = 1".into());
        }
        for name in &self.learners {
            let s = strategy_from_name(name, &self.params())?;
            if s.is_one_to_one() && self.quota_max != 1 {
                return bad(format!("learner {name} needs quota_max = 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub run_id: usize,
    pub n: usize,
    pub quota_max: usize,
    pub seed: u64,
    pub learner: String,
    pub policy: String,
    pub queries: usize,
    pub wall_ns: u128,
    pub restarts: usize,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub learner: String,
    pub policy: String,
    pub n: usize,
    pub quota_max: usize,
    pub runs: usize,
    pub errors: usize,
    pub mean_queries: f64,
    pub median_queries: f64,
    pub max_queries: usize,
    pub mean_restarts: f64,
    /// `mean_queries / (n^2 log2 n)`, empty at n = 1.
    pub per_n2_log2n: Option<f64>,
    pub per_n3: f64,
}

/// Least-squares constant `c` in `mean_queries ~ c * g(n)` over the cells of
/// one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub learner: String,
    pub policy: String,
    pub model: String,
    pub c: f64,
    pub max_ratio: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<ExperimentRow>,
    pub cells: Vec<CellSummary>,
    pub fits: Vec<Fit>,
    /// Error messages of failed runs, by run id.
    pub errors: Vec<(usize, String)>,
}

/// Runs the whole grid in order; failed runs become `error` rows.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport, HarnessError> {
    run_bench_with(cfg, |_| {})
}

/// As [`run_bench`], calling `progress` after every row.
pub fn run_bench_with<F: FnMut(&ExperimentRow)>(
    cfg: &ExperimentConfig,
    mut progress: F,
) -> Result<BenchReport, HarnessError> {
    cfg.validate()?;
    let adversary = cfg.adversary()?;
    let params = cfg.params();
    let strategies = cfg
        .learners
        .iter()
        .map(|name| strategy_from_name(name, &params))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut grid = 0u64;
    for &n in &cfg.n {
        for _ in 0..cfg.trials {
            let seed = run_seed(cfg.seed, grid);
            grid += 1;
            for strategy in &strategies {
                let run_id = rows.len();
                let start = Instant::now();
                let result = match adversary {
                    Adversary::Serial => learn_serial(n, strategy.clone(), seed, cfg.max_rounds),
                    Adversary::Lex | Adversary::Random => {
                        let mut rng = SimRng::seed_from_u64(splitmix64(seed ^ MARKET_SALT));
                        let market = random_full_market(n, n, cfg.quota_max, &mut rng);
                        let policy = if adversary == Adversary::Lex {
                            smlab_core::environments::Policy::Lexicographic
                        } else {
                            smlab_core::environments::Policy::RandomUniform
                        };
                        learn_market(&market, strategy.clone(), policy, seed, cfg.max_rounds)
                    }
                };
                let wall_ns = start.elapsed().as_nanos();
                let (queries, restarts, outcome) = match result {
                    Ok(r) => (r.queries(), r.restarts, r.outcome().name().to_string()),
                    Err(e) => {
                        let round = match &e {
                            HarnessError::Protocol(p) => p.round(),
                            _ => 0,
                        };
                        errors.push((run_id, e.to_string()));
                        (round, 0, "error".to_string())
                    }
                };
                let row = ExperimentRow {
                    run_id,
                    n,
                    quota_max: cfg.quota_max,
                    seed,
                    learner: strategy.name().to_string(),
                    policy: adversary.name().to_string(),
                    queries,
                    wall_ns,
                    restarts,
                    outcome,
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    let cells = summarize(&rows);
    let fits = fit(&cells);
    Ok(BenchReport {
        rows,
        cells,
        fits,
        errors,
    })
}

fn median(sorted: &[usize]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2] as f64
    } else {
        (sorted[m / 2 - 1] + sorted[m / 2]) as f64 / 2.0
    }
}

fn n2_log2n(n: usize) -> f64 {
    let n = n as f64;
    n * n * n.log2()
}

/// Per-(learner, n) statistics over the runs that did not error.
pub fn summarize(rows: &[ExperimentRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(String, String, usize, usize)> = Vec::new();
    for r in rows {
        let key = (r.learner.clone(), r.policy.clone(), r.n, r.quota_max);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(learner, policy, n, quota_max)| {
            let cell: Vec<&ExperimentRow> = rows
                .iter()
                .filter(|r| r.learner == learner && r.policy == policy && r.n == n && r.quota_max == quota_max)
                .collect();
            let ok: Vec<&&ExperimentRow> = cell.iter().filter(|r| r.outcome != "error").collect();
            let mut q: Vec<usize> = ok.iter().map(|r| r.queries).collect();
            q.sort_unstable();
            let runs = ok.len().max(1) as f64;
            let mean = q.iter().sum::<usize>() as f64 / runs;
            CellSummary {
                learner,
                policy,
                n,
                quota_max,
                runs: cell.len(),
                errors: cell.len() - ok.len(),
                mean_queries: mean,
                median_queries: if q.is_empty() { 0.0 } else { median(&q) },
                max_queries: q.last().copied().unwrap_or(0),
                mean_restarts: ok.iter().map(|r| r.restarts).sum::<usize>() as f64 / runs,
                per_n2_log2n: (n > 1).then(|| mean / n2_log2n(n)),
                per_n3: mean / (n * n * n) as f64,
            }
        })
        .collect()
}

/// Fits `c * n^2 log2 n` and `c * n^3` per learner through the origin.
pub fn fit(cells: &[CellSummary]) -> Vec<Fit> {
    let mut learners: Vec<(String, String)> = Vec::new();
    for c in cells {
        let key = (c.learner.clone(), c.policy.clone());
        if !learners.contains(&key) {
            learners.push(key);
        }
    }
    let models: [(&str, fn(usize) -> f64); 2] =
        [("n2_log2n", n2_log2n), ("n3", |n| (n * n * n) as f64)];
    let mut out = Vec::new();
    for (learner, policy) in learners {
        for (model, g) in models {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.learner == learner && c.policy == policy && c.runs > c.errors)
                .map(|c| (g(c.n), c.mean_queries))
                .filter(|&(x, _)| x > 0.0)
                .collect();
            if pts.is_empty() {
                continue;
            }
            let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
            let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
            let max_ratio = pts.iter().map(|(x, y)| y / x).fold(0.0, f64::max);
            out.push(Fit {
                learner: learner.clone(),
                policy: policy.clone(),
                model: model.to_string(),
                c: sxy / sxx,
                max_ratio,
                cells: pts.len(),
            });
        }
    }
    out
}

/// `runs.csv` gives `runs.summary.csv` and `runs.fit.csv`.
pub fn companion_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bench".into());
    let dir = out.parent().unwrap_or(Path::new(""));
    (
        dir.join(format!("{stem}.summary.csv")),
        dir.join(format!("{stem}.fit.csv")),
    )
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::io(path, std::io::Error::other(e))
}

fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_rows<W: Write>(out: W, rows: &[ExperimentRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl BenchReport {
    /// Writes the run rows to `out` and the summaries next to it; returns
    /// the companion paths.
    pub fn write(&self, out: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
        let file = std::fs::File::create(out).map_err(|e| HarnessError::io(out, e))?;
        write_rows(file, &self.rows).map_err(|e| csv_err(out, e))?;
        let (summary, fits) = companion_paths(out);
        write_csv(&summary, &self.cells)?;
        write_csv(&fits, &self.fits)?;
        Ok((summary, fits))
    }

    pub fn stable_runs(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.outcome == Outcome::Stable.name())
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn single_trivial_run() {
        let cfg = config("learners = [\"rep-exact\"]\npolicy = \"serial\"\nn = [1]\ntrials = 1\n");
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].queries, 1);
        assert_eq!(report.rows[0].outcome, "stable");
        assert_eq!(report.cells[0].per_n2_log2n, None);
    }

    #[test]
    fn validation() {
        let bad = [
            "learners = []\npolicy = \"lex\"\nn = [2]\ntrials = 1\n",
            "learners = [\"naive\"]\npolicy = \"lex\"\nn = [0]\ntrials = 1\n",
            "learners = [\"naive\"]\npolicy = \"lex\"\nn = [2]\ntrials = 0\n",
            "learners = [\"naive\"]\npolicy = \"lex\"\nn = [2]\ntrials = 1\nquota_max = 2\n",
            "learners = [\"rep-exact\"]\npolicy = \"lex\"\nn = [2]\ntrials = 1\nalpha = 0.5\n",
            "learners = [\"mm-simple\"]\npolicy = \"serial\"\nn = [2]\ntrials = 1\nquota_max = 2\n",
            "learners = [\"naive\"]\npolicy = \"nice\"\nn = [2]\ntrials = 1\n",
            "learners = [\"naive\"]\npolicy = \"lex\"\nn = [2]\ntrials = 1\nbogus = 3\n",
        ];
        for text in bad {
            assert!(
                matches!(ExperimentConfig::from_toml(text), Err(HarnessError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn learners_share_instances() {
        let cfg = config(
            "learners = [\"mm-simple\", \"mm-exact\"]\npolicy = \"lex\"\nn = [3]\nquota_max = 2\ntrials = 3\nseed = 9\n",
        );
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert!(report.errors.is_empty());
        for pair in report.rows.chunks(2) {
            assert_eq!(pair[0].seed, pair[1].seed);
        }
        let again = run_bench(&cfg).unwrap();
        let q = |r: &BenchReport| r.rows.iter().map(|x| x.queries).collect::<Vec<_>>();
        assert_eq!(q(&report), q(&again));
    }

    #[test]
    fn fit_through_origin() {
        let cell = |n: usize, mean: f64| CellSummary {
            learner: "x".into(),
            policy: "lex".into(),
            n,
            quota_max: 1,
            runs: 1,
            errors: 0,
            mean_queries: mean,
            median_queries: mean,
            max_queries: mean as usize,
            mean_restarts: 0.0,
            per_n2_log2n: None,
            per_n3: 0.0,
        };
        let fits = fit(&[cell(2, 16.0), cell(4, 128.0)]);
        let n3 = fits.iter().find(|f| f.model == "n3").unwrap();
        assert!((n3.c - 2.0).abs() < 1e-12);
        let nl = fits.iter().find(|f| f.model == "n2_log2n").unwrap();
        // points (4, 16) and (32, 128): exact slope 4
        assert!((nl.c - 4.0).abs() < 1e-12);
    }
}
