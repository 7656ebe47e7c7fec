//! Benchmark runner: sample training sets from a generating network, corrupt
//! them, learn with each method, and tabulate KL divergence and log loss.
//!
//! Every job derives its own seeds from the spec seed and its coordinates, so the
//! table does not depend on how jobs are scheduled across threads.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ancestral_sample, inject_missing_mcar, Dataset};
use crate::error::{Error, Result};
use crate::eval::{kl_divergence, log_loss, KlMode, EXACT_KL_LIMIT};
use crate::io::{network_from_json, read_network};
use crate::model::{BayesNet, Structure};
use crate::param_em::{EmConfig, EmInit};
use crate::scoring::{DirichletPrior, ScoreKind};
use crate::search::{bayesian_sem, hidden_variables, sem_with_restarts, SemConfig, SemOutcome};

/// Environment variable capping the benchmark's worker threads.
pub const THREADS_ENV: &str = "STRUCTEM_THREADS";

fn default_fractions() -> Vec<f64> {
    vec![0.0]
}

fn default_hidden() -> Vec<usize> {
    vec![0]
}

fn default_ess() -> f64 {
    1.0
}

fn default_kl_samples() -> usize {
    100_000
}

/// A benchmark description, usually read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    /// Path to the generating network, relative to the spec file.
    #[serde(default)]
    pub generator: Option<PathBuf>,
    /// The generating network inline, as an alternative to `generator`.
    #[serde(default)]
    pub network: Option<serde_json::Value>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_fractions")]
    pub missing_fractions: Vec<f64>,
    #[serde(default = "default_hidden")]
    pub hidden_counts: Vec<usize>,
    pub methods: Vec<String>,
    pub replicates: usize,
    pub seed: u64,
    /// Seconds per learning run, checked between restarts.
    #[serde(default)]
    pub time_limit: Option<f64>,
    /// Held-out records per replicate; zero skips log loss.
    #[serde(default)]
    pub test_size: usize,
    #[serde(default = "default_ess")]
    pub ess: f64,
    #[serde(default)]
    pub max_parents: Option<usize>,
    #[serde(default)]
    pub max_sem_iters: Option<usize>,
    #[serde(default)]
    pub n_edge_perturbations: Option<usize>,
    #[serde(default)]
    pub n_random_walks: Option<usize>,
    #[serde(default)]
    pub random_walk_length: Option<usize>,
    /// Sample count for KL when the observed space is too large to enumerate.
    #[serde(default = "default_kl_samples")]
    pub kl_samples: usize,
}

impl BenchmarkSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: BenchmarkSpec = serde_json::from_str(text)?;
        spec.check()?;
        Ok(spec)
    }

    /// Reads a spec and makes a relative `generator` path relative to the file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut spec = Self::from_json(&text).map_err(|e| e.in_file(path))?;
        if let (Some(generator), Some(dir)) = (&spec.generator, path.parent()) {
            if generator.is_relative() {
                spec.generator = Some(dir.join(generator));
            }
        }
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.generator.is_some() == self.network.is_some() {
            return bad("give exactly one of `generator` and `network`".into());
        }
        if self.replicates < 1 {
            return bad("`replicates` must be at least 1".into());
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("`sizes` must be a nonempty list of positive sizes".into());
        }
        if self.missing_fractions.is_empty() || self.hidden_counts.is_empty() {
            return bad("`missing_fractions` and `hidden_counts` must be nonempty".into());
        }
        if let Some(f) = self.missing_fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return bad(format!("`missing_fractions` entry {f} is outside [0, 1)"));
        }
        if self.methods.is_empty() {
            return bad("`methods` must be nonempty".into());
        }
        self.score_kinds()?;
        DirichletPrior::new(self.ess)?;
        if let Some(t) = self.time_limit {
            if t.is_nan() || t <= 0.0 {
                return bad(format!("`time_limit` {t} must be positive"));
            }
        }
        Ok(())
    }

    pub fn score_kinds(&self) -> Result<Vec<ScoreKind>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn generator_network(&self) -> Result<BayesNet> {
        match (&self.generator, &self.network) {
            (Some(path), None) => read_network(path),
            (None, Some(value)) => network_from_json(&value.to_string()),
            _ => Err(Error::InvalidArgument("give exactly one of `generator` and `network`".into())),
        }
    }

    pub fn sem_config(&self, score: ScoreKind, seed: u64) -> SemConfig {
        let d = SemConfig::default();
        SemConfig {
            max_sem_iters: self.max_sem_iters.unwrap_or(d.max_sem_iters),
            score,
            em: EmConfig {
                init: EmInit::Random { seed },
                ..EmConfig::default()
            },
            max_parents: self.max_parents.unwrap_or(d.max_parents),
            n_edge_perturbations: self.n_edge_perturbations.unwrap_or(d.n_edge_perturbations),
            random_walk_length: self.random_walk_length.unwrap_or(d.random_walk_length),
            n_random_walks: self.n_random_walks.unwrap_or(d.n_random_walks),
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            seed,
            structure_prior: d.structure_prior,
        }
    }
}

/// One learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub size: usize,
    pub missing_fraction: f64,
    pub hidden: usize,
    pub method: ScoreKind,
    pub replicate: usize,
    pub kl: f64,
    /// Held-out log loss of the learned network, if a test set was requested.
    pub log_loss: Option<f64>,
    /// Learned minus generating log loss on the same test set.
    pub log_loss_gap: Option<f64>,
    pub edges: usize,
}

/// Mean and sample standard deviation over the replicates of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSummary {
    pub size: usize,
    pub missing_fraction: f64,
    pub hidden: usize,
    pub method: ScoreKind,
    pub kl: (f64, f64),
    pub log_loss: Option<(f64, f64)>,
    pub log_loss_gap: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub summaries: Vec<BenchmarkSummary>,
}

/// SplitMix64 finalizer over a running state.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

const TRAIN: u64 = 1;
const TEST: u64 = 2;
const MISSING: u64 = 3;
const LEARN: u64 = 4;

/// Mean and sample (n - 1) standard deviation; the deviation is 0 for one value.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    size_idx: usize,
    fraction_idx: usize,
    hidden_idx: usize,
    method_idx: usize,
    replicate: usize,
}

/// Learns a network from `train` with `hidden` extra binary hidden variables.
/// Without hidden variables a single structural EM pass starts from the empty
/// graph; with them the restart schedule starts from the hidden-parent graph.
pub fn learn(train: &Dataset, hidden: usize, prior: &DirichletPrior, config: &SemConfig) -> Result<SemOutcome> {
    let outcome = if hidden == 0 {
        let start = Structure::new(train.variables().to_vec())?;
        bayesian_sem(train, &start, prior, config)?
    } else {
        let extra = hidden_variables(hidden, 2, train.variables());
        sem_with_restarts(train, &extra, prior, config)?
    };
    if let Some(reason) = &outcome.diagnostics.failure {
        log::warn!("search stopped early: {reason}");
    }
    Ok(outcome)
}

/// Runs every (size, fraction, hidden count, method, replicate) combination.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    spec.check()?;
    let truth = spec.generator_network()?;
    let methods = spec.score_kinds()?;
    let prior = DirichletPrior::new(spec.ess)?;
    let observed_states = truth
        .structure
        .observed()
        .iter()
        .try_fold(1usize, |acc, &v| acc.checked_mul(truth.structure.arity(v)));
    let kl_mode = |seed: u64| match observed_states {
        Some(s) if s <= EXACT_KL_LIMIT => KlMode::Exact,
        _ => KlMode::MonteCarlo {
            samples: spec.kl_samples,
            seed,
        },
    };

    let mut jobs = Vec::new();
    for size_idx in 0..spec.sizes.len() {
        for fraction_idx in 0..spec.missing_fractions.len() {
            for hidden_idx in 0..spec.hidden_counts.len() {
                for method_idx in 0..methods.len() {
                    for replicate in 0..spec.replicates {
                        jobs.push(Job {
                            size_idx,
                            fraction_idx,
                            hidden_idx,
                            method_idx,
                            replicate,
                        });
                    }
                }
            }
        }
    }

    let run = |job: &Job| -> Result<BenchmarkRow> {
        let size = spec.sizes[job.size_idx];
        let fraction = spec.missing_fractions[job.fraction_idx];
        let hidden = spec.hidden_counts[job.hidden_idx];
        let method = methods[job.method_idx];
        let r = job.replicate as u64;
        // Training and test sets depend only on (size, replicate) so that methods
        // and conditions are compared on the same samples.
        let complete = ancestral_sample(
            &truth.structure,
            &truth.params,
            size,
            derive_seed(spec.seed, &[TRAIN, size as u64, r]),
        )?;
        let train = if fraction > 0.0 {
            inject_missing_mcar(&complete, fraction, derive_seed(spec.seed, &[MISSING, size as u64, r, fraction.to_bits()]))?
        } else {
            complete
        };
        let learn_seed = derive_seed(spec.seed, &[LEARN, size as u64, r, fraction.to_bits(), hidden as u64]);
        let outcome = learn(&train, hidden, &prior, &spec.sem_config(method, learn_seed))?;
        let learned = BayesNet::new(outcome.structure, outcome.params)?;
        let kl = kl_divergence(&truth, &learned, kl_mode(derive_seed(spec.seed, &[TEST, r, 0])))?;
        let (ll, gap) = if spec.test_size > 0 {
            let test = ancestral_sample(&truth.structure, &truth.params, spec.test_size, derive_seed(spec.seed, &[TEST, r]))?;
            let learned_ll = log_loss(&learned, &test)?;
            (Some(learned_ll), Some(learned_ll - log_loss(&truth, &test)?))
        } else {
            (None, None)
        };
        log::info!(
            "size={size} fraction={fraction} hidden={hidden} method={method} replicate={r}: kl={kl} edges={}",
            learned.structure.edge_count()
        );
        Ok(BenchmarkRow {
            size,
            missing_fraction: fraction,
            hidden,
            method,
            replicate: job.replicate,
            kl,
            log_loss: ll,
            log_loss_gap: gap,
            edges: learned.structure.edge_count(),
        })
    };

    let rows: Vec<BenchmarkRow> = match thread_count()? {
        Some(1) => jobs.iter().map(run).collect::<Result<_>>()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} worker threads: {e}")))?
            .install(|| jobs.par_iter().map(run).collect::<Result<_>>())?,
        None => jobs.par_iter().map(run).collect::<Result<_>>()?,
    };

    let summaries = rows
        .chunks(spec.replicates)
        .map(|cell| {
            let first = &cell[0];
            let column = |f: &dyn Fn(&BenchmarkRow) -> Option<f64>| -> Option<(f64, f64)> {
                cell.iter().map(f).collect::<Option<Vec<_>>>().map(|v| mean_sd(&v))
            };
            BenchmarkSummary {
                size: first.size,
                missing_fraction: first.missing_fraction,
                hidden: first.hidden,
                method: first.method,
                kl: column(&|r| Some(r.kl)).expect("kl is always present"),
                log_loss: column(&|r| r.log_loss),
                log_loss_gap: column(&|r| r.log_loss_gap),
            }
        })
        .collect();
    Ok(BenchmarkReport { rows, summaries })
}

pub const CSV_HEADER: [&str; 13] = [
    "row",
    "size",
    "missing_fraction",
    "hidden",
    "method",
    "replicate",
    "kl",
    "kl_sd",
    "log_loss",
    "log_loss_sd",
    "log_loss_gap",
    "log_loss_gap_sd",
    "edges",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Replicate rows of each cell followed by its `summary` row.
pub fn write_benchmark_csv<W: Write>(writer: W, report: &BenchmarkReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    let per_cell = report.rows.len() / report.summaries.len().max(1);
    for (rows, summary) in report.rows.chunks(per_cell.max(1)).zip(&report.summaries) {
        for r in rows {
            w.write_record([
                "replicate".to_string(),
                r.size.to_string(),
                r.missing_fraction.to_string(),
                r.hidden.to_string(),
                r.method.label(),
                r.replicate.to_string(),
                r.kl.to_string(),
                String::new(),
                cell(r.log_loss),
                String::new(),
                cell(r.log_loss_gap),
                String::new(),
                r.edges.to_string(),
            ])?;
        }
        w.write_record([
            "summary".to_string(),
            summary.size.to_string(),
            summary.missing_fraction.to_string(),
            summary.hidden.to_string(),
            summary.method.label(),
            String::new(),
            summary.kl.0.to_string(),
            summary.kl.1.to_string(),
            cell(summary.log_loss.map(|p| p.0)),
            cell(summary.log_loss.map(|p| p.1)),
            cell(summary.log_loss_gap.map(|p| p.0)),
            cell(summary.log_loss_gap.map(|p| p.1)),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn benchmark_csv_string(report: &BenchmarkReport) -> Result<String> {
    let mut buf = Vec::new();
    write_benchmark_csv(&mut buf, report)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}
