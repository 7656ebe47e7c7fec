use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use structem::data::{ancestral_sample, inject_missing_mcar};
use structem::eval::{kl_divergence, log_loss, KlMode};
use structem::experiment::{learn, run_benchmark, write_benchmark_csv, BenchmarkSpec};
use structem::io::{read_dataset, read_network, write_dataset, write_network, DEFAULT_MISSING_MARKER};
use structem::param_em::{em_fit, EmConfig, EmInit};
use structem::scoring::{cheeseman_stutz_with, ExpectedScorer, FamilyScorer};
use structem::search::SemConfig;
use structem::{BayesNet, CompletionModel, DirichletPrior, ScoreKind};

#[derive(Debug, Parser)]
#[command(name = "structem", version, about = "Learn discrete Bayesian networks from incomplete data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a network from a CSV dataset and write it as JSON.
    Learn(LearnArgs),
    /// Draw complete records from a network.
    Sample(SampleArgs),
    /// Blank out cells of a dataset completely at random.
    Corrupt(CorruptArgs),
    /// Print the expected score and Cheeseman-Stutz score of a network on data.
    Score(ScoreArgs),
    /// Compare a learned network with a reference network.
    Evaluate(EvaluateArgs),
    /// Run a benchmark described by a JSON spec and write a CSV table.
    Benchmark(BenchmarkArgs),
}

fn parse_method(s: &str) -> Result<ScoreKind, String> {
    s.parse::<ScoreKind>().map_err(|e| e.to_string())
}

fn parse_ess(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    DirichletPrior::new(v).map(|_| v).map_err(|e| e.to_string())
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1)"))
    }
}

fn parse_seconds(s: &str) -> Result<Duration, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number of seconds"))?;
    if v > 0.0 && v.is_finite() {
        Ok(Duration::from_secs_f64(v))
    } else {
        Err(format!("time limit {v} must be positive"))
    }
}

#[derive(Debug, Args)]
struct LearnArgs {
    /// Training data (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    /// Number of binary hidden variables to introduce.
    #[arg(long, default_value_t = 0)]
    hidden: usize,
    /// Scoring method: bde-linear, bde-summation, bde-integration, bde-laplace or bic.
    #[arg(long, default_value = "bde-summation", value_parser = parse_method)]
    method: ScoreKind,
    /// Equivalent sample size of the BDe prior.
    #[arg(long, default_value_t = 1.0, value_parser = parse_ess)]
    ess: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the learned network.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    max_parents: usize,
    /// Wall-clock budget in seconds, checked between restarts.
    #[arg(long, value_parser = parse_seconds)]
    time_limit: Option<Duration>,
    /// Network whose variables fix the state labels of the data columns.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    max_sem_iters: usize,
    /// Hidden-edge perturbations after each structural EM run.
    #[arg(long, default_value_t = 5)]
    perturbations: usize,
    /// Random-walk restarts.
    #[arg(long, default_value_t = 10)]
    walks: usize,
    #[arg(long, default_value_t = 20)]
    walk_length: usize,
    #[arg(long, default_value = DEFAULT_MISSING_MARKER)]
    missing_marker: String,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    net: PathBuf,
    /// Number of records.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long)]
    data: PathBuf,
    /// Probability that each cell goes missing.
    #[arg(long, value_parser = parse_fraction)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = DEFAULT_MISSING_MARKER)]
    missing_marker: String,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "bde-summation", value_parser = parse_method)]
    method: ScoreKind,
    #[arg(long, default_value_t = 1.0, value_parser = parse_ess)]
    ess: f64,
    /// Refit the parameters by EM before scoring instead of using the file's.
    #[arg(long)]
    refit: bool,
    #[arg(long, default_value = DEFAULT_MISSING_MARKER)]
    missing_marker: String,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Reference (generating) network.
    #[arg(long = "true")]
    truth: PathBuf,
    #[arg(long)]
    learned: PathBuf,
    /// Held-out data for log loss.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Estimate KL from this many samples instead of enumerating.
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = DEFAULT_MISSING_MARKER)]
    missing_marker: String,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn run(command: Command) -> structem::Result<()> {
    match command {
        Command::Learn(a) => {
            let schema = a.schema.as_ref().map(read_network).transpose()?;
            let data = read_dataset(
                &a.data,
                schema.as_ref().map(|n| n.structure.variables()),
                &a.missing_marker,
            )?;
            let config = SemConfig {
                max_sem_iters: a.max_sem_iters,
                score: a.method,
                em: EmConfig {
                    init: EmInit::Random { seed: a.seed },
                    ..EmConfig::default()
                },
                max_parents: a.max_parents,
                n_edge_perturbations: a.perturbations,
                random_walk_length: a.walk_length,
                n_random_walks: a.walks,
                time_limit: a.time_limit,
                seed: a.seed,
                ..SemConfig::default()
            };
            let outcome = learn(&data, a.hidden, &DirichletPrior::new(a.ess)?, &config)?;
            eprint!("{}", outcome.diagnostics.to_tsv());
            if let Some(reason) = &outcome.diagnostics.failure {
                eprintln!("warning: search stopped early: {reason}");
            }
            if outcome.diagnostics.timed_out {
                eprintln!("warning: time limit reached; remaining restarts skipped");
            }
            let net = BayesNet::new(outcome.structure, outcome.params)?;
            write_network(&a.out, &net)
        }
        Command::Sample(a) => {
            let net = read_network(&a.net)?;
            let data = ancestral_sample(&net.structure, &net.params, a.n, a.seed)?;
            write_dataset(&a.out, &data, DEFAULT_MISSING_MARKER)
        }
        Command::Corrupt(a) => {
            let data = read_dataset(&a.data, None, &a.missing_marker)?;
            let out = inject_missing_mcar(&data, a.fraction, a.seed)?;
            write_dataset(&a.out, &out, &a.missing_marker)
        }
        Command::Score(a) => {
            let net = read_network(&a.net)?;
            let data = read_dataset(&a.data, Some(net.structure.variables()), &a.missing_marker)?;
            let prior = DirichletPrior::new(a.ess)?;
            let params = if a.refit {
                em_fit(&net.structure, &data, &prior, &EmConfig::default())?.params
            } else {
                net.params
            };
            let model = CompletionModel::from_dataset(&net.structure, &params, &data)?;
            let mut scorer = ExpectedScorer::new(model, prior, a.method, 0);
            let expected = scorer.structure_score(&net.structure)?;
            let ess = scorer.statistics_map(&net.structure)?;
            let cs = cheeseman_stutz_with(scorer.model(), &prior, &ess)?;
            println!("expected_score\t{expected:?}");
            println!("cheeseman_stutz\t{cs:?}");
            Ok(())
        }
        Command::Evaluate(a) => {
            let truth = read_network(&a.truth)?;
            let learned = read_network(&a.learned)?;
            let mode = match a.mc {
                Some(samples) => KlMode::MonteCarlo { samples, seed: a.seed },
                None => KlMode::Exact,
            };
            println!("kl\t{:?}", kl_divergence(&truth, &learned, mode)?);
            if let Some(path) = &a.test {
                let test = read_dataset(path, Some(truth.structure.variables()), &a.missing_marker)?;
                let lt = log_loss(&truth, &test)?;
                let ll = log_loss(&learned, &test)?;
                println!("log_loss_true\t{lt:?}");
                println!("log_loss_learned\t{ll:?}");
                println!("log_loss_gap\t{:?}", ll - lt);
            }
            Ok(())
        }
        Command::Benchmark(a) => {
            let spec = BenchmarkSpec::read(&a.spec)?;
            let report = run_benchmark(&spec)?;
            let file = std::fs::File::create(&a.out)
                .map_err(|e| structem::Error::File { path: a.out.clone(), source: Box::new(e.into()) })?;
            let mut w = std::io::BufWriter::new(file);
            write_benchmark_csv(&mut w, &report)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
