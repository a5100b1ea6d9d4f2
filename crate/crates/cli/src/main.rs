use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use xorq::format::{
    read_labels, read_records, read_reliability_csv, write_labels, write_records,
    write_reliability_csv,
};
use xorq::harness::{run_experiment, write_csv, ExperimentConfig};
use xorq::limits::{xor_limit, Side};
use xorq::noise::answer_queries;
use xorq::oracle::ml_decode;
use xorq::querygen::generate_queries;
use xorq::{
    DegreeDistribution, Error, InferenceConfig, LabelVector, NoiseSpec, QueryGenConfig, SeedStream,
    DEFAULT_LAMBDA,
};

#[derive(Parser)]
#[command(
    name = "xorq",
    version,
    about = "Label recovery from noisy XOR queries"
)]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random query design.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate noisy worker answers for a query design.
    Answer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Ground-truth labels; drawn from the seed when absent.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Where to write the labels that were used.
        #[arg(long)]
        truth_out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate labels with the four-phase decoder.
    Infer {
        /// Query records carrying answers.
        #[arg(long)]
        answers: PathBuf,
        /// Query design to check the answer file against.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the estimated reliability table here as CSV.
        #[arg(long)]
        eps_out: Option<PathBuf>,
    },
    /// Exact maximum-likelihood decoding for small instances.
    Ml {
        #[arg(long)]
        answers: PathBuf,
        /// Reliability table, `worker,degree,eps_hat` CSV.
        #[arg(long)]
        reliability: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the likelihood and tie count here as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Threshold number of queries for strong recovery.
    Limit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo frame/bit error rates over query budgets.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record measured wall time instead of 0, making output nondeterministic.
        #[arg(long)]
        timing: bool,
    },
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

#[derive(Deserialize)]
struct AnswerConfig {
    noise: NoiseSpec,
    /// Number of workers, when some never appear in the query file.
    #[serde(default)]
    w: Option<usize>,
    #[serde(default = "default_lambda")]
    lambda: f64,
    #[serde(default)]
    unchecked_noise: bool,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct InferFile {
    #[serde(flatten)]
    inference: InferenceConfig,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct LimitConfig {
    m: usize,
    w: usize,
    phi: DegreeDistribution,
    noise: NoiseSpec,
    #[serde(default)]
    eta: f64,
    #[serde(default)]
    side: Side,
    #[serde(default = "default_lambda")]
    lambda: f64,
}

#[derive(Serialize)]
struct MlSummary {
    log_likelihood: f64,
    tie_count: usize,
}

fn open(path: &Path) -> xorq::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> xorq::Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> xorq::Result<SeedStream> {
    flag.or(config).map(SeedStream::new).ok_or_else(|| {
        Error::InvalidConfig("no seed given; pass --seed or set \"seed\" in the config".into())
    })
}

/// Writes `data` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, data: &[u8]) -> xorq::Result<()> {
    match path {
        Some(p) => std::fs::write(p, data)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(data)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn read_answered(
    answers: &Path,
    queries: Option<&Path>,
) -> xorq::Result<(xorq::TripartiteGraph, xorq::AnswerSet)> {
    let records = read_records(open(answers)?)?;
    if let Some(qpath) = queries {
        let design = read_records(open(qpath)?)?;
        if design.queries != records.queries {
            return Err(Error::InvalidInput(format!(
                "{} and {} describe different query designs",
                qpath.display(),
                answers.display()
            )));
        }
    }
    Ok((records.graph()?, records.answer_set()?))
}

fn dispatch(command: Command) -> xorq::Result<()> {
    match command {
        Command::Generate { config, seed, out } => {
            let cfg: QueryGenConfig = load_json(&config)?;
            let seed = resolve_seed(seed, cfg.seed)?;
            let g = generate_queries(&cfg, seed)?;
            let mut buf = Vec::new();
            write_records(&g, None, &mut buf)?;
            emit(out.as_deref(), &buf)
        }
        Command::Answer {
            config,
            queries,
            truth,
            truth_out,
            seed,
            out,
        } => {
            let cfg: AnswerConfig = load_json(&config)?;
            let seed = resolve_seed(seed, cfg.seed)?;
            let g = read_records(open(&queries)?)?.graph_with_sizes(None, cfg.w)?;
            let r = if cfg.unchecked_noise {
                cfg.noise
                    .build_unchecked(g.w(), g.max_degree(), cfg.lambda)?
            } else {
                cfg.noise.build(g.w(), g.max_degree(), cfg.lambda)?
            };
            let x = match truth {
                Some(p) => {
                    let x = read_labels(open(&p)?)?;
                    if x.len() != g.m() {
                        return Err(Error::InvalidInput(format!(
                            "{} labels for {} label nodes",
                            x.len(),
                            g.m()
                        )));
                    }
                    x
                }
                None => LabelVector::random(g.m(), &mut seed.fork(0).rng()),
            };
            let y = answer_queries(&x, &g, &r, seed.fork(1))?;
            let mut buf = Vec::new();
            write_records(&g, Some(&y), &mut buf)?;
            if let Some(p) = truth_out {
                let mut labels = Vec::new();
                write_labels(&x, &mut labels)?;
                std::fs::write(p, labels)?;
            }
            emit(out.as_deref(), &buf)
        }
        Command::Infer {
            answers,
            queries,
            config,
            seed,
            out,
            eps_out,
        } => {
            let (g, y) = read_answered(&answers, queries.as_deref())?;
            let file: Option<InferFile> = config.as_deref().map(load_json).transpose()?;
            let seed = resolve_seed(seed, file.as_ref().and_then(|f| f.seed))?;
            let cfg = file.map(|f| f.inference).unwrap_or_default();
            let result = xorq::infer::run(&y, &g, &cfg, seed)?;
            let mut buf = Vec::new();
            write_labels(result.final_estimate(), &mut buf)?;
            if let Some(p) = eps_out {
                let mut table = Vec::new();
                write_reliability_csv(&result.eps_hat, &mut table)?;
                std::fs::write(p, table)?;
            }
            emit(out.as_deref(), &buf)
        }
        Command::Ml {
            answers,
            reliability,
            queries,
            seed,
            out,
            report,
        } => {
            let (g, y) = read_answered(&answers, queries.as_deref())?;
            let r = read_reliability_csv(open(&reliability)?, DEFAULT_LAMBDA)?;
            let seed = resolve_seed(seed, None)?;
            let result = ml_decode(&y, &g, &r, &mut seed.rng())?;
            let mut buf = Vec::new();
            write_labels(&result.best, &mut buf)?;
            if let Some(p) = report {
                let summary = MlSummary {
                    log_likelihood: result.log_likelihood,
                    tie_count: result.tie_count,
                };
                let mut json = serde_json::to_vec_pretty(&summary)?;
                json.push(b'\n');
                std::fs::write(p, json)?;
            }
            emit(out.as_deref(), &buf)
        }
        Command::Limit { config, out } => {
            let cfg: LimitConfig = load_json(&config)?;
            let r = cfg.noise.build(cfg.w, cfg.phi.max_degree(), cfg.lambda)?;
            let report = xor_limit(cfg.m, &cfg.phi, &r, cfg.eta, cfg.side)?;
            let mut buf = serde_json::to_vec_pretty(&report)?;
            buf.push(b'\n');
            emit(out.as_deref(), &buf)
        }
        Command::Experiment {
            config,
            seed,
            out,
            timing,
        } => {
            let cfg: ExperimentConfig = load_json(&config)?;
            let seed = resolve_seed(seed, cfg.seed)?;
            let mut output = run_experiment(&cfg, seed)?;
            if !timing {
                output.rows.iter_mut().for_each(|r| r.wall_time_s = 0.0);
            }
            let mut buf = Vec::new();
            write_csv(&output.rows, &mut buf)?;
            emit(out.as_deref(), &buf)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            // Help and version go to stdout, usage errors to stderr.
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    };

    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
