//! Monte Carlo frame/bit error rates versus query budget.
//!
//! Each trial draws fresh labels, a fresh query design and fresh answers,
//! decodes, and counts label errors. Trial `t` of budget `b` uses the seed
//! stream `master.fork(b).fork(t)`, and aggregation runs in trial order, so
//! rows depend only on the configuration and seed, never on scheduling.
//!
//! Budgets count the queries beyond the degree-1 initialization block
//! (`n' = n - m`); normalized budgets are multiples of the threshold `n*`.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{em_one_coin, majority_vote};
use crate::error::{Error, Result};
use crate::infer::{self, InferenceConfig};
use crate::limits::{xor_limit_any_support, Side};
use crate::model::{DegreeDistribution, LabelVector, ReliabilityMatrix, SeedStream};
use crate::noise::{answer_queries, NoiseSpec};
use crate::oracle::{ml_decode, MAX_ML_LABELS};
use crate::querygen::{generate_queries, QueryGenConfig};

pub const CSV_HEADER: &str = "budget_n,normalized_budget,fer,ber,trials,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Majority,
    Em,
    #[default]
    Xor4phase,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Budgets are multiples of `n*`.
    #[default]
    Normalized,
    /// Budgets are query counts `n'`.
    Absolute,
}

fn default_true() -> bool {
    true
}

fn default_em_iters() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    pub w: usize,
    pub phi: DegreeDistribution,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub decoder: DecoderKind,
    pub budgets: Vec<f64>,
    #[serde(default)]
    pub budget_mode: BudgetMode,
    pub trials: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default = "default_true")]
    pub degree1_init: bool,
    #[serde(default)]
    pub degree1_worker_pool: Option<Vec<usize>>,
    /// Accept error probabilities outside `[lambda, 0.5)`, e.g. noiseless runs.
    #[serde(default)]
    pub unchecked_noise: bool,
    #[serde(default = "default_em_iters")]
    pub em_iters: usize,
}

impl ExperimentConfig {
    /// Largest degree any query can have, including the initialization block.
    pub fn max_degree(&self) -> usize {
        self.phi.max_degree()
    }

    pub fn reliability(&self) -> Result<ReliabilityMatrix> {
        let lambda = self.inference.lambda;
        if self.unchecked_noise {
            self.noise
                .build_unchecked(self.w, self.max_degree(), lambda)
        } else {
            self.noise.build(self.w, self.max_degree(), lambda)
        }
    }

    /// Threshold `n*` (with `eta = 0`) for the configured design, if finite.
    pub fn n_star(&self) -> Result<Option<f64>> {
        let r = self.reliability()?;
        match xor_limit_any_support(self.m, &self.phi, &r, 0.0, Side::Upper) {
            Ok(report) => Ok(Some(report.n_star)),
            Err(Error::ZeroDenominator) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.w == 0 {
            return Err(Error::InvalidConfig("m and w must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::InvalidConfig("no budgets given".into()));
        }
        if let Some(b) = self.budgets.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidConfig(format!("budget {b} is not positive")));
        }
        if self.budget_mode == BudgetMode::Absolute {
            if let Some(b) = self.budgets.iter().find(|b| b.fract() != 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "absolute budget {b} is not an integer"
                )));
            }
        }
        self.inference.validate()?;
        self.reliability()?;
        match self.decoder {
            DecoderKind::Majority | DecoderKind::Em => {
                if self.phi.max_degree() != 1 {
                    return Err(Error::InvalidConfig(
                        "repetition decoders need the degree distribution to be a point mass at 1"
                            .into(),
                    ));
                }
                if self.decoder == DecoderKind::Em && self.em_iters == 0 {
                    return Err(Error::InvalidConfig("em_iters must be at least 1".into()));
                }
            }
            DecoderKind::Xor4phase => {
                if !self.degree1_init {
                    return Err(Error::InvalidConfig(
                        "the four-phase decoder needs the degree-1 initialization block".into(),
                    ));
                }
            }
            DecoderKind::Ml => {
                if self.m > MAX_ML_LABELS {
                    return Err(Error::SizeGuard {
                        m: self.m,
                        max: MAX_ML_LABELS,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One budget's measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// Queries beyond the initialization block, `n'`.
    pub budget_n: usize,
    /// `n' / n*`.
    pub normalized_budget: f64,
    pub fer: f64,
    pub ber: f64,
    pub trials: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub n_star: Option<f64>,
    /// Size of the initialization block; total queries are `budget_n + init_queries`.
    pub init_queries: usize,
    pub rows: Vec<ResultRow>,
}

/// Outcome of one decoded trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bit_errors: usize,
}

pub fn run_experiment(cfg: &ExperimentConfig, seed: SeedStream) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let r = cfg.reliability()?;
    let n_star = cfg.n_star()?;
    let init_queries = if cfg.degree1_init { cfg.m } else { 0 };

    let mut rows = Vec::with_capacity(cfg.budgets.len());
    for (b, &budget) in cfg.budgets.iter().enumerate() {
        let budget_n = match cfg.budget_mode {
            BudgetMode::Absolute => budget as usize,
            BudgetMode::Normalized => {
                let n_star = n_star.ok_or_else(|| {
                    Error::InvalidConfig("normalized budgets need a finite n*".into())
                })?;
                (budget * n_star).ceil() as usize
            }
        };
        let start = Instant::now();
        let budget_seed = seed.fork(b as u64);
        let outcomes = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &r, budget_n + init_queries, budget_seed.fork(t as u64)))
            .collect::<Result<Vec<TrialOutcome>>>()?;
        let frames = outcomes.iter().filter(|o| o.bit_errors > 0).count();
        let ber_sum: f64 = outcomes
            .iter()
            .map(|o| o.bit_errors as f64 / cfg.m as f64)
            .sum();
        rows.push(ResultRow {
            budget_n,
            normalized_budget: n_star.map_or(f64::NAN, |s| budget_n as f64 / s),
            fer: frames as f64 / cfg.trials as f64,
            ber: ber_sum / cfg.trials as f64,
            trials: cfg.trials,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(ExperimentOutput {
        n_star,
        init_queries,
        rows,
    })
}

/// Generate, answer and decode one instance with `n` total queries.
pub fn run_trial(
    cfg: &ExperimentConfig,
    r: &ReliabilityMatrix,
    n: usize,
    seed: SeedStream,
) -> Result<TrialOutcome> {
    let x = LabelVector::random(cfg.m, &mut seed.fork(0).rng());
    let design = QueryGenConfig {
        m: cfg.m,
        n,
        w: cfg.w,
        phi: cfg.phi.clone(),
        degree1_init: cfg.degree1_init,
        degree1_worker_pool: cfg.degree1_worker_pool.clone(),
        partitioned: false,
        seed: None,
    };
    let g = generate_queries(&design, seed.fork(1))?;
    let y = answer_queries(&x, &g, r, seed.fork(2))?;
    let decode_seed = seed.fork(3);
    let estimate = match cfg.decoder {
        DecoderKind::Majority => majority_vote(&y, &g, decode_seed)?,
        DecoderKind::Em => em_one_coin(&y, &g, cfg.em_iters, cfg.inference.lambda, decode_seed)?.0,
        DecoderKind::Xor4phase => infer::run(&y, &g, &cfg.inference, decode_seed)?.x4,
        DecoderKind::Ml => ml_decode(&y, &g, r, &mut decode_seed.rng())?.best,
    };
    Ok(TrialOutcome {
        bit_errors: estimate.hamming(&x),
    })
}

/// `x` rounded to 6 significant digits, printed in shortest form.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("valid float");
    rounded.to_string()
}

pub fn write_csv<W: Write>(rows: &[ResultRow], dest: &mut W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to write".into()));
    }
    writeln!(dest, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(
            dest,
            "{},{},{},{},{},{}",
            row.budget_n,
            format_sig6(row.normalized_budget),
            format_sig6(row.fer),
            format_sig6(row.ber),
            row.trials,
            format_sig6(row.wall_time_s)
        )?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    reader
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
