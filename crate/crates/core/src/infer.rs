//! Four-phase message-passing inference for XOR queries.
//!
//! 1. Detection: each label copies the answer of its degree-1 query.
//! 2. Weak recovery: every query sends each of its labels the message
//!    `y_j * prod(other current estimates)`, and labels take a majority vote.
//! 3. Reliability estimation: the fraction of each worker's degree-`d`
//!    answers that disagree with the current estimates, clamped to
//!    `[lambda, 0.5]`.
//! 4. Strong recovery: the phase-2 vote repeated with weights
//!    `ln((1 - eps) / eps)`.
//!
//! [`InferenceMode::Partitioned`] runs each phase once on its own block of
//! queries. [`InferenceMode::Iterative`] repeats phase 2 and then phases 3-4
//! over all queries outside the initialization block.
//!
//! Per-label work runs on the current rayon pool. Tie-breaking coins are drawn
//! from substreams keyed by `(phase, iteration, label)`, so the output does
//! not depend on the number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    sign_rand, trunc, AnswerSet, LabelVector, Phase, Query, ReliabilityMatrix, SeedStream,
    TripartiteGraph, DEFAULT_LAMBDA,
};
use crate::querygen::positional_partition;

const PHASE2_TAG: u64 = 2;
const PHASE4_TAG: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    /// Each phase once on the `A1..A4` partition.
    Partitioned,
    /// Phase 2 repeated, then phases 3-4 repeated, on every non-initialization query.
    Iterative,
}

/// Which estimate phase 3 compares answers against in iterative mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase3Reference {
    /// The most recent label estimate (phase 2 output in the first round,
    /// then the previous phase 4 output).
    Latest,
    /// Always the phase 2 output.
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub mode: InferenceMode,
    pub phase2_iters: usize,
    pub phase34_iters: usize,
    pub lambda: f64,
    pub phase3_reference: Phase3Reference,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            mode: InferenceMode::Iterative,
            phase2_iters: 10,
            phase34_iters: 10,
            lambda: DEFAULT_LAMBDA,
            phase3_reference: Phase3Reference::Latest,
        }
    }
}

impl InferenceConfig {
    pub fn partitioned() -> Self {
        InferenceConfig {
            mode: InferenceMode::Partitioned,
            phase2_iters: 1,
            phase34_iters: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phase2_iters == 0 || self.phase34_iters == 0 {
            return Err(Error::InvalidConfig(
                "iteration counts must be at least 1".into(),
            ));
        }
        if !(self.lambda > 0.0 && self.lambda < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "lambda {} outside (0, 0.5)",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Estimates produced by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Phase 1 (detection) estimate.
    pub x1: LabelVector,
    /// Phase 2 (weak recovery) estimate.
    pub x2: LabelVector,
    /// Phase 4 (strong recovery) estimate.
    pub x4: LabelVector,
    pub eps_hat: ReliabilityMatrix,
}

impl InferenceResult {
    pub fn final_estimate(&self) -> &LabelVector {
        &self.x4
    }
}

/// Phase 1: each label takes the answer of its initialization query.
///
/// The initialization queries are the degree-1 queries tagged
/// [`Phase::A1`]; the first one per label is used.
pub fn phase1(y: &AnswerSet, g: &TripartiteGraph) -> Result<LabelVector> {
    y.check_aligned(g)?;
    let mut est: Vec<i8> = vec![0; g.m()];
    for q in g.queries().iter().filter(|q| q.phase == Phase::A1) {
        if q.degree() != 1 {
            return Err(Error::InvalidInput(format!(
                "initialization query {} has degree {}",
                q.id + 1,
                q.degree()
            )));
        }
        let i = q.labels[0];
        if est[i] == 0 {
            est[i] = y.get(q.id);
        }
    }
    if let Some(i) = est.iter().position(|&v| v == 0) {
        return Err(Error::MissingInitialization { label: i + 1 });
    }
    Ok(LabelVector::from_raw(est))
}

/// The message query `q` sends to label `target`: its answer times the
/// current estimates of its other labels.
pub fn phase2_message(y_j: i8, q: &Query, est: &LabelVector, target: usize) -> Result<i8> {
    if !q.labels.contains(&target) {
        return Err(Error::InvalidInput(format!(
            "label {} is not in query {}",
            target + 1,
            q.id + 1
        )));
    }
    q.labels
        .iter()
        .filter(|&&i| i != target)
        .try_fold(y_j, |acc, &i| {
            if i < est.len() {
                Ok(acc * est.get(i))
            } else {
                Err(Error::InvalidInput(format!("label {} out of range", i + 1)))
            }
        })
}

/// Phase 2: unweighted majority vote of the messages from `pool` queries.
///
/// Labels that receive no message keep their `prev` value.
pub fn phase2(
    y: &AnswerSet,
    g: &TripartiteGraph,
    pool: &[usize],
    prev: &LabelVector,
    ties: SeedStream,
) -> Result<LabelVector> {
    check_inputs(y, g, pool, prev)?;
    let products = query_products(y, g, pool, prev, |_| 1.0);
    vote(g, &products, prev, ties.fork(PHASE2_TAG))
}

/// Phase 3: per-(worker, degree) disagreement rate between the answers of
/// `pool` queries and the XOR of `reference`, clamped to `[lambda, 0.5]`.
/// Pairs with no query get 0.5.
pub fn phase3(
    y: &AnswerSet,
    g: &TripartiteGraph,
    pool: &[usize],
    reference: &LabelVector,
    lambda: f64,
) -> Result<ReliabilityMatrix> {
    check_inputs(y, g, pool, reference)?;
    let max_degree = g.max_degree();
    let mut counts = vec![(0usize, 0usize); g.w() * max_degree];
    for &j in pool {
        let q = g.query(j);
        let predicted: i8 = q.labels.iter().map(|&i| reference.get(i)).product();
        let cell = &mut counts[q.worker * max_degree + q.degree() - 1];
        cell.0 += 1;
        if y.get(j) != predicted {
            cell.1 += 1;
        }
    }
    let eps = counts
        .chunks(max_degree)
        .map(|row| {
            row.iter()
                .map(|&(total, wrong)| {
                    if total == 0 {
                        Ok(0.5)
                    } else {
                        trunc(wrong as f64 / total as f64, lambda, 0.5)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ReliabilityMatrix::new_estimated(eps, lambda)
}

/// Phase 4: majority vote of the `pool` messages weighted by
/// `ln((1 - eps_hat) / eps_hat)` of the answering worker and degree.
///
/// Labels that receive no message keep their `prev` value.
pub fn phase4(
    y: &AnswerSet,
    g: &TripartiteGraph,
    pool: &[usize],
    prev: &LabelVector,
    eps_hat: &ReliabilityMatrix,
    ties: SeedStream,
) -> Result<LabelVector> {
    check_inputs(y, g, pool, prev)?;
    let lambda = eps_hat.lambda();
    for &j in pool {
        let q = g.query(j);
        match eps_hat.get(q.worker, q.degree()) {
            None => {
                return Err(Error::InvalidInput(format!(
                    "no reliability estimate for worker {} at degree {}",
                    q.worker + 1,
                    q.degree()
                )))
            }
            Some(e) if !(lambda..=0.5).contains(&e) => {
                return Err(Error::InvalidInput(format!(
                    "reliability estimate {e} outside [{lambda}, 0.5]"
                )))
            }
            Some(_) => {}
        }
    }
    let weight = |q: &Query| {
        let e = eps_hat.get(q.worker, q.degree()).expect("checked above");
        ((1.0 - e) / e).ln()
    };
    let products = query_products(y, g, pool, prev, weight);
    vote(g, &products, prev, ties.fork(PHASE4_TAG))
}

/// Query blocks used by each phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePools {
    pub phase1: Vec<usize>,
    pub phase2: Vec<usize>,
    pub phase3: Vec<usize>,
    pub phase4: Vec<usize>,
}

impl PhasePools {
    /// Pools for `mode`. Partitioned mode uses the graph's `A1..A4` tags,
    /// deriving them positionally when the graph is not yet partitioned.
    pub fn for_mode(g: &TripartiteGraph, mode: InferenceMode) -> Result<Self> {
        match mode {
            InferenceMode::Partitioned => {
                let tagged;
                let g = if g.is_partitioned() {
                    g
                } else {
                    tagged = positional_partition(g)?;
                    &tagged
                };
                Ok(PhasePools {
                    phase1: g.phase_set(Phase::A1),
                    phase2: g.phase_set(Phase::A2),
                    phase3: g.phase_set(Phase::A3),
                    phase4: g.phase_set(Phase::A4),
                })
            }
            InferenceMode::Iterative => {
                let rest: Vec<usize> = g
                    .queries()
                    .iter()
                    .filter(|q| q.phase != Phase::A1)
                    .map(|q| q.id)
                    .collect();
                Ok(PhasePools {
                    phase1: g.phase_set(Phase::A1),
                    phase2: rest.clone(),
                    phase3: rest.clone(),
                    phase4: rest,
                })
            }
        }
    }
}

/// Runs the full algorithm.
pub fn run(
    y: &AnswerSet,
    g: &TripartiteGraph,
    cfg: &InferenceConfig,
    seed: SeedStream,
) -> Result<InferenceResult> {
    cfg.validate()?;
    y.check_aligned(g)?;
    let tagged;
    let g = if cfg.mode == InferenceMode::Partitioned && !g.is_partitioned() {
        tagged = positional_partition(g)?;
        &tagged
    } else {
        g
    };
    let pools = PhasePools::for_mode(g, cfg.mode)?;
    let x1 = phase1(y, g)?;

    let (p2_rounds, p34_rounds) = match cfg.mode {
        InferenceMode::Partitioned => (1, 1),
        InferenceMode::Iterative => (cfg.phase2_iters, cfg.phase34_iters),
    };

    let mut est = x1.clone();
    for round in 0..p2_rounds {
        est = phase2(y, g, &pools.phase2, &est, seed.fork(round as u64))?;
    }
    let x2 = est;

    let mut current = x2.clone();
    let mut eps_hat = None;
    for round in 0..p34_rounds {
        let reference = match cfg.phase3_reference {
            Phase3Reference::Latest => &current,
            Phase3Reference::Weak => &x2,
        };
        let eps = phase3(y, g, &pools.phase3, reference, cfg.lambda)?;
        current = phase4(y, g, &pools.phase4, &current, &eps, seed.fork(round as u64))?;
        eps_hat = Some(eps);
    }

    Ok(InferenceResult {
        x1,
        x2,
        x4: current,
        eps_hat: eps_hat.expect("at least one round"),
    })
}

fn check_inputs(
    y: &AnswerSet,
    g: &TripartiteGraph,
    pool: &[usize],
    est: &LabelVector,
) -> Result<()> {
    y.check_aligned(g)?;
    if est.len() != g.m() {
        return Err(Error::InvalidInput(format!(
            "estimate has {} labels, graph has {}",
            est.len(),
            g.m()
        )));
    }
    if let Some(&j) = pool.iter().find(|&&j| j >= g.n()) {
        return Err(Error::InvalidInput(format!(
            "pool query {} out of range",
            j + 1
        )));
    }
    Ok(())
}

/// For every pool query, `weight * y_j * prod(est)` over all its labels;
/// zero for queries outside the pool. Multiplying by `est_i` then yields the
/// message to label `i`.
fn query_products<F>(
    y: &AnswerSet,
    g: &TripartiteGraph,
    pool: &[usize],
    est: &LabelVector,
    weight: F,
) -> Vec<Option<f64>>
where
    F: Fn(&Query) -> f64 + Sync,
{
    let mut products = vec![None; g.n()];
    let values: Vec<(usize, f64)> = pool
        .par_iter()
        .map(|&j| {
            let q = g.query(j);
            let parity: i8 = q.labels.iter().map(|&i| est.get(i)).product();
            (j, weight(q) * f64::from(y.get(j) * parity))
        })
        .collect();
    for (j, v) in values {
        products[j] = Some(v);
    }
    products
}

fn vote(
    g: &TripartiteGraph,
    products: &[Option<f64>],
    prev: &LabelVector,
    ties: SeedStream,
) -> Result<LabelVector> {
    let est = (0..g.m())
        .into_par_iter()
        .map(|i| {
            let own = f64::from(prev.get(i));
            let mut total = 0.0;
            let mut received = false;
            for &j in g.label_adj(i) {
                if let Some(p) = products[j] {
                    total += p * own;
                    received = true;
                }
            }
            if received {
                sign_rand(total, &mut ties.fork(i as u64).rng())
            } else {
                Ok(prev.get(i))
            }
        })
        .collect::<Result<Vec<i8>>>()?;
    Ok(LabelVector::from_raw(est))
}
