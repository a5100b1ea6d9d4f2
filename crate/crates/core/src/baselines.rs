//! Decoders for repetition (degree-1) query designs.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{sign_rand, AnswerSet, LabelVector, SeedStream, TripartiteGraph};

/// Stop EM once no posterior moves by more than this.
const EM_TOLERANCE: f64 = 1e-8;

/// State of the one-coin EM decoder after its last iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EmState {
    /// Posterior probability that each label is `+1`.
    pub posterior: Vec<f64>,
    /// Per-worker error estimate, in `[lambda, 1 - lambda]`.
    pub eps_hat: Vec<f64>,
    pub iterations: usize,
}

fn check_repetition(y: &AnswerSet, g: &TripartiteGraph) -> Result<()> {
    y.check_aligned(g)?;
    if let Some(q) = g.queries().iter().find(|q| q.degree() != 1) {
        return Err(Error::InvalidInput(format!(
            "query {} has degree {}; repetition decoders need degree-1 queries",
            q.id + 1,
            q.degree()
        )));
    }
    Ok(())
}

/// Per-label sign of the summed answers, ties broken by a per-label coin.
pub fn majority_vote(y: &AnswerSet, g: &TripartiteGraph, seed: SeedStream) -> Result<LabelVector> {
    check_repetition(y, g)?;
    let est = (0..g.m())
        .into_par_iter()
        .map(|i| {
            let total: i64 = g.label_adj(i).iter().map(|&j| i64::from(y.get(j))).sum();
            sign_rand(total as f64, &mut seed.fork(i as u64).rng())
        })
        .collect::<Result<Vec<i8>>>()?;
    Ok(LabelVector::from_raw(est))
}

/// One-coin Dawid-Skene EM: each worker has a single symmetric error rate.
///
/// Starts from the majority vote, then alternates an M-step (worker error =
/// posterior-weighted disagreement, clamped to `[lambda, 1 - lambda]`) and an
/// E-step (label posterior from the workers' log-odds) for at most `iters`
/// rounds.
pub fn em_one_coin(
    y: &AnswerSet,
    g: &TripartiteGraph,
    iters: usize,
    lambda: f64,
    seed: SeedStream,
) -> Result<(LabelVector, EmState)> {
    if iters == 0 {
        return Err(Error::InvalidConfig(
            "EM needs at least one iteration".into(),
        ));
    }
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "lambda {lambda} outside (0, 0.5)"
        )));
    }
    let init = majority_vote(y, g, seed.fork(0))?;
    let mut posterior: Vec<f64> = init
        .as_slice()
        .iter()
        .map(|&v| if v > 0 { 1.0 } else { 0.0 })
        .collect();
    let mut log_odds = vec![0.0; g.m()];
    let mut eps_hat = vec![0.5; g.w()];
    let mut iterations = 0;

    while iterations < iters {
        eps_hat = (0..g.w())
            .into_par_iter()
            .map(|k| {
                let answered = g.worker_adj(k, 1);
                if answered.is_empty() {
                    return 0.5;
                }
                let wrong: f64 = answered
                    .iter()
                    .map(|&j| {
                        let p_pos = posterior[g.query(j).labels[0]];
                        if y.get(j) > 0 {
                            1.0 - p_pos
                        } else {
                            p_pos
                        }
                    })
                    .sum();
                (wrong / answered.len() as f64).clamp(lambda, 1.0 - lambda)
            })
            .collect();

        log_odds = (0..g.m())
            .into_par_iter()
            .map(|i| {
                g.label_adj(i)
                    .iter()
                    .map(|&j| {
                        let e = eps_hat[g.query(j).worker];
                        f64::from(y.get(j)) * ((1.0 - e) / e).ln()
                    })
                    .sum::<f64>()
            })
            .collect();
        let updated: Vec<f64> = log_odds.iter().map(|&l| sigmoid(l)).collect();
        let change = updated
            .iter()
            .zip(&posterior)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        posterior = updated;
        iterations += 1;
        if change < EM_TOLERANCE {
            break;
        }
    }

    let labels = log_odds
        .iter()
        .enumerate()
        .map(|(i, &l)| sign_rand(l, &mut seed.fork_all(&[1, i as u64]).rng()))
        .collect::<Result<Vec<i8>>>()?;
    Ok((
        LabelVector::from_raw(labels),
        EmState {
            posterior,
            eps_hat,
            iterations,
        },
    ))
}

/// Marginal log-likelihood of the answers under the one-coin model with a
/// uniform label prior and per-worker error rates `eps`.
pub fn one_coin_log_likelihood(y: &AnswerSet, g: &TripartiteGraph, eps: &[f64]) -> Result<f64> {
    check_repetition(y, g)?;
    if eps.len() != g.w() {
        return Err(Error::InvalidInput(format!(
            "{} worker rates for {} workers",
            eps.len(),
            g.w()
        )));
    }
    Ok((0..g.m())
        .map(|i| {
            let (mut if_pos, mut if_neg) = (0.0, 0.0);
            for &j in g.label_adj(i) {
                let e = eps[g.query(j).worker];
                let (agree, disagree) = ((1.0 - e).ln(), e.ln());
                if y.get(j) > 0 {
                    if_pos += agree;
                    if_neg += disagree;
                } else {
                    if_pos += disagree;
                    if_neg += agree;
                }
            }
            let top = if_pos.max(if_neg);
            0.5f64.ln() + top + ((if_pos - top).exp() + (if_neg - top).exp()).ln()
        })
        .sum())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
