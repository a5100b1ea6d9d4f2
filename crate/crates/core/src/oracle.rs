//! Exact maximum-likelihood decoding by exhaustive enumeration.
//!
//! With known error probabilities the likelihood of a candidate `x` is
//! `prod_j (1 - eps_j)` over answers consistent with `x` times `prod_j eps_j`
//! over the rest, so maximizing it is a weighted vote over all `2^m`
//! candidates. Only usable for small `m`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AnswerSet, LabelVector, ReliabilityMatrix, TripartiteGraph};
use crate::noise::true_xor;

/// Largest `m` accepted by [`ml_decode`].
pub const MAX_ML_LABELS: usize = 20;

/// Relative slack under which two log-likelihoods count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MlReport {
    pub best: LabelVector,
    pub log_likelihood: f64,
    /// Number of candidates sharing the maximal likelihood.
    pub tie_count: usize,
}

/// `sum_j ln(1 - eps_j)` over answers matching `x` plus `sum_j ln(eps_j)`
/// over the others.
///
/// A zero probability term (an answer contradicting `x` from a worker with
/// `eps = 0`, or agreeing with `eps = 1`) makes the result `-inf`.
pub fn log_likelihood(
    x: &LabelVector,
    y: &AnswerSet,
    g: &TripartiteGraph,
    r: &ReliabilityMatrix,
) -> Result<f64> {
    y.check_aligned(g)?;
    r.check_covers(g)?;
    g.queries().iter().try_fold(0.0, |acc, q| {
        let eps = r.get(q.worker, q.degree()).expect("coverage checked");
        let p = if true_xor(x, q)? == y.get(q.id) {
            1.0 - eps
        } else {
            eps
        };
        Ok(acc + p.ln())
    })
}

/// Returns a maximizer of [`log_likelihood`] over all of `{+1, -1}^m`,
/// breaking ties uniformly at random with `rng`.
pub fn ml_decode<R: Rng + ?Sized>(
    y: &AnswerSet,
    g: &TripartiteGraph,
    r: &ReliabilityMatrix,
    rng: &mut R,
) -> Result<MlReport> {
    let m = g.m();
    if m > MAX_ML_LABELS {
        return Err(Error::SizeGuard {
            m,
            max: MAX_ML_LABELS,
        });
    }
    y.check_aligned(g)?;
    r.check_covers(g)?;

    // Bit i of a candidate set means x_i = -1.
    let terms: Vec<(u32, i8, f64, f64)> = g
        .queries()
        .iter()
        .map(|q| {
            let mask = q.labels.iter().fold(0u32, |acc, &i| acc | (1 << i));
            let eps = r.get(q.worker, q.degree()).expect("coverage checked");
            (mask, y.get(q.id), (1.0 - eps).ln(), eps.ln())
        })
        .collect();

    let scores: Vec<f64> = (0u32..1 << m)
        .into_par_iter()
        .map(|candidate| {
            terms
                .iter()
                .map(|&(mask, answer, agree, disagree)| {
                    let parity = if (candidate & mask).count_ones() % 2 == 0 {
                        1
                    } else {
                        -1
                    };
                    if parity == answer {
                        agree
                    } else {
                        disagree
                    }
                })
                .sum()
        })
        .collect();

    let best_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOLERANCE * best_score.abs().max(1.0);
    let winners: Vec<u32> = (0u32..1 << m)
        .filter(|&c| {
            let s = scores[c as usize];
            s == best_score || (best_score.is_finite() && best_score - s <= slack)
        })
        .collect();
    let pick = winners[rng.random_range(0..winners.len())];
    let best = LabelVector::from_raw(
        (0..m)
            .map(|i| if pick & (1 << i) != 0 { -1 } else { 1 })
            .collect(),
    );
    Ok(MlReport {
        best,
        log_likelihood: scores[pick as usize],
        tie_count: winners.len(),
    })
}
