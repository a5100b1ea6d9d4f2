//! Worker answer generation and reliability models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnswerSet, LabelVector, Query, ReliabilityMatrix, SeedStream, TripartiteGraph};

/// How worker error probabilities depend on the query degree.
///
/// Per-worker `rates` may list either one entry per worker or a shorter list
/// whose length divides `w`; in the latter case each rate is shared by an
/// equal-size block of consecutive workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// `eps[k][d - 1]` given for every worker and degree.
    Explicit { eps: Vec<Vec<f64>> },
    /// `eps_{k,d} = rates[k]` for every degree.
    DegreeIndependent { rates: Vec<f64> },
    /// `eps_{k,d} = (1 - (1 - 2 rates[k])^d) / 2`.
    DCoinFlip { rates: Vec<f64> },
}

impl NoiseSpec {
    /// Builds the matrix for `w` workers and degrees `1..=max_degree`,
    /// enforcing `lambda <= eps < 0.5`.
    pub fn build(&self, w: usize, max_degree: usize, lambda: f64) -> Result<ReliabilityMatrix> {
        if let Some(r) = self
            .base_rates(w)?
            .iter()
            .find(|&&r| !(lambda..0.5).contains(&r))
        {
            return Err(Error::InvalidConfig(format!(
                "worker error rate {r} outside [{lambda}, 0.5)"
            )));
        }
        ReliabilityMatrix::new(self.table(w, max_degree)?, lambda)
    }

    /// Like [`NoiseSpec::build`] but accepts any probability in `[0, 1]`.
    pub fn build_unchecked(
        &self,
        w: usize,
        max_degree: usize,
        lambda: f64,
    ) -> Result<ReliabilityMatrix> {
        ReliabilityMatrix::new_unchecked(self.table(w, max_degree)?, lambda)
    }

    fn base_rates(&self, w: usize) -> Result<Vec<f64>> {
        match self {
            NoiseSpec::Explicit { eps } => Ok(eps.iter().flatten().copied().collect()),
            NoiseSpec::DegreeIndependent { rates } | NoiseSpec::DCoinFlip { rates } => {
                expand_rates(rates, w)
            }
        }
    }

    fn table(&self, w: usize, max_degree: usize) -> Result<Vec<Vec<f64>>> {
        if w == 0 || max_degree == 0 {
            return Err(Error::InvalidConfig("w and D must be positive".into()));
        }
        match self {
            NoiseSpec::Explicit { eps } => {
                if eps.len() != w {
                    return Err(Error::InvalidConfig(format!(
                        "explicit noise lists {} workers, expected {w}",
                        eps.len()
                    )));
                }
                if let Some(k) = eps.iter().position(|row| row.len() < max_degree) {
                    return Err(Error::InvalidConfig(format!(
                        "explicit noise for worker {} covers {} degrees, expected {max_degree}",
                        k + 1,
                        eps[k].len()
                    )));
                }
                Ok(eps.iter().map(|row| row[..max_degree].to_vec()).collect())
            }
            NoiseSpec::DegreeIndependent { rates } => Ok(expand_rates(rates, w)?
                .into_iter()
                .map(|r| vec![r; max_degree])
                .collect()),
            NoiseSpec::DCoinFlip { rates } => Ok(expand_rates(rates, w)?
                .into_iter()
                .map(|r| (1..=max_degree).map(|d| coin_flip_epsilon(r, d)).collect())
                .collect()),
        }
    }
}

fn expand_rates(rates: &[f64], w: usize) -> Result<Vec<f64>> {
    if rates.is_empty() || !w.is_multiple_of(rates.len()) {
        return Err(Error::InvalidConfig(format!(
            "{} worker rates cannot be spread evenly over {w} workers",
            rates.len()
        )));
    }
    let block = w / rates.len();
    Ok(rates
        .iter()
        .flat_map(|&r| std::iter::repeat_n(r, block))
        .collect())
}

/// Noiseless answer to `q`: the product of its labels.
pub fn true_xor(x: &LabelVector, q: &Query) -> Result<i8> {
    q.labels.iter().try_fold(1i8, |acc, &i| {
        if i < x.len() {
            Ok(acc * x.get(i))
        } else {
            Err(Error::InvalidInput(format!(
                "query {} references label {} but m = {}",
                q.id + 1,
                i + 1,
                x.len()
            )))
        }
    })
}

/// Error probability of a degree-`d` XOR answer when each of the `d` item
/// decisions is flipped independently with probability `eps_k`.
pub fn coin_flip_epsilon(eps_k: f64, d: usize) -> f64 {
    (1.0 - (1.0 - 2.0 * eps_k).powi(d as i32)) / 2.0
}

/// Simulates worker answers: each true XOR is flipped independently with
/// probability `eps[w(j)][d(j)]`. Query `j` draws from its own substream of
/// `seed`, so the result is independent of evaluation order.
pub fn answer_queries(
    x: &LabelVector,
    g: &TripartiteGraph,
    r: &ReliabilityMatrix,
    seed: SeedStream,
) -> Result<AnswerSet> {
    if x.len() != g.m() {
        return Err(Error::InvalidInput(format!(
            "{} labels for a graph over {}",
            x.len(),
            g.m()
        )));
    }
    r.check_covers(g)?;
    let answers = g
        .queries()
        .par_iter()
        .map(|q| {
            let truth = true_xor(x, q)?;
            let eps = r.get(q.worker, q.degree()).expect("coverage checked");
            let flip = seed.fork(q.id as u64).unit() < eps;
            Ok(if flip { -truth } else { truth })
        })
        .collect::<Result<Vec<i8>>>()?;
    Ok(AnswerSet::from_raw(answers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DegreeDistribution, Phase};
    use crate::querygen::{generate_queries, QueryGenConfig};

    fn query(labels: Vec<usize>) -> Query {
        Query {
            id: 0,
            labels,
            worker: 0,
            phase: Phase::Unpartitioned,
        }
    }

    /// Probability that an odd number of `d` independent coins with head
    /// probability `p` come up heads, by enumerating all `2^d` patterns.
    fn enumerate_odd_heads(p: f64, d: usize) -> f64 {
        (0u32..1 << d)
            .filter(|pattern| pattern.count_ones() % 2 == 1)
            .map(|pattern| {
                let heads = pattern.count_ones() as i32;
                p.powi(heads) * (1.0 - p).powi(d as i32 - heads)
            })
            .sum()
    }

    #[test]
    fn xor_of_labels() {
        let x = LabelVector::new(vec![1, -1, 1]).unwrap();
        assert_eq!(true_xor(&x, &query(vec![0, 1])).unwrap(), -1);
        assert_eq!(true_xor(&x, &query(vec![0, 2])).unwrap(), 1);
        for i in 0..3 {
            assert_eq!(true_xor(&x, &query(vec![i])).unwrap(), x.get(i));
        }
        assert!(true_xor(&x, &query(vec![3])).is_err());
    }

    #[test]
    fn coin_flip_examples() {
        assert!((coin_flip_epsilon(0.1, 1) - 0.1).abs() < 1e-15);
        assert!((coin_flip_epsilon(0.1, 3) - 0.244).abs() < 1e-12);
        assert!((coin_flip_epsilon(0.1, 3) - enumerate_odd_heads(0.1, 3)).abs() < 1e-15);
        for d in 1..=10 {
            assert_eq!(coin_flip_epsilon(0.0, d), 0.0);
        }
    }

    #[test]
    fn coin_flip_matches_enumeration_and_increases() {
        for eps in [0.05, 0.1, 0.25] {
            let mut prev = 0.0;
            for d in 1..=10 {
                let e = coin_flip_epsilon(eps, d);
                assert!((e - enumerate_odd_heads(eps, d)).abs() <= 1e-12);
                assert!(e > prev && e < 0.5);
                prev = e;
            }
        }
    }

    #[test]
    fn reliability_constructions() {
        let r = NoiseSpec::DegreeIndependent { rates: vec![0.2] }
            .build(1, 3, 0.01)
            .unwrap();
        assert_eq!(r.as_rows(), vec![vec![0.2, 0.2, 0.2]]);

        let r = NoiseSpec::DCoinFlip { rates: vec![0.1] }
            .build(1, 2, 0.01)
            .unwrap();
        assert!((r.get(0, 1).unwrap() - 0.1).abs() < 1e-15);
        assert!((r.get(0, 2).unwrap() - 0.18).abs() < 1e-15);
        assert!((r.get(0, 2).unwrap() - enumerate_odd_heads(0.1, 2)).abs() < 1e-15);

        let eps = vec![vec![0.1, 0.2], vec![0.3, 0.4]];
        let r = NoiseSpec::Explicit { eps: eps.clone() }
            .build(2, 2, 0.01)
            .unwrap();
        assert_eq!(r.as_rows(), eps);
        assert!(NoiseSpec::Explicit {
            eps: vec![vec![0.1]]
        }
        .build(1, 2, 0.01)
        .is_err());
        assert!(NoiseSpec::Explicit { eps }.build(3, 2, 0.01).is_err());
    }

    #[test]
    fn rates_spread_over_blocks() {
        let r = NoiseSpec::DegreeIndependent {
            rates: vec![0.1, 0.2],
        }
        .build(4, 1, 0.01)
        .unwrap();
        assert_eq!(
            r.as_rows(),
            vec![vec![0.1], vec![0.1], vec![0.2], vec![0.2]]
        );
        assert!(NoiseSpec::DegreeIndependent {
            rates: vec![0.1, 0.2]
        }
        .build(3, 1, 0.01)
        .is_err());
    }

    #[test]
    fn production_interval_is_enforced() {
        let noise = NoiseSpec::DegreeIndependent { rates: vec![0.0] };
        assert!(noise.build(1, 1, 0.01).is_err());
        assert!(noise.build_unchecked(1, 1, 0.01).is_ok());
        assert!(NoiseSpec::DCoinFlip { rates: vec![0.5] }
            .build(1, 2, 0.01)
            .is_err());
    }

    #[test]
    fn noise_model_json() {
        let noise: NoiseSpec =
            serde_json::from_str(r#"{"kind": "d_coin_flip", "rates": [0.1, 0.2]}"#).unwrap();
        assert_eq!(
            noise,
            NoiseSpec::DCoinFlip {
                rates: vec![0.1, 0.2]
            }
        );
    }

    fn degree1_graph(m: usize, n: usize, w: usize) -> TripartiteGraph {
        generate_queries(
            &QueryGenConfig {
                m,
                n,
                w,
                phi: DegreeDistribution::point_mass(1).unwrap(),
                degree1_init: false,
                degree1_worker_pool: None,
                partitioned: false,
                seed: None,
            },
            SeedStream::new(17),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_channel_returns_true_xor() {
        let g = generate_queries(
            &QueryGenConfig {
                m: 30,
                n: 300,
                w: 3,
                phi: DegreeDistribution::uniform(1, 4).unwrap(),
                degree1_init: true,
                degree1_worker_pool: None,
                partitioned: false,
                seed: None,
            },
            SeedStream::new(3),
        )
        .unwrap();
        let x = LabelVector::random(30, &mut SeedStream::new(4).rng());
        let r = ReliabilityMatrix::uniform_unchecked(3, 4, 0.0, 0.01).unwrap();
        let y = answer_queries(&x, &g, &r, SeedStream::new(5)).unwrap();
        for q in g.queries() {
            assert_eq!(y.get(q.id), true_xor(&x, q).unwrap());
        }
    }

    #[test]
    fn flip_rate_matches_epsilon() {
        let g = degree1_graph(50, 100_000, 1);
        let x = LabelVector::random(50, &mut SeedStream::new(8).rng());
        let r = ReliabilityMatrix::new(vec![vec![0.3]], 0.01).unwrap();
        let y = answer_queries(&x, &g, &r, SeedStream::new(9)).unwrap();
        let flips = g
            .queries()
            .iter()
            .filter(|q| y.get(q.id) != x.get(q.labels[0]))
            .count();
        let rate = flips as f64 / 100_000.0;
        assert!((rate - 0.3).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn pure_noise_agrees_half_the_time() {
        let g = degree1_graph(50, 100_000, 1);
        let x = LabelVector::random(50, &mut SeedStream::new(10).rng());
        let r = ReliabilityMatrix::uniform_unchecked(1, 1, 0.5, 0.01).unwrap();
        let y = answer_queries(&x, &g, &r, SeedStream::new(11)).unwrap();
        let agree = g
            .queries()
            .iter()
            .filter(|q| y.get(q.id) == x.get(q.labels[0]))
            .count();
        let rate = agree as f64 / 100_000.0;
        assert!((rate - 0.5).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn answers_are_reproducible_and_checked() {
        let g = degree1_graph(10, 200, 2);
        let x = LabelVector::random(10, &mut SeedStream::new(1).rng());
        let r = ReliabilityMatrix::new(vec![vec![0.2], vec![0.3]], 0.01).unwrap();
        let a = answer_queries(&x, &g, &r, SeedStream::new(2)).unwrap();
        let b = answer_queries(&x, &g, &r, SeedStream::new(2)).unwrap();
        assert_eq!(a, b);
        let narrow = ReliabilityMatrix::new(vec![vec![0.2]], 0.01).unwrap();
        assert!(answer_queries(&x, &g, &narrow, SeedStream::new(2)).is_err());
    }
}
