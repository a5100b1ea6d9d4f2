//! Random non-adaptive query design.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DegreeDistribution, Phase, Query, SeedStream, TripartiteGraph};

/// Parameters of a random query design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGenConfig {
    pub m: usize,
    pub n: usize,
    pub w: usize,
    pub phi: DegreeDistribution,
    /// Start with `m` degree-1 queries, query `i` asking label `i`.
    #[serde(default = "default_true")]
    pub degree1_init: bool,
    /// 1-based worker ids allowed to answer the initialization block.
    #[serde(default)]
    pub degree1_worker_pool: Option<Vec<usize>>,
    /// Tag queries with the `A1..A4` partition of the four-phase algorithm.
    #[serde(default)]
    pub partitioned: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_true() -> bool {
    true
}

impl QueryGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.w == 0 {
            return Err(Error::InvalidConfig("m and w must be positive".into()));
        }
        if self.m < self.phi.max_degree() {
            return Err(Error::InvalidConfig(format!(
                "m = {} is smaller than the maximum degree {}",
                self.m,
                self.phi.max_degree()
            )));
        }
        if self.degree1_init && self.n < self.m {
            return Err(Error::InvalidConfig(format!(
                "n = {} is smaller than m = {} with the initialization block",
                self.n, self.m
            )));
        }
        if self.partitioned && !self.degree1_init {
            return Err(Error::InvalidConfig(
                "partitioned mode needs the degree-1 initialization block".into(),
            ));
        }
        if let Some(pool) = &self.degree1_worker_pool {
            if pool.is_empty() {
                return Err(Error::InvalidConfig("degree-1 worker pool is empty".into()));
            }
            if let Some(k) = pool.iter().find(|&&k| k == 0 || k > self.w) {
                return Err(Error::InvalidConfig(format!(
                    "degree-1 worker pool entry {k} outside 1..={}",
                    self.w
                )));
            }
        }
        Ok(())
    }
}

/// Draws a degree `d` with probability `Phi_d`.
pub fn sample_degree<R: Rng + ?Sized>(phi: &DegreeDistribution, rng: &mut R) -> usize {
    // A validated distribution always has positive total weight.
    let dist = WeightedIndex::new(phi.probs()).expect("validated degree distribution");
    dist.sample(rng) + 1
}

/// Generates the tripartite graph described by `cfg`, drawing everything from
/// `seed`.
pub fn generate_queries(cfg: &QueryGenConfig, seed: SeedStream) -> Result<TripartiteGraph> {
    cfg.validate()?;
    let mut rng = seed.rng();
    let degrees = WeightedIndex::new(cfg.phi.probs())
        .map_err(|e| Error::InvalidConfig(format!("degree distribution: {e}")))?;
    let pool: Vec<usize> = match &cfg.degree1_worker_pool {
        Some(p) => p.iter().map(|k| k - 1).collect(),
        None => (0..cfg.w).collect(),
    };

    let mut queries = Vec::with_capacity(cfg.n);
    if cfg.degree1_init {
        for i in 0..cfg.m {
            queries.push(Query {
                id: i,
                labels: vec![i],
                worker: pool[rng.random_range(0..pool.len())],
                phase: Phase::A1,
            });
        }
    }
    while queries.len() < cfg.n {
        let d = degrees.sample(&mut rng) + 1;
        let labels = index::sample(&mut rng, cfg.m, d).into_vec();
        queries.push(Query {
            id: queries.len(),
            labels,
            worker: rng.random_range(0..cfg.w),
            phase: Phase::Unpartitioned,
        });
    }

    let g = TripartiteGraph::new(cfg.m, cfg.w, queries)?;
    if cfg.partitioned {
        positional_partition(&g)
    } else {
        Ok(g)
    }
}

/// Sizes `|A1|, |A2|, |A3|, |A4|` of the four-phase partition.
///
/// `|A1| = m`, `|A2| = ceil(m ln m / ln ln m)`, `|A3| = ceil(w ln m ln ln m)`
/// and `A4` takes the remainder, which must be nonempty.
pub fn partition_sizes(m: usize, n: usize, w: usize) -> Result<[usize; 4]> {
    if m < 3 {
        return Err(Error::InvalidConfig(format!(
            "partitioned mode needs m >= 3 (ln ln m > 0), got {m}"
        )));
    }
    let ln_m = (m as f64).ln();
    let lnln_m = ln_m.ln();
    let a2 = (m as f64 * ln_m / lnln_m).ceil() as usize;
    let a3 = (w as f64 * ln_m * lnln_m).ceil() as usize;
    let used = m + a2 + a3;
    if n <= used {
        return Err(Error::InvalidConfig(format!(
            "n = {n} leaves no queries for phase 4 (phases 1-3 use {used})"
        )));
    }
    Ok([m, a2, a3, n - used])
}

/// Tags queries by position: the first `m` are `A1` and must form the
/// degree-1 initialization block, then `A2`, `A3` and `A4` follow in order.
pub fn positional_partition(g: &TripartiteGraph) -> Result<TripartiteGraph> {
    let [a1, a2, a3, _] = partition_sizes(g.m(), g.n(), g.w())?;
    let mut seen = vec![false; g.m()];
    for q in &g.queries()[..a1] {
        if q.degree() != 1 || seen[q.labels[0]] {
            return Err(Error::InvalidInput(
                "the first m queries must ask every label once with degree 1".into(),
            ));
        }
        seen[q.labels[0]] = true;
    }
    let phases: Vec<Phase> = (0..g.n())
        .map(|j| {
            if j < a1 {
                Phase::A1
            } else if j < a1 + a2 {
                Phase::A2
            } else if j < a1 + a2 + a3 {
                Phase::A3
            } else {
                Phase::A4
            }
        })
        .collect();
    g.with_phases(&phases)
}
