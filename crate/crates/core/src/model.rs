//! Core domain types: labels, queries, the label/query/worker graph, answers
//! and worker reliabilities, plus the two scalar primitives every decoder
//! relies on (`sign_rand` and `trunc`).
//!
//! Indices are 0-based in memory. The text formats in [`crate::format`] use
//! 1-based indices for labels, queries and workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower truncation constant for error probabilities.
pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Tolerance on `sum(phi) == 1`.
const PROB_SUM_TOL: f64 = 1e-12;

/// Returns `+1` for positive `x`, `-1` for negative `x`, and a fair coin drawn
/// from `rng` when `x == 0`.
pub fn sign_rand<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<i8> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("sign of non-finite value {x}")));
    }
    Ok(if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else if rng.random_bool(0.5) {
        1
    } else {
        -1
    })
}

/// Returns the point of `[lo, hi]` closest to `x`.
pub fn trunc(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidInterval { lo, hi });
    }
    Ok(x.max(lo).min(hi))
}

/// A deterministic, splittable source of random streams.
///
/// Every randomized step derives its own child stream with [`SeedStream::fork`]
/// so results do not depend on evaluation order or thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream(seed)
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    /// Child stream keyed by `tag`.
    pub fn fork(&self, tag: u64) -> SeedStream {
        SeedStream(splitmix64(
            self.0 ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019)),
        ))
    }

    pub fn fork_all(&self, tags: &[u64]) -> SeedStream {
        tags.iter().fold(*self, |s, &t| s.fork(t))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// A single uniform draw in `[0, 1)` derived from this stream.
    pub fn unit(&self) -> f64 {
        (splitmix64(self.0) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn check_signs(values: &[i8], what: &str) -> Result<()> {
    match values.iter().position(|&v| v != 1 && v != -1) {
        Some(i) => Err(Error::InvalidInput(format!(
            "{what} entry {} is {}, expected +1 or -1",
            i + 1,
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Ground-truth or estimated labels in `{+1, -1}^m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("label vector must be nonempty".into()));
        }
        check_signs(&values, "label")?;
        Ok(LabelVector(values))
    }

    /// Uniformly random labels.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        LabelVector(
            (0..m)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn all_positive(m: usize) -> Self {
        LabelVector(vec![1; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        LabelVector(self.0.iter().map(|&v| -v).collect())
    }

    /// Number of positions where `self` and `other` disagree.
    pub fn hamming(&self, other: &LabelVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub(crate) fn from_raw(values: Vec<i8>) -> Self {
        debug_assert!(values.iter().all(|&v| v == 1 || v == -1));
        LabelVector(values)
    }
}

/// Query degree distribution `Phi_1 .. Phi_D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DegreeDistribution {
    probs: Vec<f64>,
}

impl DegreeDistribution {
    /// `probs[d - 1]` is the probability of degree `d`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidConfig("degree distribution is empty".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(
                "degree probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidConfig(format!(
                "degree probabilities sum to {total}, expected 1"
            )));
        }
        let mut probs = probs;
        while probs.len() > 1 && probs[probs.len() - 1] == 0.0 {
            probs.pop();
        }
        Ok(DegreeDistribution { probs })
    }

    pub fn point_mass(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("degree must be at least 1".into()));
        }
        let mut probs = vec![0.0; d];
        probs[d - 1] = 1.0;
        Self::new(probs)
    }

    /// Uniform over `lo..=hi`.
    pub fn uniform(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig(format!(
                "bad degree range {lo}..={hi}"
            )));
        }
        let p = 1.0 / (hi - lo + 1) as f64;
        let probs = (1..=hi).map(|d| if d >= lo { p } else { 0.0 }).collect();
        Self::new(probs)
    }

    pub fn max_degree(&self) -> usize {
        self.probs.len()
    }

    /// `Phi_d`; zero outside `1..=D`.
    pub fn prob(&self, d: usize) -> f64 {
        if d == 0 {
            0.0
        } else {
            self.probs.get(d - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    pub fn has_odd_support(&self) -> bool {
        self.probs.iter().step_by(2).any(|&p| p > 0.0)
    }
}

impl TryFrom<Vec<f64>> for DegreeDistribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DegreeDistribution> for Vec<f64> {
    fn from(d: DegreeDistribution) -> Self {
        d.probs
    }
}

/// Which phase of the partitioned algorithm a query belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Degree-1 initialization block.
    A1,
    A2,
    A3,
    A4,
    Unpartitioned,
}

/// One XOR question.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub id: usize,
    /// Distinct label indices.
    pub labels: Vec<usize>,
    pub worker: usize,
    pub phase: Phase,
}

impl Query {
    pub fn degree(&self) -> usize {
        self.labels.len()
    }
}

/// The label/query/worker incidence structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripartiteGraph {
    m: usize,
    w: usize,
    max_degree: usize,
    queries: Vec<Query>,
    label_adj: Vec<Vec<usize>>,
    worker_adj: Vec<Vec<Vec<usize>>>,
}

impl TripartiteGraph {
    /// Builds the graph and its adjacency maps. Query ids must equal their
    /// positions in `queries`.
    pub fn new(m: usize, w: usize, queries: Vec<Query>) -> Result<Self> {
        if m == 0 || w == 0 {
            return Err(Error::InvalidInput("m and w must be positive".into()));
        }
        for (j, q) in queries.iter().enumerate() {
            if q.id != j {
                return Err(Error::InvalidInput(format!(
                    "query at position {} has id {}",
                    j + 1,
                    q.id + 1
                )));
            }
            if q.labels.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "query {} has no labels",
                    j + 1
                )));
            }
            if let Some(&i) = q.labels.iter().find(|&&i| i >= m) {
                return Err(Error::InvalidInput(format!(
                    "query {} references label {} outside 1..={m}",
                    j + 1,
                    i + 1
                )));
            }
            let mut sorted = q.labels.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|p| p[0] == p[1]) {
                return Err(Error::InvalidInput(format!(
                    "query {} repeats a label",
                    j + 1
                )));
            }
            if q.worker >= w {
                return Err(Error::InvalidInput(format!(
                    "query {} assigned to worker {} outside 1..={w}",
                    j + 1,
                    q.worker + 1
                )));
            }
        }
        let max_degree = queries.iter().map(Query::degree).max().unwrap_or(1);
        let (label_adj, worker_adj) = build_adjacency(m, w, max_degree, &queries);
        Ok(TripartiteGraph {
            m,
            w,
            max_degree,
            queries,
            label_adj,
            worker_adj,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.queries.len()
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn query(&self, j: usize) -> &Query {
        &self.queries[j]
    }

    /// Queries containing label `i`, in query order.
    pub fn label_adj(&self, i: usize) -> &[usize] {
        &self.label_adj[i]
    }

    /// Degree-`d` queries assigned to worker `k`, in query order.
    pub fn worker_adj(&self, k: usize, d: usize) -> &[usize] {
        if d == 0 || d > self.max_degree {
            return &[];
        }
        &self.worker_adj[k][d - 1]
    }

    pub fn phase_set(&self, phase: Phase) -> Vec<usize> {
        self.queries
            .iter()
            .filter(|q| q.phase == phase)
            .map(|q| q.id)
            .collect()
    }

    /// True when every query carries one of the `A1..A4` tags.
    pub fn is_partitioned(&self) -> bool {
        self.queries.iter().all(|q| q.phase != Phase::Unpartitioned)
    }

    /// Rebuilds the adjacency maps from the query list and compares them with
    /// the stored ones.
    pub fn is_consistent(&self) -> bool {
        let (label_adj, worker_adj) =
            build_adjacency(self.m, self.w, self.max_degree, &self.queries);
        label_adj == self.label_adj && worker_adj == self.worker_adj
    }

    /// Same graph with new phase tags.
    pub fn with_phases(&self, phases: &[Phase]) -> Result<Self> {
        if phases.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "{} phase tags for {} queries",
                phases.len(),
                self.n()
            )));
        }
        let mut g = self.clone();
        for (q, &p) in g.queries.iter_mut().zip(phases) {
            q.phase = p;
        }
        Ok(g)
    }
}

type Adjacency = (Vec<Vec<usize>>, Vec<Vec<Vec<usize>>>);

fn build_adjacency(m: usize, w: usize, max_degree: usize, queries: &[Query]) -> Adjacency {
    let mut label_adj = vec![Vec::new(); m];
    let mut worker_adj = vec![vec![Vec::new(); max_degree]; w];
    for q in queries {
        for &i in &q.labels {
            label_adj[i].push(q.id);
        }
        worker_adj[q.worker][q.degree() - 1].push(q.id);
    }
    (label_adj, worker_adj)
}

/// Observed answers `y_1 .. y_n`, aligned with the graph's queries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnswerSet(Vec<i8>);

impl AnswerSet {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        check_signs(&values, "answer")?;
        Ok(AnswerSet(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> i8 {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// Errors unless there is exactly one answer per query of `g`.
    pub fn check_aligned(&self, g: &TripartiteGraph) -> Result<()> {
        if self.len() != g.n() {
            return Err(Error::InvalidInput(format!(
                "{} answers for {} queries",
                self.len(),
                g.n()
            )));
        }
        Ok(())
    }

    pub(crate) fn from_raw(values: Vec<i8>) -> Self {
        debug_assert!(values.iter().all(|&v| v == 1 || v == -1));
        AnswerSet(values)
    }
}

/// Error probabilities `eps[k][d]` for worker `k` and degree `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMatrix {
    w: usize,
    max_degree: usize,
    eps: Vec<f64>,
    lambda: f64,
}

impl ReliabilityMatrix {
    /// A true reliability matrix: every entry in `[lambda, 0.5)`.
    ///
    /// `eps[k][d - 1]` is the error probability of worker `k` on degree `d`.
    pub fn new(eps: Vec<Vec<f64>>, lambda: f64) -> Result<Self> {
        let r = Self::new_unchecked(eps, lambda)?;
        if let Some(e) = r.eps.iter().find(|&&e| !(lambda..0.5).contains(&e)) {
            return Err(Error::InvalidConfig(format!(
                "error probability {e} outside [{lambda}, 0.5)"
            )));
        }
        Ok(r)
    }

    /// An estimated matrix: every entry in `[lambda, 0.5]`.
    pub fn new_estimated(eps: Vec<Vec<f64>>, lambda: f64) -> Result<Self> {
        let r = Self::new_unchecked(eps, lambda)?;
        if let Some(e) = r.eps.iter().find(|&&e| !(lambda..=0.5).contains(&e)) {
            return Err(Error::InvalidInput(format!(
                "estimated error probability {e} outside [{lambda}, 0.5]"
            )));
        }
        Ok(r)
    }

    /// Any entries in `[0, 1]`. Intended for degenerate test channels
    /// (noiseless, pure noise, adversarial).
    pub fn new_unchecked(eps: Vec<Vec<f64>>, lambda: f64) -> Result<Self> {
        let w = eps.len();
        if w == 0 {
            return Err(Error::InvalidConfig(
                "reliability matrix has no workers".into(),
            ));
        }
        let max_degree = eps[0].len();
        if max_degree == 0 || eps.iter().any(|row| row.len() != max_degree) {
            return Err(Error::InvalidConfig(
                "reliability rows must be nonempty and equally long".into(),
            ));
        }
        if !(lambda > 0.0 && lambda < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "lambda {lambda} outside (0, 0.5)"
            )));
        }
        let flat: Vec<f64> = eps.into_iter().flatten().collect();
        if let Some(e) = flat.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::InvalidConfig(format!(
                "error probability {e} outside [0, 1]"
            )));
        }
        Ok(ReliabilityMatrix {
            w,
            max_degree,
            eps: flat,
            lambda,
        })
    }

    /// Every worker and degree share the probability `eps`.
    pub fn uniform_unchecked(w: usize, max_degree: usize, eps: f64, lambda: f64) -> Result<Self> {
        Self::new_unchecked(vec![vec![eps; max_degree]; w], lambda)
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Error probability of worker `k` (0-based) on degree `d` (1-based).
    pub fn get(&self, k: usize, d: usize) -> Option<f64> {
        if k >= self.w || d == 0 || d > self.max_degree {
            None
        } else {
            Some(self.eps[k * self.max_degree + d - 1])
        }
    }

    /// Errors unless every `(worker, degree)` pair used by `g` is covered.
    pub fn check_covers(&self, g: &TripartiteGraph) -> Result<()> {
        for q in g.queries() {
            if self.get(q.worker, q.degree()).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "no error probability for worker {} at degree {}",
                    q.worker + 1,
                    q.degree()
                )));
            }
        }
        Ok(())
    }

    /// Rows `(worker, degree, eps)` with 1-based worker ids.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.w).flat_map(move |k| {
            (1..=self.max_degree).map(move |d| (k + 1, d, self.eps[k * self.max_degree + d - 1]))
        })
    }

    pub fn as_rows(&self) -> Vec<Vec<f64>> {
        self.eps
            .chunks(self.max_degree)
            .map(<[f64]>::to_vec)
            .collect()
    }
}
