//! Fixtures shared by the benchmarks.

use xorq::noise::answer_queries;
use xorq::querygen::generate_queries;
use xorq::{
    AnswerSet, DegreeDistribution, LabelVector, NoiseSpec, QueryGenConfig, ReliabilityMatrix,
    SeedStream, TripartiteGraph,
};

pub struct Fixture {
    pub x: LabelVector,
    pub g: TripartiteGraph,
    pub y: AnswerSet,
    pub r: ReliabilityMatrix,
}

/// Query design with degrees uniform on `lo..=hi` and error rates spread
/// over `0.02..=0.20`.
pub fn design(m: usize, n_extra: usize, w: usize, lo: usize, hi: usize) -> QueryGenConfig {
    QueryGenConfig {
        m,
        n: m + n_extra,
        w,
        phi: DegreeDistribution::uniform(lo, hi).expect("valid degree range"),
        degree1_init: true,
        degree1_worker_pool: None,
        partitioned: false,
        seed: None,
    }
}

pub fn fixture(cfg: &QueryGenConfig, seed: u64) -> Fixture {
    let seed = SeedStream::new(seed);
    let g = generate_queries(cfg, seed.fork(0)).expect("valid design");
    let rates = (1..=10).map(|i| 0.02 * i as f64).collect();
    let r = NoiseSpec::DegreeIndependent { rates }
        .build(cfg.w, g.max_degree(), xorq::DEFAULT_LAMBDA)
        .expect("valid noise");
    let x = LabelVector::random(cfg.m, &mut seed.fork(1).rng());
    let y = answer_queries(&x, &g, &r, seed.fork(2)).expect("aligned");
    Fixture { x, g, y, r }
}
