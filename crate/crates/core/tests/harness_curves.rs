use xorq::harness::{run_experiment, BudgetMode, DecoderKind, ExperimentConfig};
use xorq::{DegreeDistribution, InferenceConfig, NoiseSpec, SeedStream};

fn mixed_workers() -> ExperimentConfig {
    ExperimentConfig {
        m: 1000,
        w: 100,
        phi: DegreeDistribution::uniform(3, 6).unwrap(),
        noise: NoiseSpec::DegreeIndependent {
            rates: (1..=10).map(|i| 0.02 * i as f64).collect(),
        },
        decoder: DecoderKind::Xor4phase,
        budgets: vec![0.3, 0.5, 1.0, 1.5, 2.0],
        budget_mode: BudgetMode::Normalized,
        trials: 200,
        seed: None,
        inference: InferenceConfig::default(),
        degree1_init: true,
        degree1_worker_pool: None,
        unchecked_noise: false,
        em_iters: 100,
    }
}

#[test]
fn frame_error_rate_falls_with_budget() {
    let out = run_experiment(&mixed_workers(), SeedStream::new(99)).unwrap();
    for pair in out.rows.windows(2) {
        assert!(pair[1].fer <= pair[0].fer + 0.03, "{:?}", out.rows);
    }
    for row in &out.rows {
        assert!(row.fer >= row.ber);
        assert!((row.normalized_budget * out.n_star.unwrap() - row.budget_n as f64).abs() < 1e-6);
    }
    assert_eq!(out.init_queries, 1000);
}

#[test]
fn rows_do_not_depend_on_thread_count() {
    let mut cfg = mixed_workers();
    cfg.m = 200;
    cfg.trials = 16;
    let strip = |pool: rayon::ThreadPool| {
        let mut rows = pool.install(|| run_experiment(&cfg, SeedStream::new(5)).unwrap().rows);
        rows.iter_mut().for_each(|r| r.wall_time_s = 0.0);
        rows
    };
    let one = strip(
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap(),
    );
    let many = strip(
        rayon::ThreadPoolBuilder::new()
            .num_threads(6)
            .build()
            .unwrap(),
    );
    assert_eq!(one, many);
}
