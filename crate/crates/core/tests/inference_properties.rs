use xorq::infer::{phase1, phase2, phase2_message, phase3, phase4, run, PhasePools};
use xorq::noise::answer_queries;
use xorq::querygen::generate_queries;
use xorq::{
    AnswerSet, DegreeDistribution, InferenceConfig, InferenceMode, LabelVector, NoiseSpec, Phase,
    Query, QueryGenConfig, ReliabilityMatrix, SeedStream, TripartiteGraph,
};

struct Instance {
    x: LabelVector,
    g: TripartiteGraph,
    y: AnswerSet,
    r: ReliabilityMatrix,
}

fn instance(
    m: usize,
    n: usize,
    w: usize,
    phi: DegreeDistribution,
    rate: f64,
    seed: SeedStream,
) -> Instance {
    let cfg = QueryGenConfig {
        m,
        n,
        w,
        phi,
        degree1_init: true,
        degree1_worker_pool: None,
        partitioned: false,
        seed: None,
    };
    let g = generate_queries(&cfg, seed.fork(0)).unwrap();
    let r = NoiseSpec::DegreeIndependent { rates: vec![rate] }
        .build_unchecked(w, g.max_degree(), 0.01)
        .unwrap();
    let x = LabelVector::random(m, &mut seed.fork(1).rng());
    let y = answer_queries(&x, &g, &r, seed.fork(2)).unwrap();
    Instance { x, g, y, r }
}

fn non_init(g: &TripartiteGraph) -> Vec<usize> {
    g.queries()
        .iter()
        .filter(|q| q.phase != Phase::A1)
        .map(|q| q.id)
        .collect()
}

/// Per-label weighted message sums, zero where nothing was heard.
fn vote_sums(
    y: &AnswerSet,
    g: &TripartiteGraph,
    pool: &[usize],
    est: &LabelVector,
    weight: impl Fn(&Query) -> f64,
) -> Vec<f64> {
    let mut sums = vec![0.0; g.m()];
    for &j in pool {
        let q = g.query(j);
        for &i in &q.labels {
            sums[i] += weight(q) * f64::from(phase2_message(y.get(j), q, est, i).unwrap());
        }
    }
    sums
}

fn heard(g: &TripartiteGraph, pool: &[usize]) -> Vec<bool> {
    let mut h = vec![false; g.m()];
    for &j in pool {
        for &i in &g.query(j).labels {
            h[i] = true;
        }
    }
    h
}

/// Labels whose vote is decided without a coin: heard and nonzero, or unheard.
fn decided(sums: &[f64], heard: &[bool]) -> Vec<usize> {
    (0..sums.len())
        .filter(|&i| !heard[i] || sums[i].abs() > 1e-9)
        .collect()
}

fn assert_agree_on(a: &LabelVector, b: &LabelVector, labels: &[usize]) {
    for &i in labels {
        assert_eq!(a.get(i), b.get(i), "label {i}");
    }
}

#[test]
fn phase1_errors_match_the_flip_rate() {
    let inst = instance(
        10_000,
        10_000,
        1,
        DegreeDistribution::point_mass(1).unwrap(),
        0.3,
        SeedStream::new(1),
    );
    let errors = phase1(&inst.y, &inst.g).unwrap().hamming(&inst.x);
    assert!((2850..=3150).contains(&errors), "{errors}");
}

#[test]
fn phase2_improves_on_phase1() {
    let phi = DegreeDistribution::uniform(3, 6).unwrap();
    let (mut ber1, mut ber2) = (0, 0);
    for t in 0..10 {
        let inst = instance(1000, 6000, 20, phi.clone(), 0.1, SeedStream::new(2).fork(t));
        let x1 = phase1(&inst.y, &inst.g).unwrap();
        let pool = non_init(&inst.g);
        let x2 = phase2(&inst.y, &inst.g, &pool, &x1, SeedStream::new(t)).unwrap();
        ber1 += x1.hamming(&inst.x);
        ber2 += x2.hamming(&inst.x);
    }
    assert!(ber2 < ber1, "phase 2 {ber2} vs phase 1 {ber1}");
}

#[test]
fn phase3_concentrates_around_the_true_rates() {
    let trials = 200;
    let mut misses = 0;
    for t in 0..trials {
        let seed = SeedStream::new(3).fork(t);
        let eps = 0.05 + 0.4 * seed.fork(7).unit();
        let inst = instance(
            300,
            2300,
            2,
            DegreeDistribution::point_mass(2).unwrap(),
            eps,
            seed,
        );
        let pool = non_init(&inst.g);
        let est = phase3(&inst.y, &inst.g, &pool, &inst.x, 0.01).unwrap();
        for k in 0..2 {
            let count = inst.g.worker_adj(k, 2).len() as f64;
            let bound = 3.0 * (eps * (1.0 - eps) / count).sqrt();
            if (est.get(k, 2).unwrap() - eps).abs() > bound {
                misses += 1;
            }
        }
    }
    // 400 estimates at a 3-sigma band; about one miss is expected.
    assert!(misses <= 6, "{misses} misses");
}

#[test]
fn global_sign_symmetry() {
    let phi = DegreeDistribution::new(vec![0.2, 0.3, 0.3, 0.2]).unwrap();
    let mut checked = 0;
    for t in 0..50 {
        let inst = instance(60, 400, 3, phi.clone(), 0.15, SeedStream::new(4).fork(t));
        let (g, y) = (&inst.g, &inst.y);
        let flipped = AnswerSet::new(
            g.queries()
                .iter()
                .map(|q| {
                    if q.degree() % 2 == 1 {
                        -y.get(q.id)
                    } else {
                        y.get(q.id)
                    }
                })
                .collect(),
        )
        .unwrap();
        let pool = non_init(g);
        let est = phase1(y, g).unwrap();
        let neg = phase1(&flipped, g).unwrap();
        assert_eq!(neg, est.negated());

        let eps = phase3(y, g, &pool, &est, 0.01).unwrap();
        assert_eq!(phase3(&flipped, g, &pool, &neg, 0.01).unwrap(), eps);

        let sums2 = vote_sums(y, g, &pool, &est, |_| 1.0);
        let sums4 = vote_sums(y, g, &pool, &est, |q| {
            let e = eps.get(q.worker, q.degree()).unwrap();
            ((1.0 - e) / e).ln()
        });
        let h = heard(g, &pool);
        let s = SeedStream::new(t);
        let on2 = decided(&sums2, &h);
        assert_agree_on(
            &phase2(&flipped, g, &pool, &neg, s).unwrap(),
            &phase2(y, g, &pool, &est, s).unwrap().negated(),
            &on2,
        );
        let on4 = decided(&sums4, &h);
        assert_agree_on(
            &phase4(&flipped, g, &pool, &neg, &eps, s).unwrap(),
            &phase4(y, g, &pool, &est, &eps, s).unwrap().negated(),
            &on4,
        );
        checked += on2.len() + on4.len();
    }
    assert!(checked >= 50 * 60, "only {checked} decided labels");
}

#[test]
fn query_order_does_not_matter_without_ties() {
    let phi = DegreeDistribution::uniform(2, 4).unwrap();
    let mut checked = 0;
    for t in 0..40 {
        let inst = instance(50, 500, 4, phi.clone(), 0.1, SeedStream::new(5).fork(t));
        let (g, y) = (&inst.g, &inst.y);
        let m = g.m();
        // Reverse every query after the initialization block.
        let n = g.n();
        let order: Vec<usize> = (0..m).chain((m..n).rev()).collect();
        let queries: Vec<Query> = order
            .iter()
            .enumerate()
            .map(|(id, &j)| Query {
                id,
                ..g.query(j).clone()
            })
            .collect();
        let g2 = TripartiteGraph::new(m, g.w(), queries).unwrap();
        let y2 = AnswerSet::new(order.iter().map(|&j| y.get(j)).collect()).unwrap();

        let pool = non_init(g);
        let pool2 = non_init(&g2);
        let est = phase1(y, g).unwrap();
        assert_eq!(phase1(&y2, &g2).unwrap(), est);
        let eps = phase3(y, g, &pool, &est, 0.01).unwrap();
        assert_eq!(phase3(&y2, &g2, &pool2, &est, 0.01).unwrap(), eps);

        let h = heard(g, &pool);
        let sums2 = vote_sums(y, g, &pool, &est, |_| 1.0);
        let sums4 = vote_sums(y, g, &pool, &est, |q| {
            let e = eps.get(q.worker, q.degree()).unwrap();
            ((1.0 - e) / e).ln()
        });
        // Different tie streams too: decided labels never use the coins.
        let on2 = decided(&sums2, &h);
        assert_agree_on(
            &phase2(y, g, &pool, &est, SeedStream::new(1)).unwrap(),
            &phase2(&y2, &g2, &pool2, &est, SeedStream::new(2)).unwrap(),
            &on2,
        );
        let on4 = decided(&sums4, &h);
        assert_agree_on(
            &phase4(y, g, &pool, &est, &eps, SeedStream::new(1)).unwrap(),
            &phase4(&y2, &g2, &pool2, &est, &eps, SeedStream::new(2)).unwrap(),
            &on4,
        );
        checked += on2.len() + on4.len();
    }
    assert!(checked >= 40 * 50, "only {checked} decided labels");
}

#[test]
fn run_is_deterministic() {
    let inst = instance(
        200,
        2000,
        10,
        DegreeDistribution::uniform(2, 5).unwrap(),
        0.15,
        SeedStream::new(6),
    );
    let cfg = InferenceConfig::default();
    let a = run(&inst.y, &inst.g, &cfg, SeedStream::new(1)).unwrap();
    let b = run(&inst.y, &inst.g, &cfg, SeedStream::new(1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noiseless_answers_are_decoded_exactly_in_both_modes() {
    let phi = DegreeDistribution::uniform(1, 4).unwrap();
    for t in 0..20 {
        let inst = instance(200, 3000, 5, phi.clone(), 0.0, SeedStream::new(7).fork(t));
        for cfg in [InferenceConfig::default(), InferenceConfig::partitioned()] {
            let res = run(&inst.y, &inst.g, &cfg, SeedStream::new(t)).unwrap();
            assert_eq!(res.x4, inst.x, "{:?}", cfg.mode);
            assert_eq!(res.x2, inst.x);
        }
    }
}

#[test]
fn partitioned_pools_follow_the_block_sizes() {
    let inst = instance(
        200,
        3000,
        5,
        DegreeDistribution::uniform(1, 4).unwrap(),
        0.1,
        SeedStream::new(8),
    );
    let g = xorq::querygen::positional_partition(&inst.g).unwrap();
    let pools = PhasePools::for_mode(&g, InferenceMode::Partitioned).unwrap();
    let sizes = xorq::querygen::partition_sizes(200, 3000, 5).unwrap();
    assert_eq!(
        [
            pools.phase1.len(),
            pools.phase2.len(),
            pools.phase3.len(),
            pools.phase4.len()
        ],
        sizes
    );
    // Known reliabilities are usable directly as phase 4 weights.
    let x1 = phase1(&inst.y, &g).unwrap();
    phase4(&inst.y, &g, &pools.phase4, &x1, &inst.r, SeedStream::new(0)).unwrap();
}
