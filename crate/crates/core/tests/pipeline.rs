use dalloc_core::environment::{action_counts, engagement_rates};
use dalloc_core::{
    composed_dim, depths, generate_log, read_log, replay_evaluate, solve, solve_bruteforce, train_embedding_model,
    write_log, Agent, AllocationProblem, Architecture, ComposedFeatures, CustomerFeatures, DiscountDepth, LogHeader,
    PolicyKind, PosteriorState, Safeguards, ScoreMatrix, SolverOptions, SyntheticWorld, TrainConfig, WorldConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn actions() -> Vec<DiscountDepth> {
    depths(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap()
}

fn world() -> SyntheticWorld {
    SyntheticWorld::generate(WorldConfig {
        verify_customers: 200,
        ..WorldConfig::default()
    })
    .unwrap()
}

fn agent(world: &SyntheticWorld, log: &[dalloc_core::ReplayEvent], policy: PolicyKind) -> Agent {
    let history: Vec<(CustomerFeatures, f64)> = log
        .iter()
        .filter(|e| e.engaged)
        .map(|e| (e.customer.clone(), e.full_price_value.ln()))
        .collect();
    let arch = Architecture {
        layer_sizes: vec![16, 4, 1],
        ..Architecture::default()
    };
    let trained = train_embedding_model(&history, &arch, &TrainConfig { epochs: 5, ..TrainConfig::default() }).unwrap();
    let rbf = world.config().rbf.clone();
    let d = composed_dim(arch.embedding_dim(), rbf.dim());
    Agent {
        embedding: trained.model,
        rbf,
        actions: actions(),
        engagement: engagement_rates(log, &actions()).unwrap(),
        capacity_profile: vec![0.2; 5],
        w: 1.0,
        policy,
        posterior: PosteriorState::new(d, 1.0, 0.5).unwrap(),
        solver: SolverOptions::default(),
    }
}

#[test]
fn world_to_replay() {
    let world = world();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let log = generate_log(&world, 4_000, &actions(), &mut rng).unwrap();
    assert_eq!(log.len(), 4_000);
    assert_eq!(action_counts(&log, &actions()).unwrap().iter().sum::<usize>(), 4_000);

    let mut buf = Vec::new();
    let header = LogHeader::new(world.n_features(), &actions(), log.len(), Some(3));
    write_log(&mut buf, &header, &log).unwrap();
    let (h, back) = read_log(buf.as_slice()).unwrap();
    assert_eq!(h, header);
    assert_eq!(back, log);

    // Engagement rises with depth in the world, and the log should show it.
    let rates = engagement_rates(&log, &actions()).unwrap();
    assert!(rates[4] > rates[0], "{rates:?}");

    let mut ts = agent(&world, &log, PolicyKind::ThompsonSampling);
    let contexts = ts.embed(&log[..1_000].iter().map(|e| e.customer.clone()).collect::<Vec<_>>()).unwrap();
    let outcomes: Vec<_> = contexts
        .iter()
        .zip(&log[..1_000])
        .map(|(c, e)| (c, e.depth, e.full_price_value))
        .collect();
    let used = ts.observe(&outcomes).unwrap();
    assert_eq!(used, log[..1_000].iter().filter(|e| e.engaged).count());
    assert_eq!(ts.posterior.n_observations(), used as u64);

    let batch = ts.embed(&log[1_000..1_100].iter().map(|e| e.customer.clone()).collect::<Vec<_>>()).unwrap();
    let assignment = ts.allocate(&batch, &mut rng).unwrap();
    let caps = ts.capacities(100).unwrap();
    assert_eq!(caps.iter().sum::<usize>(), 100);
    assert!(assignment.usage().iter().zip(&caps).all(|(u, c)| u <= c));

    let mut random = agent(&world, &log, PolicyKind::Random);
    let report = replay_evaluate(&mut random, &log, 500, &mut rng).unwrap();
    assert_eq!(report.batches.len(), 8);
    let kept = report.n_retained as f64 / report.n_events as f64;
    assert!((kept - 0.2).abs() < 0.03, "retained {kept}");
    assert!((report.mean_value - report.log_mean_value).abs() < 3.0 * report.standard_error);
}

#[test]
fn replay_is_seed_deterministic() {
    let world = world();
    let log = generate_log(&world, 1_500, &actions(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let run = || {
        let mut a = agent(&world, &log, PolicyKind::ThompsonSampling);
        replay_evaluate(&mut a, &log, 300, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    };
    assert_eq!(run(), run());
}

fn rows(d: usize, n: usize, seed: u64) -> Vec<(ComposedFeatures, f64)> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let phi = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            (ComposedFeatures(phi), rng.random_range(0.5..20.0))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_inverse_tracks_precision(d in 1usize..10, n in 0usize..200, seed in any::<u64>()) {
        let mut p = PosteriorState::new(d, 1.0, 1.0).unwrap().with_safeguards(Safeguards::NONE);
        p.update(&rows(d, n, seed)).unwrap();
        let prod = p.precision() * p.precision_inverse();
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod[(i, j)] - target).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn posterior_mean_ignores_update_order(d in 1usize..8, n in 1usize..80, seed in any::<u64>()) {
        let data = rows(d, n, seed);
        let mut fwd = PosteriorState::new(d, 2.0, 1.0).unwrap();
        fwd.update(&data).unwrap();
        let mut rev = PosteriorState::new(d, 2.0, 1.0).unwrap();
        let mut reversed = data.clone();
        reversed.reverse();
        for chunk in reversed.chunks(7) {
            rev.update(chunk).unwrap();
        }
        for (a, b) in fwd.mean().iter().zip(rev.mean().iter()) {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn flow_is_optimal_and_feasible(
        n in 1usize..9,
        k in 1usize..4,
        w in 0.0f64..5.0,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let acts = depths(&[0.1, 0.3, 0.5][..k]).unwrap();
        let values: Vec<f64> = (0..n * k).map(|_| rng.random_range(0.0..30.0)).collect();
        let scores = ScoreMatrix::new(values, (0..n as u64).collect(), acts).unwrap();
        let engagement = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let caps = (0..k).map(|_| rng.random_range(0..=n)).collect();
        let p = AllocationProblem::new(scores, w, engagement, caps).unwrap();
        let flow = solve(&p);
        let exact = solve_bruteforce(&p).unwrap();
        prop_assert!(p.is_feasible(flow.chosen()));
        prop_assert!((flow.objective - exact.objective).abs() < 1e-6);
        prop_assert!((p.objective_of(flow.chosen()) - flow.objective).abs() < 1e-9);
    }
}
