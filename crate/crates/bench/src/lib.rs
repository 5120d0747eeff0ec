//! Seeded fixtures shared by the benchmarks.

use dalloc_core::{
    composed_dim, depths, AllocationProblem, ComposedFeatures, ContextEmbedding, DiscountDepth, PosteriorState,
    RbfConfig, ScoreMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EMBEDDING_DIM: usize = 6;

pub fn actions() -> Vec<DiscountDepth> {
    depths(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap()
}

/// `n` customers over five depths with equal capacities summing to `n`.
pub fn allocation_problem(n: usize, seed: u64) -> AllocationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acts = actions();
    let k = acts.len();
    let values = (0..n * k).map(|_| rng.random_range(5.0..60.0)).collect();
    let scores = ScoreMatrix::new(values, (0..n as u64).collect(), acts).unwrap();
    let caps = (0..k).map(|j| n / k + usize::from(j < n % k)).collect();
    AllocationProblem::new(scores, 2.0, vec![0.15, 0.2, 0.27, 0.35, 0.45], caps).unwrap()
}

pub fn contexts(n: usize, seed: u64) -> Vec<ContextEmbedding> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ContextEmbedding((0..EMBEDDING_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect()
}

pub fn observations(d: usize, n: usize, seed: u64) -> Vec<(ComposedFeatures, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let phi = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            (ComposedFeatures(phi), rng.random_range(1.0..50.0))
        })
        .collect()
}

/// Posterior over the default RBF encoding after `n` observations.
pub fn trained_posterior(n: usize, seed: u64) -> PosteriorState {
    let d = composed_dim(EMBEDDING_DIM, RbfConfig::default().dim());
    let mut p = PosteriorState::new(d, 1.0, 0.5).unwrap();
    p.update(&observations(d, n, seed)).unwrap();
    p
}
