//! Pseudo-reward score matrices for each bandit strategy.
//!
//! Every policy produces an `I x K` matrix of strictly positive full-price
//! values; the allocator turns those into an assignment.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action_encoding::{encode_rbf, ActionEncoding, DiscountDepth, RbfConfig};
use crate::allocator::Assignment;
use crate::embedding::ContextEmbedding;
use crate::error::{Error, Result};
use crate::reward_model::{
    compose_slices, dot, exp_capped, PosteriorState, DEFAULT_REWARD_CAP,
};

/// Row-major `customers x actions` matrix of positive full-price values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    values: Vec<f64>,
    customers: Vec<u64>,
    actions: Vec<DiscountDepth>,
    capped: usize,
}

impl ScoreMatrix {
    pub fn new(values: Vec<f64>, customers: Vec<u64>, actions: Vec<DiscountDepth>) -> Result<Self> {
        if values.len() != customers.len() * actions.len() {
            return Err(Error::DimensionMismatch {
                expected: customers.len() * actions.len(),
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("score {v} is not positive and finite")));
        }
        Ok(Self {
            values,
            customers,
            actions,
            capped: 0,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], actions: Vec<DiscountDepth>) -> Result<Self> {
        let customers = (0..rows.len() as u64).collect();
        if let Some(r) = rows.iter().find(|r| r.len() != actions.len()) {
            return Err(Error::DimensionMismatch {
                expected: actions.len(),
                actual: r.len(),
            });
        }
        Self::new(rows.concat(), customers, actions)
    }

    pub fn with_customer_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.customers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.customers.len(),
                actual: ids.len(),
            });
        }
        self.customers = ids;
        Ok(self)
    }

    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    #[inline]
    pub fn get(&self, customer: usize, action: usize) -> f64 {
        self.values[customer * self.actions.len() + action]
    }

    pub fn row(&self, customer: usize) -> &[f64] {
        let k = self.actions.len();
        &self.values[customer * k..(customer + 1) * k]
    }

    pub fn customers(&self) -> &[u64] {
        &self.customers
    }

    pub fn actions(&self) -> &[DiscountDepth] {
        &self.actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries that hit the reward cap.
    pub fn capped(&self) -> usize {
        self.capped
    }
}

/// Strategy selector, serialised in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    ThompsonSampling,
    Ucb { ucb_beta: f64 },
    Greedy,
    EpsilonGreedy { epsilon: f64 },
    Random,
}

impl PolicyKind {
    /// Label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::ThompsonSampling => "TS-IP",
            PolicyKind::Ucb { .. } => "UCB-IP",
            PolicyKind::Greedy => "Greedy-IP",
            PolicyKind::EpsilonGreedy { .. } => "E-Greedy-IP",
            PolicyKind::Random => "Random",
        }
    }
}

fn check_inputs(state: &PosteriorState, contexts: &[ContextEmbedding], cfg: &RbfConfig) -> Result<()> {
    if let Some(c) = contexts.first() {
        let d = crate::reward_model::composed_dim(c.len(), cfg.dim());
        if d != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: state.dim(),
                actual: d,
            });
        }
    }
    if let Some(c) = contexts.iter().find(|c| c.len() != contexts[0].len()) {
        return Err(Error::DimensionMismatch {
            expected: contexts[0].len(),
            actual: c.len(),
        });
    }
    Ok(())
}

fn encodings(actions: &[DiscountDepth], cfg: &RbfConfig) -> Vec<ActionEncoding> {
    actions.iter().map(|&a| encode_rbf(a, cfg)).collect()
}

/// Builds a score matrix from a per-customer log-score function.
fn build<F>(
    contexts: &[ContextEmbedding],
    actions: &[DiscountDepth],
    cfg: &RbfConfig,
    mut log_score: F,
) -> Result<ScoreMatrix>
where
    F: FnMut(usize, &[f64]) -> f64,
{
    let enc = encodings(actions, cfg);
    let mut values = Vec::with_capacity(contexts.len() * actions.len());
    let mut capped = 0;
    for (i, c) in contexts.iter().enumerate() {
        for e in &enc {
            let phi = compose_slices(c.as_slice(), e.as_slice())?;
            let r = exp_capped(log_score(i, phi.as_slice()), DEFAULT_REWARD_CAP);
            capped += r.capped as usize;
            values.push(r.f_tilde);
        }
    }
    let mut m = ScoreMatrix::new(values, (0..contexts.len() as u64).collect(), actions.to_vec())?;
    m.capped = capped;
    Ok(m)
}

/// Thompson Sampling: one posterior draw per customer, scored over every action.
pub fn ts_scores<R: Rng + ?Sized>(
    state: &PosteriorState,
    contexts: &[ContextEmbedding],
    actions: &[DiscountDepth],
    cfg: &RbfConfig,
    rng: &mut R,
) -> Result<ScoreMatrix> {
    check_inputs(state, contexts, cfg)?;
    let sampler = state.sampler()?;
    let thetas: Vec<Vec<f64>> = contexts.iter().map(|_| sampler.draw(rng)).collect();
    build(contexts, actions, cfg, |i, phi| dot(&thetas[i], phi))
}

/// `exp(<mean, phi>)`.
pub fn greedy_scores(
    state: &PosteriorState,
    contexts: &[ContextEmbedding],
    actions: &[DiscountDepth],
    cfg: &RbfConfig,
) -> Result<ScoreMatrix> {
    check_inputs(state, contexts, cfg)?;
    let mean = state.mean();
    build(contexts, actions, cfg, |_, phi| dot(mean.as_slice(), phi))
}

/// `exp(<mean, phi> + ucb_beta * sqrt(phi^T V^-1 phi))`.
pub fn ucb_scores(
    state: &PosteriorState,
    contexts: &[ContextEmbedding],
    actions: &[DiscountDepth],
    cfg: &RbfConfig,
    ucb_beta: f64,
) -> Result<ScoreMatrix> {
    if !(ucb_beta >= 0.0) || !ucb_beta.is_finite() {
        return Err(Error::InvalidConfig("ucb_beta must be finite and >= 0".into()));
    }
    check_inputs(state, contexts, cfg)?;
    let mean = state.mean();
    let v_inv = state.precision_inverse();
    let d = state.dim();
    build(contexts, actions, cfg, |_, phi| {
        let mut quad = 0.0;
        for r in 0..d {
            let row: f64 = (0..d).map(|c| v_inv[(r, c)] * phi[c]).sum();
            quad += phi[r] * row;
        }
        dot(mean.as_slice(), phi) + ucb_beta * quad.max(0.0).sqrt()
    })
}

/// Scores and which customer rows were replaced by random ones.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyScores {
    pub scores: ScoreMatrix,
    pub randomized: Vec<bool>,
}

/// Greedy rows, except that with probability `epsilon` a customer's whole row is
/// replaced by i.i.d. uniform draws on `[0.5 m, 1.5 m]`, `m` the mean of the greedy row.
pub fn epsilon_greedy_scores<R: Rng + ?Sized>(
    state: &PosteriorState,
    contexts: &[ContextEmbedding],
    actions: &[DiscountDepth],
    cfg: &RbfConfig,
    epsilon: f64,
    rng: &mut R,
) -> Result<EpsilonGreedyScores> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig("epsilon must be in [0, 1]".into()));
    }
    let mut scores = greedy_scores(state, contexts, actions, cfg)?;
    let k = actions.len();
    let mut randomized = vec![false; contexts.len()];
    for (i, flag) in randomized.iter_mut().enumerate() {
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            *flag = true;
            let row = &mut scores.values[i * k..(i + 1) * k];
            let m = row.iter().sum::<f64>() / k.max(1) as f64;
            for v in row.iter_mut() {
                *v = m * rng.random_range(0.5..1.5);
            }
        }
    }
    Ok(EpsilonGreedyScores { scores, randomized })
}

/// Scores for any non-random policy kind.
pub fn policy_scores<R: Rng + ?Sized>(
    kind: &PolicyKind,
    state: &PosteriorState,
    contexts: &[ContextEmbedding],
    actions: &[DiscountDepth],
    cfg: &RbfConfig,
    rng: &mut R,
) -> Result<ScoreMatrix> {
    match *kind {
        PolicyKind::ThompsonSampling => ts_scores(state, contexts, actions, cfg, rng),
        PolicyKind::Ucb { ucb_beta } => ucb_scores(state, contexts, actions, cfg, ucb_beta),
        PolicyKind::Greedy => greedy_scores(state, contexts, actions, cfg),
        PolicyKind::EpsilonGreedy { epsilon } => {
            Ok(epsilon_greedy_scores(state, contexts, actions, cfg, epsilon, rng)?.scores)
        }
        PolicyKind::Random => Err(Error::InvalidConfig(
            "the random policy allocates without scores".into(),
        )),
    }
}

/// Uniformly random assignment filling at most `capacities[k]` slots per action,
/// one code per customer. No scores are involved, so the objective is reported as 0.
pub fn random_assignment<R: Rng + ?Sized>(
    n_customers: usize,
    actions: &[DiscountDepth],
    capacities: &[usize],
    rng: &mut R,
) -> Result<Assignment> {
    if capacities.len() != actions.len() {
        return Err(Error::DimensionMismatch {
            expected: actions.len(),
            actual: capacities.len(),
        });
    }
    let mut slots: Vec<usize> = capacities
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| std::iter::repeat(k).take(n.min(n_customers)))
        .collect();
    slots.shuffle(rng);
    let mut order: Vec<usize> = (0..n_customers).collect();
    order.shuffle(rng);
    let mut chosen = vec![None; n_customers];
    for (&i, &k) in order.iter().zip(&slots) {
        chosen[i] = Some(k);
    }
    Ok(Assignment::new(chosen, actions.to_vec(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_encoding::depths;
    use crate::reward_model::{composed_dim, ComposedFeatures};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, seed: u64) -> (PosteriorState, Vec<ContextEmbedding>, Vec<DiscountDepth>, RbfConfig) {
        let cfg = RbfConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let contexts: Vec<_> = (0..n)
            .map(|_| ContextEmbedding((0..2).map(|_| rng.random_range(0.0..1.0)).collect()))
            .collect();
        let actions = depths(&[0.1, 0.3, 0.5]).unwrap();
        let mut state = PosteriorState::new(composed_dim(2, 3), 1.0, 1.0).unwrap();
        let obs: Vec<(ComposedFeatures, f64)> = (0..50)
            .map(|j| {
                let c = &contexts[j % n];
                let a = actions[j % 3];
                let phi = compose_slices(c.as_slice(), encode_rbf(a, &cfg).as_slice()).unwrap();
                (phi, rng.random_range(1.0..3.0))
            })
            .collect();
        state.update(&obs).unwrap();
        (state, contexts, actions, cfg)
    }

    #[test]
    fn ts_with_zero_beta_is_greedy() {
        let (mut s, c, a, cfg) = setup(10, 1);
        s.set_beta(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            ts_scores(&s, &c, &a, &cfg, &mut rng).unwrap(),
            greedy_scores(&s, &c, &a, &cfg).unwrap()
        );
    }

    #[test]
    fn ts_seeded_and_exploring() {
        let (s, c, a, cfg) = setup(5, 2);
        let x = ts_scores(&s, &c, &a, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let y = ts_scores(&s, &c, &a, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(x, y);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws: Vec<f64> = (0..100)
            .map(|_| ts_scores(&s, &c, &a, &cfg, &mut rng).unwrap().get(0, 1))
            .collect();
        assert!(crate::stats::sample_sd(&draws) > 0.0);
    }

    #[test]
    fn greedy_fresh_is_one() {
        let cfg = RbfConfig::default();
        let s = PosteriorState::new(composed_dim(2, 3), 1.0, 1.0).unwrap();
        let c = vec![ContextEmbedding(vec![0.3, 0.9]); 4];
        let a = depths(&[0.2, 0.4]).unwrap();
        let m = greedy_scores(&s, &c, &a, &cfg).unwrap();
        assert!(m.values().iter().all(|&v| v == 1.0));
        assert_eq!(m, greedy_scores(&s, &c, &a, &cfg).unwrap());
    }

    #[test]
    fn ucb_bonus() {
        let (s, c, a, cfg) = setup(6, 5);
        let g = greedy_scores(&s, &c, &a, &cfg).unwrap();
        assert_eq!(ucb_scores(&s, &c, &a, &cfg, 0.0).unwrap(), g);
        let u = ucb_scores(&s, &c, &a, &cfg, 1.5).unwrap();
        for (x, y) in u.values().iter().zip(g.values()) {
            assert!(x >= y);
        }

        // fresh posterior: log bonus = ucb_beta * |phi|
        let fresh = PosteriorState::new(composed_dim(2, 3), 1.0, 1.0).unwrap();
        let u = ucb_scores(&fresh, &c[..1], &a[..1], &cfg, 0.7).unwrap();
        let phi = compose_slices(c[0].as_slice(), encode_rbf(a[0], &cfg).as_slice()).unwrap();
        let norm = phi.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((u.get(0, 0).ln() - 0.7 * norm).abs() < 1e-12);
    }

    #[test]
    fn epsilon_greedy_extremes_and_rate() {
        let (s, c, a, cfg) = setup(8, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = greedy_scores(&s, &c, &a, &cfg).unwrap();
        let e0 = epsilon_greedy_scores(&s, &c, &a, &cfg, 0.0, &mut rng).unwrap();
        assert_eq!(e0.scores, g);
        assert!(e0.randomized.iter().all(|r| !r));
        let e1 = epsilon_greedy_scores(&s, &c, &a, &cfg, 1.0, &mut rng).unwrap();
        assert!(e1.randomized.iter().all(|&r| r));
        assert!(e1.scores.values().iter().all(|&v| v > 0.0));

        let many = vec![c[0].clone(); 10_000];
        let e = epsilon_greedy_scores(&s, &many, &a, &cfg, 0.1, &mut rng).unwrap();
        let frac = e.randomized.iter().filter(|&&r| r).count() as f64 / 10_000.0;
        assert!((0.08..=0.12).contains(&frac), "{frac}");
        assert!(epsilon_greedy_scores(&s, &c, &a, &cfg, 1.5, &mut rng).is_err());
    }

    #[test]
    fn dimension_checks() {
        let (s, _, a, cfg) = setup(3, 8);
        let wrong = vec![ContextEmbedding(vec![1.0; 4])];
        assert!(greedy_scores(&s, &wrong, &a, &cfg).is_err());
    }

    #[test]
    fn random_assignment_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = depths(&[0.1, 0.2, 0.3]).unwrap();
        let none = random_assignment(10, &a, &[0, 0, 0], &mut rng).unwrap();
        assert!(none.chosen().iter().all(Option::is_none));

        let one = depths(&[0.25]).unwrap();
        let all = random_assignment(7, &one, &[7], &mut rng).unwrap();
        assert!(all.chosen().iter().all(|c| *c == Some(0)));

        let r = random_assignment(100, &a, &[20, 30, 10], &mut rng).unwrap();
        assert_eq!(r.usage(), vec![20, 30, 10]);

        let over = random_assignment(5, &a, &[4, 4, 4], &mut rng).unwrap();
        assert_eq!(over.usage().iter().sum::<usize>(), 5);
        assert!(over.usage().iter().zip([4, 4, 4]).all(|(u, c)| *u <= c));
    }
}
