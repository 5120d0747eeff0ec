//! A deployed bandit agent: embedding network, depth encoding, posterior and
//! allocation settings bundled together.

use rand::Rng;

use crate::action_encoding::{encode_rbf, DiscountDepth, RbfConfig};
use crate::allocator::{capacities_from_profile, solve_with, AllocationProblem, Assignment, SolverOptions};
use crate::embedding::{ContextEmbedding, CustomerFeatures, EmbeddingModel};
use crate::error::{Error, Result};
use crate::policies::{policy_scores, random_assignment, PolicyKind};
use crate::reward_model::{compose_slices, ComposedFeatures, PosteriorState};

#[derive(Debug, Clone)]
pub struct Agent {
    pub embedding: EmbeddingModel,
    pub rbf: RbfConfig,
    pub actions: Vec<DiscountDepth>,
    /// Historical engagement rate per action.
    pub engagement: Vec<f64>,
    /// Per-action share of each batch; scaled to the batch size at allocation time.
    pub capacity_profile: Vec<f64>,
    pub w: f64,
    pub policy: PolicyKind,
    pub posterior: PosteriorState,
    pub solver: SolverOptions,
}

impl Agent {
    pub fn validate(&self) -> Result<()> {
        let k = self.actions.len();
        if k == 0 {
            return Err(Error::Empty("action set".into()));
        }
        for (name, len) in [("engagement", self.engagement.len()), ("capacity profile", self.capacity_profile.len())] {
            if len != k {
                return Err(Error::InvalidConfig(format!("{name} has {len} entries for {k} actions")));
            }
        }
        let d = crate::reward_model::composed_dim(self.embedding.architecture().embedding_dim(), self.rbf.dim());
        if d != self.posterior.dim() {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: self.posterior.dim(),
            });
        }
        Ok(())
    }

    pub fn embed(&self, customers: &[CustomerFeatures]) -> Result<Vec<ContextEmbedding>> {
        self.embedding.extract_embeddings(customers)
    }

    pub fn capacities(&self, batch_len: usize) -> Result<Vec<usize>> {
        capacities_from_profile(&self.capacity_profile, batch_len)
    }

    /// Intended allocation for one batch of embedded customers.
    pub fn allocate<R: Rng + ?Sized>(&self, contexts: &[ContextEmbedding], rng: &mut R) -> Result<Assignment> {
        self.allocate_with(&self.posterior, contexts, rng)
    }

    /// Allocation driven by an arbitrary posterior (the ULCC consumer uses the learner's).
    pub fn allocate_with<R: Rng + ?Sized>(
        &self,
        posterior: &PosteriorState,
        contexts: &[ContextEmbedding],
        rng: &mut R,
    ) -> Result<Assignment> {
        let caps = self.capacities(contexts.len())?;
        if self.policy == PolicyKind::Random {
            return random_assignment(contexts.len(), &self.actions, &caps, rng);
        }
        let scores = policy_scores(&self.policy, posterior, contexts, &self.actions, &self.rbf, rng)?;
        let problem = AllocationProblem::new(scores, self.w, self.engagement.clone(), caps)?;
        Ok(solve_with(&problem, self.solver))
    }

    pub fn features(&self, context: &ContextEmbedding, depth: DiscountDepth) -> Result<ComposedFeatures> {
        compose_slices(context.as_slice(), encode_rbf(depth, &self.rbf).as_slice())
    }

    /// Adds every engaged outcome `(context, depth, F)` to the posterior; returns how many were used.
    pub fn observe(&mut self, outcomes: &[(&ContextEmbedding, DiscountDepth, f64)]) -> Result<usize> {
        let batch = engaged_features(self, outcomes)?;
        self.posterior.update(&batch)?;
        Ok(batch.len())
    }
}

pub(crate) fn engaged_features(
    agent: &Agent,
    outcomes: &[(&ContextEmbedding, DiscountDepth, f64)],
) -> Result<Vec<(ComposedFeatures, f64)>> {
    outcomes
        .iter()
        .filter(|(_, _, f)| *f > 0.0)
        .map(|(c, a, f)| Ok((agent.features(c, *a)?, *f)))
        .collect()
}
