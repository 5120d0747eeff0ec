//! Contextual-bandit toolkit for allocating discount depths to customers under
//! per-depth capacity limits.
//!
//! The pipeline: raw customer features are embedded by a small MLP, depths are
//! encoded with Gaussian radial basis functions, and a Bayesian log-linear model
//! over their outer product predicts basket value. Thompson Sampling draws from
//! that posterior feed an integer program that is solved exactly as a min-cost
//! flow. A synthetic world and an offline replay evaluator close the loop.

pub mod action_encoding;
pub mod agent;
pub mod allocator;
pub mod embedding;
pub mod environment;
pub mod error;
pub mod metrics;
pub mod policies;
pub mod reward_model;
pub mod simulator;
pub mod stats;

pub use action_encoding::{
    depths, effective_counts, encode_continuous, encode_euclidean, encode_rbf, ActionEncoding, DiscountDepth,
    RbfConfig, WidthMode,
};
pub use allocator::{
    capacities_from_profile, objective_coefficient, solve, solve_bruteforce, solve_with, solve_with_budget,
    AllocationProblem, Assignment, BudgetedAssignment, SolverOptions,
};
pub use embedding::{
    train_embedding_model, train_linear_baseline, Activation, Architecture, ContextEmbedding, CustomerFeatures,
    EmbeddingModel, LinearModel, TrainConfig, TrainingOutcome,
};
pub use agent::Agent;
pub use environment::{
    generate_log, read_log, replay_evaluate, sample_outcome, uniform_resample, write_log, LogHeader, Outcome,
    ReplayBatch, ReplayEvent, ReplayReport, SyntheticWorld, WorldConfig,
};
pub use error::{Error, Result};
pub use metrics::{evaluate, monotonicity_rate, spearman, wape, EvalReport};
pub use policies::{policy_scores, random_assignment, PolicyKind, ScoreMatrix};
pub use reward_model::{
    compose_features, composed_dim, predict_reward, ComposedFeatures, PosteriorState, RewardSample, Safeguards,
    ThetaSampler,
};
pub use simulator::{
    compute_abv, derive_seed, run_experiment, run_ulcc, AbvDenominator, ExperimentConfig, ExperimentResult, LearningCurve, Profile,
    StartMode, UlccResult, WarmSource,
};
