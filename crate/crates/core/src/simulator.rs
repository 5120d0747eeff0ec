//! Monte Carlo learning-curve experiments on the synthetic world.
//!
//! Every experiment first builds a shared setup: the world, a randomised
//! history campaign, the embedding network trained on it, and per-action
//! engagement rates estimated from it. Each Monte Carlo iteration then draws
//! its own customer stream and (for warm starts) its own earlier campaign,
//! and every policy faces the same customers with the same latent outcomes.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action_encoding::{depths, DiscountDepth, RbfConfig};
use crate::agent::Agent;
use crate::allocator::{objective_coefficient, SolverOptions};
use crate::embedding::{train_embedding_model, Architecture, ContextEmbedding, CustomerFeatures, EmbeddingModel, TrainConfig};
use crate::environment::{engagement_rates, generate_log, Outcome, ReplayEvent, SyntheticWorld, WorldConfig};
use crate::error::{Error, Result};
use crate::metrics::{depth_grid, elasticity_curve, monotone_fraction, mean_prediction_grid, uncertainty_profile};
use crate::policies::{ts_scores, PolicyKind};
use crate::reward_model::{composed_dim, PosteriorState, Safeguards};
use crate::stats::{self, paired_t_test, welch_t_test, TTest};

/// Which customers form the ABV denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AbvDenominator {
    #[default]
    Engaged,
    Allocated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    Cold,
    #[default]
    Warm,
}

/// Where a warm-started posterior comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarmSource {
    /// A fresh randomised campaign of `batches` batches per Monte Carlo iteration.
    Campaign { batches: usize },
    /// A saved posterior checkpoint, shared by every iteration.
    Checkpoint { path: PathBuf },
}

impl Default for WarmSource {
    fn default() -> Self {
        WarmSource::Campaign { batches: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub actions: Vec<f64>,
    /// Per-action share of each batch.
    pub capacity_profile: Vec<f64>,
    /// Importance of revenue relative to markdown cost.
    pub w: f64,
    pub rbf: RbfConfig,
    pub architecture: Architecture,
    pub training: TrainConfig,
    /// Customers in the randomised campaign used to train the embedding.
    pub history_customers: usize,
    pub prior_scale: f64,
    /// Thompson Sampling exploration scale.
    pub beta: f64,
    pub safeguards: Safeguards,
    pub policies: Vec<PolicyKind>,
    pub batch_size: usize,
    pub n_batches: usize,
    pub mc_iterations: usize,
    pub start: StartMode,
    pub warm_source: WarmSource,
    pub abv_denominator: AbvDenominator,
    /// Batches at the end of each curve used for summary comparisons.
    pub final_window: usize,
    pub solver: SolverOptions,
    pub seed: u64,
}

/// Named size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::InvalidConfig(format!("unknown profile {other:?} (expected desk or full)"))),
        }
    }

    /// `(batch_size, n_batches, mc_iterations)`.
    pub fn sizes(self) -> (usize, usize, usize) {
        match self {
            Profile::Desk => (500, 40, 20),
            Profile::Full => (5_000, 100, 100),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::full()
    }
}

pub fn default_policies() -> Vec<PolicyKind> {
    vec![
        PolicyKind::ThompsonSampling,
        PolicyKind::Ucb { ucb_beta: 1.0 },
        PolicyKind::EpsilonGreedy { epsilon: 0.1 },
        PolicyKind::Greedy,
        PolicyKind::Random,
    ]
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        Self::with_profile(Profile::Desk)
    }

    pub fn full() -> Self {
        Self::with_profile(Profile::Full)
    }

    pub fn with_profile(profile: Profile) -> Self {
        let (batch_size, n_batches, mc_iterations) = profile.sizes();
        Self {
            world: WorldConfig::default(),
            actions: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            capacity_profile: vec![0.2; 5],
            w: 3.0,
            rbf: RbfConfig::default(),
            architecture: Architecture::default(),
            training: TrainConfig::default(),
            history_customers: 20_000,
            prior_scale: 1.0,
            beta: 0.5,
            safeguards: Safeguards::default(),
            policies: default_policies(),
            batch_size,
            n_batches,
            mc_iterations,
            start: StartMode::Warm,
            warm_source: WarmSource::default(),
            abv_denominator: AbvDenominator::Engaged,
            final_window: 10,
            solver: SolverOptions::default(),
            seed: 2024,
        }
    }

    pub fn apply_profile(&mut self, profile: Profile) {
        let (b, n, m) = profile.sizes();
        self.batch_size = b;
        self.n_batches = n;
        self.mc_iterations = m;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 || self.n_batches == 0 || self.mc_iterations == 0 {
            return bad("batch_size, n_batches and mc_iterations must all be >= 1".into());
        }
        let actions = depths(&self.actions)?;
        if actions.is_empty() {
            return bad("action set is empty".into());
        }
        if actions.windows(2).any(|w| w[0].value() >= w[1].value()) {
            return bad("actions must be strictly increasing".into());
        }
        if self.capacity_profile.len() != actions.len() {
            return bad(format!(
                "capacity_profile has {} entries for {} actions",
                self.capacity_profile.len(),
                actions.len()
            ));
        }
        if self.capacity_profile.iter().any(|p| !(*p >= 0.0)) {
            return bad("capacity_profile entries must be >= 0".into());
        }
        if !(self.w >= 0.0) || !(self.prior_scale > 0.0) || !(self.beta >= 0.0) {
            return bad("w and beta must be >= 0 and prior_scale > 0".into());
        }
        if self.architecture.n_features != self.world.n_features {
            return bad(format!(
                "embedding expects {} features but the world generates {}",
                self.architecture.n_features, self.world.n_features
            ));
        }
        if self.history_customers == 0 {
            return bad("history_customers must be >= 1".into());
        }
        if self.policies.is_empty() {
            return bad("no policies configured".into());
        }
        if let WarmSource::Campaign { batches: 0 } = self.warm_source {
            if self.start == StartMode::Warm {
                return bad("warm start needs a campaign of at least one batch".into());
            }
        }
        self.architecture.validate()?;
        self.world.validate()
    }

    pub fn depths(&self) -> Result<Vec<DiscountDepth>> {
        depths(&self.actions)
    }

    pub fn posterior_dim(&self) -> usize {
        composed_dim(self.architecture.embedding_dim(), self.rbf.dim())
    }
}

/// Mixes a base seed with stream tags into an independent 64-bit seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(splitmix(base), |acc, &t| splitmix(acc ^ splitmix(t)))
}

const STREAM_HISTORY: u64 = 1;
const STREAM_CUSTOMERS: u64 = 2;
const STREAM_WARM: u64 = 3;
const STREAM_POLICY: u64 = 4;
const STREAM_EVAL: u64 = 5;

fn rng_for(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// Everything shared by the Monte Carlo iterations of one experiment.
#[derive(Debug, Clone)]
pub struct Setup {
    pub world: SyntheticWorld,
    pub embedding: EmbeddingModel,
    pub embedding_losses: Vec<f64>,
    pub engagement: Vec<f64>,
    pub actions: Vec<DiscountDepth>,
    warm_checkpoint: Option<PosteriorState>,
}

/// `(x, ln F)` for every engaged event.
pub fn log_training_rows(log: &[ReplayEvent]) -> Vec<(CustomerFeatures, f64)> {
    log.iter()
        .filter(|e| e.engaged)
        .map(|e| (e.customer.clone(), e.full_price_value.ln()))
        .collect()
}

impl Setup {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let world = SyntheticWorld::generate(config.world.clone())?;
        let actions = config.depths()?;
        let mut rng = rng_for(config.seed, &[STREAM_HISTORY]);
        let history = generate_log(&world, config.history_customers, &actions, &mut rng)?;
        let engagement = engagement_rates(&history, &actions)?;
        let rows = log_training_rows(&history);
        let trained = train_embedding_model(&rows, &config.architecture, &config.training)?;
        let warm_checkpoint = match (&config.start, &config.warm_source) {
            (StartMode::Warm, WarmSource::Checkpoint { path }) => {
                let p = PosteriorState::load(path)?;
                if p.dim() != config.posterior_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: config.posterior_dim(),
                        actual: p.dim(),
                    });
                }
                Some(p)
            }
            _ => None,
        };
        Ok(Self {
            world,
            embedding: trained.model,
            embedding_losses: trained.epoch_losses,
            engagement,
            actions,
            warm_checkpoint,
        })
    }

    fn agent(&self, config: &ExperimentConfig, policy: PolicyKind, posterior: PosteriorState) -> Agent {
        Agent {
            embedding: self.embedding.clone(),
            rbf: config.rbf.clone(),
            actions: self.actions.clone(),
            engagement: self.engagement.clone(),
            capacity_profile: config.capacity_profile.clone(),
            w: config.w,
            policy,
            posterior,
            solver: config.solver,
        }
    }

    fn prior(&self, config: &ExperimentConfig) -> Result<PosteriorState> {
        Ok(PosteriorState::new(config.posterior_dim(), config.prior_scale, config.beta)?.with_safeguards(config.safeguards))
    }

    /// Posterior trained on the engaged rows of a log.
    pub fn posterior_from_log(&self, config: &ExperimentConfig, log: &[ReplayEvent]) -> Result<PosteriorState> {
        let mut agent = self.agent(config, PolicyKind::Greedy, self.prior(config)?);
        let xs: Vec<CustomerFeatures> = log.iter().filter(|e| e.engaged).map(|e| e.customer.clone()).collect();
        let ctx = agent.embed(&xs)?;
        let outcomes: Vec<_> = log
            .iter()
            .filter(|e| e.engaged)
            .zip(&ctx)
            .map(|(e, c)| (c, e.depth, e.full_price_value))
            .collect();
        agent.observe(&outcomes)?;
        Ok(agent.posterior)
    }

    /// Starting posterior for Monte Carlo iteration `m`.
    pub fn initial_posterior(&self, config: &ExperimentConfig, m: usize) -> Result<PosteriorState> {
        match config.start {
            StartMode::Cold => self.prior(config),
            StartMode::Warm => match (&config.warm_source, &self.warm_checkpoint) {
                (_, Some(p)) => {
                    let mut p = p.clone();
                    p.set_beta(config.beta)?;
                    Ok(p)
                }
                (WarmSource::Campaign { batches }, None) => {
                    let mut rng = rng_for(config.seed, &[STREAM_WARM, m as u64]);
                    let log = generate_log(&self.world, batches * config.batch_size, &self.actions, &mut rng)?;
                    self.posterior_from_log(config, &log)
                }
                (WarmSource::Checkpoint { .. }, None) => unreachable!("checkpoint loaded in Setup::build"),
            },
        }
    }

    fn batch_customers(&self, config: &ExperimentConfig, rng: &mut ChaCha8Rng, b: usize) -> Vec<crate::environment::SimCustomer> {
        self.world
            .sample_customers((b * config.batch_size) as u64, config.batch_size, rng)
    }
}

/// ABV of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Abv {
    pub value: f64,
    /// No customer in the denominator; `value` is 0.
    pub empty: bool,
}

/// Mean discounted basket value `F (1 - a)` over the chosen denominator.
/// Customers without a depth are ignored.
pub fn compute_abv(outcomes: &[(DiscountDepth, Outcome)], denominator: AbvDenominator) -> Abv {
    let mut total = 0.0;
    let mut n = 0usize;
    for (a, o) in outcomes {
        if o.engaged {
            total += o.full_price_value * (1.0 - a.value());
        }
        if o.engaged || denominator == AbvDenominator::Allocated {
            n += 1;
        }
    }
    if n == 0 {
        Abv { value: 0.0, empty: true }
    } else {
        Abv {
            value: total / n as f64,
            empty: false,
        }
    }
}

/// One policy's trajectory in one Monte Carlo iteration.
#[derive(Debug, Clone, PartialEq)]
struct Trajectory {
    abv: Vec<f64>,
    empty: usize,
    engaged_updates: usize,
    observations: u64,
}

enum Runner {
    Standard(PolicyKind),
    /// Constrained consumer harvesting rewards, unconstrained learner updating the posterior.
    Ulcc,
}

fn run_trajectory(setup: &Setup, config: &ExperimentConfig, runner: &Runner, m: usize, stream: u64) -> Result<Trajectory> {
    let start = setup.initial_posterior(config, m)?;
    let initial_obs = start.n_observations();
    let policy = match runner {
        Runner::Standard(p) => *p,
        Runner::Ulcc => PolicyKind::ThompsonSampling,
    };
    let mut agent = setup.agent(config, policy, start);
    let mut customers_rng = rng_for(config.seed, &[STREAM_CUSTOMERS, m as u64]);
    let mut rng = rng_for(config.seed, &[STREAM_POLICY, stream, m as u64]);
    let mut traj = Trajectory {
        abv: Vec::with_capacity(config.n_batches),
        empty: 0,
        engaged_updates: 0,
        observations: 0,
    };
    for b in 0..config.n_batches {
        let batch = setup.batch_customers(config, &mut customers_rng, b);
        let xs: Vec<CustomerFeatures> = batch.iter().map(|c| c.features.clone()).collect();
        let contexts = agent.embed(&xs)?;
        let outcome_of = |j: usize, a: DiscountDepth| setup.world.outcome_with(&batch[j].features, a, &batch[j].latent);

        let (harvest, learn) = match runner {
            Runner::Standard(_) => {
                let assignment = agent.allocate(&contexts, &mut rng)?;
                let mut harvest = Vec::with_capacity(batch.len());
                for j in 0..batch.len() {
                    if let Some(a) = assignment.depth(j) {
                        harvest.push((j, a, outcome_of(j, a)?));
                    }
                }
                (harvest.clone(), harvest)
            }
            Runner::Ulcc => ulcc_step(&agent, &contexts, &mut rng, &outcome_of)?,
        };
        let pairs: Vec<(DiscountDepth, Outcome)> = harvest.iter().map(|(_, a, o)| (*a, *o)).collect();
        let abv = compute_abv(&pairs, config.abv_denominator);
        traj.empty += abv.empty as usize;
        traj.abv.push(abv.value);
        let updates: Vec<(&ContextEmbedding, DiscountDepth, f64)> =
            learn.iter().map(|(j, a, o)| (&contexts[*j], *a, o.full_price_value)).collect();
        traj.engaged_updates += agent.observe(&updates)?;
    }
    traj.observations = agent.posterior.n_observations() - initial_obs;
    Ok(traj)
}

type Step = Vec<(usize, DiscountDepth, Outcome)>;

/// One batch of the ULCC agent: returns the consumer's harvested outcomes and
/// the learner's counterfactual outcomes.
fn ulcc_step<R, F>(agent: &Agent, contexts: &[ContextEmbedding], rng: &mut R, outcome_of: &F) -> Result<(Step, Step)>
where
    R: Rng + ?Sized,
    F: Fn(usize, DiscountDepth) -> Result<Outcome>,
{
    let scores = ts_scores(&agent.posterior, contexts, &agent.actions, &agent.rbf, rng)?;
    let caps = agent.capacities(contexts.len())?;
    let problem = crate::allocator::AllocationProblem::new(scores, agent.w, agent.engagement.clone(), caps)?;
    let consumer = crate::allocator::solve_with(&problem, agent.solver);
    let mut harvest = Vec::new();
    let mut learn = Vec::new();
    for j in 0..contexts.len() {
        if let Some(a) = consumer.depth(j) {
            harvest.push((j, a, outcome_of(j, a)?));
        }
        let best = (0..agent.actions.len())
            .map(|k| {
                let c = objective_coefficient(problem.scores().get(j, k), agent.actions[k], agent.w, agent.engagement[k]);
                (c, k)
            })
            .fold(None, |acc: Option<(f64, usize)>, (c, k)| match acc {
                Some((bc, _)) if bc >= c => acc,
                _ => Some((c, k)),
            });
        if let Some((c, k)) = best {
            if c > 0.0 {
                let a = agent.actions[k];
                learn.push((j, a, outcome_of(j, a)?));
            }
        }
    }
    Ok((harvest, learn))
}

/// Per-batch ABV of one policy across Monte Carlo iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub policy: String,
    /// `raw[iteration][batch]`.
    pub raw: Vec<Vec<f64>>,
    /// `raw` divided by the Random policy's Monte Carlo mean for the same batch.
    pub scaled: Vec<Vec<f64>>,
    pub mean_raw: Vec<f64>,
    pub mean_scaled: Vec<f64>,
    /// Standard error of the scaled ABV across iterations.
    pub se_scaled: Vec<f64>,
    /// Batches (over all iterations) whose ABV denominator was empty.
    pub empty_batches: usize,
    /// Engaged outcomes fed to the posterior, per iteration.
    pub engaged_updates: Vec<usize>,
    /// Posterior observations gained during the run, per iteration.
    pub observations: Vec<u64>,
}

impl LearningCurve {
    fn from_trajectories(policy: &str, trajs: Vec<Trajectory>, baseline: &[f64]) -> Self {
        let n_batches = baseline.len();
        let raw: Vec<Vec<f64>> = trajs.iter().map(|t| t.abv.clone()).collect();
        let scaled: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| r.iter().zip(baseline).map(|(v, b)| v / b).collect())
            .collect();
        let column = |m: &Vec<Vec<f64>>, b: usize| -> Vec<f64> { m.iter().map(|r| r[b]).collect() };
        Self {
            policy: policy.to_string(),
            mean_raw: (0..n_batches).map(|b| stats::mean(&column(&raw, b))).collect(),
            mean_scaled: (0..n_batches).map(|b| stats::mean(&column(&scaled, b))).collect(),
            se_scaled: (0..n_batches).map(|b| stats::standard_error(&column(&scaled, b))).collect(),
            empty_batches: trajs.iter().map(|t| t.empty).sum(),
            engaged_updates: trajs.iter().map(|t| t.engaged_updates).collect(),
            observations: trajs.iter().map(|t| t.observations).collect(),
            raw,
            scaled,
        }
    }

    pub fn n_batches(&self) -> usize {
        self.mean_raw.len()
    }

    /// Per-iteration mean scaled ABV over the last `window` batches.
    pub fn final_window_scaled(&self, window: usize) -> Vec<f64> {
        let n = self.n_batches();
        let from = n - window.clamp(1, n);
        self.scaled.iter().map(|r| stats::mean(&r[from..])).collect()
    }

    /// Per-iteration mean raw ABV over all batches.
    pub fn overall_raw(&self) -> Vec<f64> {
        self.raw.iter().map(|r| stats::mean(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub final_mean_scaled: f64,
    pub final_se_scaled: f64,
    pub overall_mean_raw: f64,
}

/// Paired comparison of final-window scaled ABV across iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub policy: String,
    pub baseline: String,
    pub test: TTest,
}

/// One row of the curves table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub iteration: usize,
    pub batch: usize,
    pub policy: String,
    pub raw_abv: f64,
    pub scaled_abv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub curves: Vec<LearningCurve>,
    pub summary: Vec<PolicySummary>,
    /// Every policy against every other, `policy - baseline`.
    pub comparisons: Vec<Comparison>,
    pub engagement: Vec<f64>,
    pub embedding_losses: Vec<f64>,
    pub final_window: usize,
}

impl ExperimentResult {
    pub fn curve(&self, policy: &str) -> Option<&LearningCurve> {
        self.curves.iter().find(|c| c.policy == policy)
    }

    pub fn comparison(&self, policy: &str, baseline: &str) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.policy == policy && c.baseline == baseline)
    }

    /// Rows ordered by iteration, batch, then configured policy order.
    pub fn records(&self) -> Vec<CurveRecord> {
        let Some(first) = self.curves.first() else { return Vec::new() };
        let mut out = Vec::new();
        for m in 0..first.raw.len() {
            for b in 0..first.n_batches() {
                for c in &self.curves {
                    out.push(CurveRecord {
                        iteration: m,
                        batch: b,
                        policy: c.policy.clone(),
                        raw_abv: c.raw[m][b],
                        scaled_abv: c.scaled[m][b],
                    });
                }
            }
        }
        out
    }
}

fn run_runners(setup: &Setup, config: &ExperimentConfig, runners: &[(String, Runner)]) -> Result<Vec<Vec<Trajectory>>> {
    // per iteration, per runner
    let per_iter: Vec<Vec<Trajectory>> = (0..config.mc_iterations)
        .into_par_iter()
        .map(|m| {
            runners
                .iter()
                .enumerate()
                .map(|(r, (_, runner))| run_trajectory(setup, config, runner, m, r as u64))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..runners.len())
        .map(|r| per_iter.iter().map(|it| it[r].clone()).collect())
        .collect())
}

fn baseline_means(trajs: &[Trajectory], n_batches: usize) -> Result<Vec<f64>> {
    (0..n_batches)
        .map(|b| {
            let col: Vec<f64> = trajs.iter().map(|t| t.abv[b]).collect();
            let m = stats::mean(&col);
            if m > 0.0 {
                Ok(m)
            } else {
                Err(Error::Numerical(format!("random baseline ABV is zero in batch {b}")))
            }
        })
        .collect()
}

fn unique_labels(policies: &[PolicyKind]) -> Vec<(String, PolicyKind)> {
    let mut out: Vec<(String, PolicyKind)> = Vec::new();
    for p in policies {
        let base = p.label().to_string();
        let mut label = base.clone();
        let mut n = 2;
        while out.iter().any(|(l, _)| *l == label) {
            label = format!("{base}#{n}");
            n += 1;
        }
        out.push((label, *p));
    }
    out
}

/// Runs every configured policy; Random is added when missing because it
/// defines the scaling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let setup = Setup::build(config)?;
    run_experiment_with(&setup, config)
}

pub fn run_experiment_with(setup: &Setup, config: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut policies = config.policies.clone();
    if !policies.contains(&PolicyKind::Random) {
        policies.push(PolicyKind::Random);
    }
    let labelled = unique_labels(&policies);
    let runners: Vec<(String, Runner)> = labelled.iter().map(|(l, p)| (l.clone(), Runner::Standard(*p))).collect();
    let trajs = run_runners(setup, config, &runners)?;
    let random_idx = policies.iter().position(|p| *p == PolicyKind::Random).expect("added above");
    let baseline = baseline_means(&trajs[random_idx], config.n_batches)?;
    let curves: Vec<LearningCurve> = runners
        .iter()
        .zip(trajs)
        .map(|((label, _), t)| LearningCurve::from_trajectories(label, t, &baseline))
        .collect();
    Ok(summarise(setup, config, curves))
}

fn summarise(setup: &Setup, config: &ExperimentConfig, curves: Vec<LearningCurve>) -> ExperimentResult {
    let window = config.final_window;
    let summary = curves
        .iter()
        .map(|c| {
            let f = c.final_window_scaled(window);
            PolicySummary {
                policy: c.policy.clone(),
                final_mean_scaled: stats::mean(&f),
                final_se_scaled: stats::standard_error(&f),
                overall_mean_raw: stats::mean(&c.overall_raw()),
            }
        })
        .collect();
    let mut comparisons = Vec::new();
    for a in &curves {
        for b in &curves {
            if a.policy != b.policy {
                comparisons.push(Comparison {
                    policy: a.policy.clone(),
                    baseline: b.policy.clone(),
                    test: paired_t_test(&a.final_window_scaled(window), &b.final_window_scaled(window)),
                });
            }
        }
    }
    ExperimentResult {
        curves,
        summary,
        comparisons,
        engagement: setup.engagement.clone(),
        embedding_losses: setup.embedding_losses.clone(),
        final_window: window,
    }
}

/// TS-IP against the Unconstrained Learner, Constrained Consumer benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlccResult {
    pub ts_ip: LearningCurve,
    pub ulcc: LearningCurve,
    pub random: LearningCurve,
    pub mean_ts_ip: f64,
    pub mean_ulcc: f64,
    /// `(mean ULCC - mean TS-IP) / mean ULCC` over all batches and iterations.
    pub degradation: f64,
    /// Same ratio per batch, from Monte Carlo means.
    pub per_batch_degradation: Vec<f64>,
    /// Welch test of first-half against second-half per-batch degradation.
    pub halves: TTest,
    /// Paired test of per-batch mean ABV, ULCC minus TS-IP.
    pub overall: TTest,
}

impl UlccResult {
    pub fn degradation_pct(&self) -> f64 {
        100.0 * self.degradation
    }
}

pub fn run_ulcc(config: &ExperimentConfig) -> Result<UlccResult> {
    let setup = Setup::build(config)?;
    run_ulcc_with(&setup, config)
}

pub fn run_ulcc_with(setup: &Setup, config: &ExperimentConfig) -> Result<UlccResult> {
    let runners = vec![
        ("TS-IP".to_string(), Runner::Standard(PolicyKind::ThompsonSampling)),
        ("TS-ULCC".to_string(), Runner::Ulcc),
        ("Random".to_string(), Runner::Standard(PolicyKind::Random)),
    ];
    let mut trajs = run_runners(setup, config, &runners)?;
    let baseline = baseline_means(&trajs[2], config.n_batches)?;
    let random = LearningCurve::from_trajectories("Random", trajs.pop().unwrap(), &baseline);
    let ulcc = LearningCurve::from_trajectories("TS-ULCC", trajs.pop().unwrap(), &baseline);
    let ts_ip = LearningCurve::from_trajectories("TS-IP", trajs.pop().unwrap(), &baseline);
    let mean_ts_ip = stats::mean(&ts_ip.mean_raw);
    let mean_ulcc = stats::mean(&ulcc.mean_raw);
    let per_batch: Vec<f64> = ulcc
        .mean_raw
        .iter()
        .zip(&ts_ip.mean_raw)
        .map(|(u, t)| (u - t) / u)
        .collect();
    let half = per_batch.len() / 2;
    let halves = if half >= 2 {
        welch_t_test(&per_batch[..half], &per_batch[half..])
    } else {
        TTest {
            mean_difference: f64::NAN,
            t: f64::NAN,
            df: f64::NAN,
            p_value: 1.0,
        }
    };
    Ok(UlccResult {
        overall: paired_t_test(&ulcc.mean_raw, &ts_ip.mean_raw),
        degradation: (mean_ulcc - mean_ts_ip) / mean_ulcc,
        per_batch_degradation: per_batch,
        halves,
        mean_ts_ip,
        mean_ulcc,
        ts_ip,
        ulcc,
        random,
    })
}

/// Mean-curve and monotonicity diagnostics of a reward model trained on a randomised log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityReport {
    pub grid: Vec<f64>,
    /// Mean predicted full-price value across evaluation customers per grid depth.
    pub predicted: Vec<f64>,
    /// Ground-truth mean full-price value for the same customers.
    pub truth: Vec<f64>,
    pub monotonicity_rate: f64,
    pub n_customers: usize,
    pub n_training_events: usize,
}

/// Trains the reward model on a randomised log of `train_customers` over the
/// configured action set and evaluates it on a grid spanning the world's depth range.
pub fn elasticity_study(
    setup: &Setup,
    config: &ExperimentConfig,
    train_customers: usize,
    eval_customers: usize,
    grid_points: usize,
) -> Result<ElasticityReport> {
    let mut rng = rng_for(config.seed, &[STREAM_EVAL, 1]);
    let log = generate_log(&setup.world, train_customers, &setup.actions, &mut rng)?;
    let posterior = setup.posterior_from_log(config, &log)?;
    let [lo, hi] = config.world.depth_range;
    let grid = depth_grid(lo, hi, grid_points)?;
    let xs: Vec<CustomerFeatures> = (0..eval_customers)
        .map(|i| setup.world.sample_features(i as u64, &mut rng))
        .collect();
    let ctx = setup.embedding.extract_embeddings(&xs)?;
    let rows = mean_prediction_grid(&posterior, &ctx, &grid, &config.rbf)?;
    let predicted = elasticity_curve(&posterior, &ctx, &grid, &config.rbf)?;
    let truth = grid
        .iter()
        .map(|&a| {
            let v: Vec<f64> = xs.iter().map(|x| setup.world.mean_full_price(x, a)).collect::<Result<_>>()?;
            Ok(stats::mean(&v))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ElasticityReport {
        grid: grid.iter().map(|a| a.value()).collect(),
        predicted,
        truth,
        monotonicity_rate: monotone_fraction(&rows),
        n_customers: eval_customers,
        n_training_events: log.iter().filter(|e| e.engaged).count(),
    })
}

/// Predictive-uncertainty curves for a model that only saw deep discounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub grid: Vec<f64>,
    /// Only depths above the cut-off were observed in training.
    pub cutoff: f64,
    pub sd_small: Vec<f64>,
    /// Same, trained on `multiplier` times as much data (a superset).
    pub sd_large: Vec<f64>,
    pub train_customers: usize,
    pub multiplier: usize,
}

impl UncertaintyReport {
    /// Mean SD below and above the cut-off for the smaller training set.
    pub fn region_means(&self) -> (f64, f64) {
        let (mut below, mut above) = (Vec::new(), Vec::new());
        for (a, sd) in self.grid.iter().zip(&self.sd_small) {
            if *a < self.cutoff {
                below.push(*sd);
            } else if *a > self.cutoff {
                above.push(*sd);
            }
        }
        (stats::mean(&below), stats::mean(&above))
    }
}

pub struct UncertaintyStudy {
    pub cutoff: f64,
    pub train_depths: Vec<f64>,
    pub train_customers: usize,
    pub multiplier: usize,
    pub eval_customers: usize,
    pub grid_points: usize,
    pub n_samples: usize,
}

impl Default for UncertaintyStudy {
    fn default() -> Self {
        Self {
            cutoff: 0.6,
            train_depths: vec![0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95],
            train_customers: 2_000,
            multiplier: 10,
            eval_customers: 1_000,
            grid_points: 21,
            n_samples: 200,
        }
    }
}

pub fn uncertainty_study(setup: &Setup, config: &ExperimentConfig, study: &UncertaintyStudy) -> Result<UncertaintyReport> {
    let train_actions = depths(&study.train_depths)?;
    if let Some(a) = train_actions.iter().find(|a| a.value() <= study.cutoff) {
        return Err(Error::InvalidConfig(format!(
            "training depth {} is not above the cut-off {}",
            a.value(),
            study.cutoff
        )));
    }
    let mut rng = rng_for(config.seed, &[STREAM_EVAL, 2]);
    let big = generate_log(&setup.world, study.train_customers * study.multiplier, &train_actions, &mut rng)?;
    let small_post = setup.posterior_from_log(config, &big[..study.train_customers])?;
    let large_post = setup.posterior_from_log(config, &big)?;
    let xs: Vec<CustomerFeatures> = (0..study.eval_customers)
        .map(|i| setup.world.sample_features(i as u64, &mut rng))
        .collect();
    let ctx = setup.embedding.extract_embeddings(&xs)?;
    let grid = depth_grid(0.0, 1.0, study.grid_points)?;
    let sd = |p: &PosteriorState| {
        let mut r = rng_for(config.seed, &[STREAM_EVAL, 3]);
        uncertainty_profile(p, &ctx, &grid, &config.rbf, study.n_samples, &mut r)
    };
    Ok(UncertaintyReport {
        grid: grid.iter().map(|a| a.value()).collect(),
        cutoff: study.cutoff,
        sd_small: sd(&small_post)?,
        sd_large: sd(&large_post)?,
        train_customers: study.train_customers,
        multiplier: study.multiplier,
    })
}
