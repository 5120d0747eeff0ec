//! Synthetic ground truth standing in for real customers, logged randomised
//! campaigns, and offline replay evaluation on such logs.
//!
//! Customers have raw features `x ~ N(0, I)`. A hidden map `tanh(M x)` gives the
//! world's own context vector, and the log full-price basket value is linear in
//! the same composed features the agent uses: `ln F = <theta*, [z, psi(a), z (x) psi(a)]> + eps`.
//! The depth part of `theta*` is built as `kappa s(x) g(a)` where `g` is a
//! least-squares fit of a linear ramp in the RBF basis and `s(x) > 0` is a
//! per-customer elasticity, so every customer's mean `F` rises with depth.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::action_encoding::{encode_rbf, DiscountDepth, RbfConfig};
use crate::agent::{engaged_features, Agent};
use crate::embedding::{Activation, Architecture, CustomerFeatures, EmbeddingModel};
use crate::error::{Error, Result};
use crate::reward_model::{compose_slices, dot};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub n_features: usize,
    pub latent_dim: usize,
    /// Standard deviation of each pre-`tanh` latent coordinate.
    pub latent_gain: f64,
    /// Scale of the depth-independent part of `ln F`.
    pub base_scale: f64,
    /// Mean per-customer elasticity `s0`.
    pub elasticity_mean: f64,
    /// Elasticities range over `s0 (1 +/- spread)`; must be below 1.
    pub elasticity_spread: f64,
    /// Increase in `ln F` across the depth range for an average customer.
    pub depth_effect: f64,
    /// Drive the baseline by the first half of the latent coordinates and the
    /// elasticity by the second half, instead of both by all of them.
    pub separate_elasticity: bool,
    /// Share of customers in a segment that responds mainly to deep discounts
    /// (0 disables the segment).
    pub responsive_share: f64,
    /// Extra `ln F` a segment member gains at the deepest depth of `depth_range`.
    pub responsive_effect: f64,
    /// Fraction of the mean linear elasticity a segment member lacks, so the
    /// segment looks unresponsive at shallow depths.
    pub responsive_linear_drop: f64,
    /// Steepness of the soft segment indicator.
    pub responsive_sharpness: f64,
    /// Depths over which mean `F` is guaranteed to increase.
    pub depth_range: [f64; 2],
    /// Standard deviation of the log-normal noise.
    pub noise_sd: f64,
    /// Engagement probability at the shallowest depth of `depth_range`.
    pub engagement_min: f64,
    /// Engagement at the deepest depth divided by engagement at the shallowest.
    pub engagement_ratio: f64,
    pub rbf: RbfConfig,
    pub verify_customers: usize,
    pub verify_points: usize,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_features: 20,
            latent_dim: 6,
            latent_gain: 1.0,
            base_scale: 0.5,
            elasticity_mean: 1.5,
            elasticity_spread: 0.6,
            depth_effect: 1.0,
            separate_elasticity: false,
            responsive_share: 0.0,
            responsive_effect: 1.5,
            responsive_linear_drop: 0.0,
            responsive_sharpness: 4.0,
            depth_range: [0.1, 0.6],
            noise_sd: 0.4,
            engagement_min: 0.15,
            engagement_ratio: 3.0,
            rbf: RbfConfig::default(),
            verify_customers: 1_000,
            verify_points: 101,
            seed: 7,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_features == 0 || self.latent_dim == 0 {
            return bad("world needs at least one raw feature and one latent dimension");
        }
        let [lo, hi] = self.depth_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return bad("depth_range must be an increasing pair inside [0, 1]");
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return bad("noise_sd must be >= 0");
        }
        if !(self.elasticity_mean > 0.0) || !(0.0..1.0).contains(&self.elasticity_spread) {
            return bad("elasticity_mean must be > 0 and elasticity_spread in [0, 1)");
        }
        if !(self.depth_effect > 0.0) || !(self.latent_gain > 0.0) || !(self.base_scale >= 0.0) {
            return bad("depth_effect and latent_gain must be > 0, base_scale >= 0");
        }
        if !(self.engagement_min > 0.0) || !(self.engagement_ratio >= 1.0) {
            return bad("engagement_min must be > 0 and engagement_ratio >= 1");
        }
        if self.engagement_min * self.engagement_ratio >= 1.0 {
            return bad("engagement_min * engagement_ratio must stay below 1");
        }
        if !(0.0..1.0).contains(&self.responsive_share) {
            return bad("responsive_share must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.responsive_linear_drop) {
            return bad("responsive_linear_drop must be in [0, 1)");
        }
        if !(self.responsive_effect >= 0.0) || !(self.responsive_sharpness > 0.0) {
            return bad("responsive_effect must be >= 0 and responsive_sharpness > 0");
        }
        if self.verify_points < 2 {
            return bad("verify_points must be at least 2");
        }
        Ok(())
    }
}

/// Ground-truth customer response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    config: WorldConfig,
    /// Row-major `latent_dim x n_features`.
    latent_map: Vec<f64>,
    /// Unit direction and threshold of the responsive-segment indicator, if enabled.
    segment: Option<(Vec<f64>, f64)>,
    theta_star: Vec<f64>,
    /// Logistic engagement `1 / (1 + exp(-(c0 + c1 a)))`.
    engagement_intercept: f64,
    engagement_slope: f64,
}

/// Per-customer randomness shared across every depth the customer could receive,
/// so outcomes under different depths are coupled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentDraw {
    /// Engagement happens when `u < e(a)`.
    pub u: f64,
    /// Standard-normal log-space noise.
    pub eps: f64,
}

impl LatentDraw {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            u: rng.random(),
            eps: rng.sample(StandardNormal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub engaged: bool,
    /// Full-price basket value; 0 when not engaged.
    pub full_price_value: f64,
}

/// A customer drawn from the world together with their latent randomness.
#[derive(Debug, Clone)]
pub struct SimCustomer {
    pub features: CustomerFeatures,
    pub latent: LatentDraw,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Coefficients `gamma` minimising the squared error of `gamma . psi(a)` against
/// `t^power`, `t` running from 0 to 1 across `[lo, hi]`.
fn fit_curve(rbf: &RbfConfig, lo: f64, hi: f64, power: i32) -> Result<Vec<f64>> {
    let m = rbf.dim();
    let n = 201;
    let mut design = DMatrix::zeros(n, m);
    let mut target = DVector::zeros(n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let a = DiscountDepth::new(lo + (hi - lo) * t)?;
        for (z, v) in encode_rbf(a, rbf).0.into_iter().enumerate() {
            design[(i, z)] = v;
        }
        target[i] = t.powi(power);
    }
    let normal = design.transpose() * &design;
    let rhs = design.transpose() * target;
    let sol = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("RBF basis is singular on the depth range".into()))?;
    Ok(sol.iter().copied().collect())
}

impl SyntheticWorld {
    /// Builds the world and verifies that mean `F` strictly increases along a
    /// grid over `depth_range` for `verify_customers` sampled customers.
    pub fn generate(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (p, q) = (config.latent_dim, config.n_features);
        let m_sd = config.latent_gain / (q as f64).sqrt();
        let normal = Normal::new(0.0, m_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let latent_map: Vec<f64> = (0..p * q).map(|_| rng.sample(normal)).collect();

        let split = if config.separate_elasticity && p >= 2 { p / 2 } else { p };
        let in_base = |j: usize| j < split;
        let in_elastic = |j: usize| split == p || j >= split;
        let n_base = (0..p).filter(|&j| in_base(j)).count();
        let base: Vec<f64> = (0..p)
            .map(|j| {
                let g: f64 = rng.sample(StandardNormal);
                if in_base(j) { config.base_scale * g / (n_base as f64).sqrt() } else { 0.0 }
            })
            .collect();
        // elasticity weights with L1 norm equal to the allowed spread
        let raw: Vec<f64> = (0..p)
            .map(|j| {
                let g: f64 = rng.sample(StandardNormal);
                if in_elastic(j) { g } else { 0.0 }
            })
            .collect();
        let l1: f64 = raw.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        let s0 = config.elasticity_mean;
        let v: Vec<f64> = raw.iter().map(|r| r / l1 * s0 * config.elasticity_spread).collect();

        let [lo, hi] = config.depth_range;
        let gamma = fit_curve(&config.rbf, lo, hi, 1)?;
        let k = config.depth_effect;
        let m = gamma.len();
        let segment = if config.responsive_share > 0.0 {
            let raw: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = dot(&raw, &raw).sqrt();
            let threshold = statrs::distribution::ContinuousCDF::inverse_cdf(
                &statrs::distribution::Normal::standard(),
                1.0 - config.responsive_share,
            );
            Some((raw.iter().map(|v| v / norm).collect::<Vec<f64>>(), threshold))
        } else {
            None
        };
        // segment membership r = (1 + z_seg) / 2 contributes r R convex(a)
        let convex = fit_curve(&config.rbf, lo, hi, 2)?;
        let half_r = 0.5 * config.responsive_effect;
        let half_drop = 0.5 * k * s0 * config.responsive_linear_drop;
        let mut theta_star = base;
        if segment.is_some() {
            theta_star.push(0.0);
        }
        theta_star.extend(gamma.iter().zip(&convex).map(|(g, c)| {
            k * s0 * g + if segment.is_some() { half_r * c - half_drop * g } else { 0.0 }
        }));
        for vj in &v {
            theta_star.extend(gamma.iter().map(|g| k * vj * g));
        }
        if segment.is_some() {
            theta_star.extend(convex.iter().zip(&gamma).map(|(c, g)| half_r * c - half_drop * g));
        }
        let p_all = p + segment.is_some() as usize;
        debug_assert_eq!(theta_star.len(), p_all + m + p_all * m);

        let c1 = (logit(config.engagement_min * config.engagement_ratio) - logit(config.engagement_min)) / (hi - lo);
        let c0 = logit(config.engagement_min) - c1 * lo;
        let world = Self {
            config,
            latent_map,
            segment,
            theta_star,
            engagement_intercept: c0,
            engagement_slope: c1,
        };
        world.verify(&mut rng)?;
        Ok(world)
    }

    fn verify<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<()> {
        let [lo, hi] = self.config.depth_range;
        let n = self.config.verify_points;
        let grid: Vec<DiscountDepth> = (0..n)
            .map(|i| DiscountDepth::new(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect::<Result<_>>()?;
        for c in 0..self.config.verify_customers {
            let x = self.sample_features(c as u64, rng);
            let curve: Vec<f64> = grid.iter().map(|&a| self.log_mean(&x, a)).collect::<Result<_>>()?;
            if let Some(i) = curve.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::InvalidConfig(format!(
                    "mean basket value of verification customer {c} does not increase between depths {} and {}",
                    grid[i].value(),
                    grid[i + 1].value()
                )));
            }
        }
        let e: Vec<f64> = grid.iter().map(|&a| self.engagement(a)).collect();
        if e.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("engagement curve decreases".into()));
        }
        Ok(())
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn n_features(&self) -> usize {
        self.config.n_features
    }

    pub fn sample_features<R: Rng + ?Sized>(&self, id: u64, rng: &mut R) -> CustomerFeatures {
        let values = (0..self.config.n_features)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        CustomerFeatures::new(id, values)
    }

    /// `n` customers with ids `first_id..first_id + n`.
    pub fn sample_customers<R: Rng + ?Sized>(&self, first_id: u64, n: usize, rng: &mut R) -> Vec<SimCustomer> {
        (0..n)
            .map(|i| {
                let features = self.sample_features(first_id + i as u64, rng);
                let latent = LatentDraw::draw(rng);
                SimCustomer { features, latent }
            })
            .collect()
    }

    /// The world's hidden context vector `tanh(M x)`.
    pub fn latent_context(&self, x: &CustomerFeatures) -> Result<Vec<f64>> {
        let q = self.config.n_features;
        if x.values.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                actual: x.values.len(),
            });
        }
        let mut z: Vec<f64> = self
            .latent_map
            .chunks(q)
            .map(|row| dot(row, &x.values).tanh())
            .collect();
        if let Some((dir, threshold)) = &self.segment {
            z.push((self.config.responsive_sharpness * (dot(dir, &x.values) - threshold)).tanh());
        }
        Ok(z)
    }

    /// A network whose embedding is exactly the hidden context `latent_context`,
    /// for experiments that isolate learning from representation error.
    pub fn oracle_embedding(&self) -> Result<EmbeddingModel> {
        let q = self.config.n_features;
        let width = self.config.latent_dim + self.segment.is_some() as usize;
        let arch = Architecture {
            n_features: q,
            layer_sizes: vec![width, 1],
            activation: Activation::Tanh,
        };
        let mut model = EmbeddingModel::zeros(arch)?;
        let mut params = self.latent_map.clone();
        let mut bias = vec![0.0; self.config.latent_dim];
        if let Some((dir, threshold)) = &self.segment {
            let k = self.config.responsive_sharpness;
            params.extend(dir.iter().map(|d| k * d));
            bias.push(-k * threshold);
        }
        params.extend(bias);
        params.extend(std::iter::repeat_n(0.0, width + 1));
        model.set_parameters(&params)?;
        Ok(model)
    }

    /// Noise-free `ln F`.
    pub fn log_mean(&self, x: &CustomerFeatures, a: DiscountDepth) -> Result<f64> {
        let z = self.latent_context(x)?;
        let phi = compose_slices(&z, encode_rbf(a, &self.config.rbf).as_slice())?;
        Ok(dot(&self.theta_star, phi.as_slice()))
    }

    /// Expected `F` given engagement: the log-normal mean `exp(mu + sigma^2 / 2)`.
    pub fn mean_full_price(&self, x: &CustomerFeatures, a: DiscountDepth) -> Result<f64> {
        let s = self.config.noise_sd;
        Ok((self.log_mean(x, a)? + 0.5 * s * s).exp())
    }

    /// Probability that a customer offered depth `a` engages.
    pub fn engagement(&self, a: DiscountDepth) -> f64 {
        let z = self.engagement_intercept + self.engagement_slope * a.value();
        1.0 / (1.0 + (-z).exp())
    }

    /// Outcome under depth `a` given the customer's latent draw.
    pub fn outcome_with(&self, x: &CustomerFeatures, a: DiscountDepth, latent: &LatentDraw) -> Result<Outcome> {
        let mu = self.log_mean(x, a)?;
        if latent.u >= self.engagement(a) {
            return Ok(Outcome {
                engaged: false,
                full_price_value: 0.0,
            });
        }
        Ok(Outcome {
            engaged: true,
            full_price_value: (mu + self.config.noise_sd * latent.eps).exp(),
        })
    }
}

/// Fresh outcome for customer `x` offered depth `a`.
pub fn sample_outcome<R: Rng + ?Sized>(
    world: &SyntheticWorld,
    x: &CustomerFeatures,
    a: DiscountDepth,
    rng: &mut R,
) -> Result<Outcome> {
    let latent = LatentDraw::draw(rng);
    world.outcome_with(x, a, &latent)
}

/// One logged campaign event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EventRecord", into = "EventRecord")]
pub struct ReplayEvent {
    pub customer: CustomerFeatures,
    pub depth: DiscountDepth,
    pub engaged: bool,
    pub full_price_value: f64,
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    id: u64,
    features: Vec<f64>,
    depth: f64,
    engaged: bool,
    full_price_value: f64,
}

impl TryFrom<EventRecord> for ReplayEvent {
    type Error = Error;

    fn try_from(r: EventRecord) -> Result<Self> {
        ReplayEvent::new(CustomerFeatures::new(r.id, r.features), DiscountDepth::new(r.depth)?, r.engaged, r.full_price_value)
    }
}

impl From<ReplayEvent> for EventRecord {
    fn from(e: ReplayEvent) -> Self {
        EventRecord {
            id: e.customer.id,
            features: e.customer.values,
            depth: e.depth.value(),
            engaged: e.engaged,
            full_price_value: e.full_price_value,
        }
    }
}

impl ReplayEvent {
    pub fn new(customer: CustomerFeatures, depth: DiscountDepth, engaged: bool, full_price_value: f64) -> Result<Self> {
        if !full_price_value.is_finite() || full_price_value < 0.0 {
            return Err(Error::Domain(format!("full_price_value {full_price_value} must be finite and >= 0")));
        }
        if engaged != (full_price_value > 0.0) {
            return Err(Error::Domain("full_price_value must be positive exactly when engaged".into()));
        }
        Ok(Self {
            customer,
            depth,
            engaged,
            full_price_value,
        })
    }

    /// `F (1 - a)`, zero when not engaged.
    pub fn discounted_value(&self) -> f64 {
        self.full_price_value * (1.0 - self.depth.value())
    }
}

/// Randomised campaign: each customer gets a uniformly random depth from `actions`.
pub fn generate_log<R: Rng + ?Sized>(
    world: &SyntheticWorld,
    n_customers: usize,
    actions: &[DiscountDepth],
    rng: &mut R,
) -> Result<Vec<ReplayEvent>> {
    if actions.is_empty() {
        return Err(Error::Empty("action set".into()));
    }
    (0..n_customers)
        .map(|i| {
            let x = world.sample_features(i as u64, rng);
            let a = actions[rng.random_range(0..actions.len())];
            let o = sample_outcome(world, &x, a, rng)?;
            ReplayEvent::new(x, a, o.engaged, o.full_price_value)
        })
        .collect()
}

pub const LOG_FORMAT: &str = "dalloc-replay-log";
pub const LOG_VERSION: u32 = 1;

/// First line of a JSONL replay log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub n_features: usize,
    pub actions: Vec<f64>,
    pub n_events: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LogHeader {
    pub fn new(n_features: usize, actions: &[DiscountDepth], n_events: usize, seed: Option<u64>) -> Self {
        Self {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            n_features,
            actions: actions.iter().map(|a| a.value()).collect(),
            n_events,
            seed,
        }
    }

    pub fn depths(&self) -> Result<Vec<DiscountDepth>> {
        crate::action_encoding::depths(&self.actions)
    }
}

pub fn write_log<W: Write>(mut out: W, header: &LogHeader, events: &[ReplayEvent]) -> Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a log, checking the header, every row's feature width, and the event count.
pub fn read_log<R: BufRead>(input: R) -> Result<(LogHeader, Vec<ReplayEvent>)> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Empty("replay log".into()))??;
    let header: LogHeader = serde_json::from_str(&first)?;
    if header.format != LOG_FORMAT || header.version != LOG_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported log format {} v{}",
            header.format, header.version
        )));
    }
    header.depths()?;
    let mut events = Vec::with_capacity(header.n_events);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: ReplayEvent = serde_json::from_str(&line).map_err(|err| Error::InvalidRow {
            index: i,
            reason: err.to_string(),
        })?;
        if e.customer.values.len() != header.n_features {
            return Err(Error::InvalidRow {
                index: i,
                reason: format!("{} features, header says {}", e.customer.values.len(), header.n_features),
            });
        }
        events.push(e);
    }
    if events.len() != header.n_events {
        return Err(Error::InvalidConfig(format!(
            "header announces {} events, found {}",
            header.n_events,
            events.len()
        )));
    }
    Ok((header, events))
}

fn action_index(actions: &[DiscountDepth], a: DiscountDepth) -> Option<usize> {
    actions.iter().position(|&b| b == a)
}

/// Events per action; an event outside the action set is an error.
pub fn action_counts(log: &[ReplayEvent], actions: &[DiscountDepth]) -> Result<Vec<usize>> {
    let mut counts = vec![0; actions.len()];
    for (i, e) in log.iter().enumerate() {
        let k = action_index(actions, e.depth).ok_or_else(|| Error::InvalidRow {
            index: i,
            reason: format!("depth {} is not in the action set", e.depth.value()),
        })?;
        counts[k] += 1;
    }
    Ok(counts)
}

/// Fraction of engaged events per action.
pub fn engagement_rates(log: &[ReplayEvent], actions: &[DiscountDepth]) -> Result<Vec<f64>> {
    let counts = action_counts(log, actions)?;
    let mut engaged = vec![0usize; actions.len()];
    for e in log.iter().filter(|e| e.engaged) {
        engaged[action_index(actions, e.depth).expect("checked by action_counts")] += 1;
    }
    counts
        .iter()
        .zip(&engaged)
        .zip(actions)
        .map(|((&n, &k), a)| {
            if n == 0 {
                Err(Error::MissingAction(a.value()))
            } else {
                Ok(k as f64 / n as f64)
            }
        })
        .collect()
}

/// Downsamples every action to the rarest action's count, keeping log order.
pub fn uniform_resample<R: Rng + ?Sized>(
    log: &[ReplayEvent],
    actions: &[DiscountDepth],
    rng: &mut R,
) -> Result<Vec<ReplayEvent>> {
    let counts = action_counts(log, actions)?;
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingAction(actions[k].value()));
    }
    let target = counts.iter().copied().min().unwrap_or(0);
    let mut keep = vec![false; log.len()];
    for (k, &a) in actions.iter().enumerate() {
        let mut idx: Vec<usize> = log.iter().enumerate().filter(|(_, e)| e.depth == a).map(|(i, _)| i).collect();
        idx.shuffle(rng);
        for &i in &idx[..target] {
            keep[i] = true;
        }
        debug_assert_eq!(idx.len(), counts[k]);
    }
    Ok(log
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(e, _)| e.clone())
        .collect())
}

/// Evaluation sample for one candidate batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBatch {
    pub index: usize,
    pub candidates: usize,
    /// Positions in the log of events whose logged depth matched the intended one.
    pub retained: Vec<usize>,
    pub engaged: usize,
    /// Mean `F (1 - a)` over retained events, non-engaged counting as 0.
    pub mean_value: f64,
    /// Mean `F (1 - a)` over retained engaged events.
    pub abv: f64,
    /// No event was retained; the posterior was left untouched.
    pub empty: bool,
}

impl ReplayBatch {
    pub fn retained_fraction(&self) -> f64 {
        if self.candidates == 0 {
            0.0
        } else {
            self.retained.len() as f64 / self.candidates as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub batches: Vec<ReplayBatch>,
    pub n_events: usize,
    pub n_retained: usize,
    /// Mean `F (1 - a)` over all retained events.
    pub mean_value: f64,
    pub standard_error: f64,
    /// Mean `F (1 - a)` over the whole log, the target for a uniformly random policy.
    pub log_mean_value: f64,
}

/// Batch rejection-sampling replay.
///
/// The log is cut into consecutive candidate batches. For each batch the agent
/// forms its intended allocation (capacities taken from its profile at the
/// batch's size); only events whose logged depth equals the intended depth are
/// kept. Kept engaged events update the agent's posterior before the next batch.
pub fn replay_evaluate<R: Rng + ?Sized>(
    agent: &mut Agent,
    log: &[ReplayEvent],
    batch_size: usize,
    rng: &mut R,
) -> Result<ReplayReport> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    agent.validate()?;
    let mut batches = Vec::new();
    let mut values = Vec::new();
    for (b, chunk) in log.chunks(batch_size).enumerate() {
        let start = b * batch_size;
        let customers: Vec<CustomerFeatures> = chunk.iter().map(|e| e.customer.clone()).collect();
        let contexts = agent.embed(&customers)?;
        let intended = agent.allocate(&contexts, rng)?;
        let mut retained = Vec::new();
        let mut batch_values = Vec::new();
        let mut engaged_values = Vec::new();
        let mut outcomes = Vec::new();
        for (j, e) in chunk.iter().enumerate() {
            if intended.depth(j) == Some(e.depth) {
                retained.push(start + j);
                batch_values.push(e.discounted_value());
                if e.engaged {
                    engaged_values.push(e.discounted_value());
                }
                outcomes.push((&contexts[j], e.depth, e.full_price_value));
            }
        }
        let update = engaged_features(agent, &outcomes)?;
        agent.posterior.update(&update)?;
        values.extend_from_slice(&batch_values);
        batches.push(ReplayBatch {
            index: b,
            candidates: chunk.len(),
            empty: retained.is_empty(),
            engaged: engaged_values.len(),
            mean_value: if batch_values.is_empty() { 0.0 } else { stats::mean(&batch_values) },
            abv: if engaged_values.is_empty() { 0.0 } else { stats::mean(&engaged_values) },
            retained,
        });
    }
    let all: Vec<f64> = log.iter().map(|e| e.discounted_value()).collect();
    Ok(ReplayReport {
        n_events: log.len(),
        n_retained: values.len(),
        mean_value: if values.is_empty() { 0.0 } else { stats::mean(&values) },
        standard_error: if values.len() < 2 { f64::NAN } else { stats::standard_error(&values) },
        log_mean_value: if all.is_empty() { 0.0 } else { stats::mean(&all) },
        batches,
    })
}
