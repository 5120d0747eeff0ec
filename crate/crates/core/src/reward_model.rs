//! Bayesian log-linear reward model.
//!
//! Context and action features are combined into `[psi1, psi2, psi1 (x) psi2]`
//! and the log full-price basket value is modelled as linear in that vector.
//! The posterior over coefficients is Gaussian with precision `V` and mean
//! `V^-1 B`; `V^-1` is maintained incrementally by rank-one updates.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::action_encoding::ActionEncoding;
use crate::embedding::ContextEmbedding;
use crate::error::{Error, Result};

/// `[psi1, psi2, psi1 (x) psi2]`, interaction block flattened with the context index outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedFeatures(pub Vec<f64>);

impl ComposedFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `d1 + d2 + d1 * d2`.
pub fn composed_dim(context_dim: usize, action_dim: usize) -> usize {
    context_dim + action_dim + context_dim * action_dim
}

/// Concatenates context features, action features and all their pairwise products.
///
/// Interaction entry `(j, z)` sits at offset `d1 + d2 + j * d2 + z`.
pub fn compose_features(psi1: &ContextEmbedding, psi2: &ActionEncoding) -> Result<ComposedFeatures> {
    compose_slices(psi1.as_slice(), psi2.as_slice())
}

pub(crate) fn compose_slices(psi1: &[f64], psi2: &[f64]) -> Result<ComposedFeatures> {
    if psi1.is_empty() || psi2.is_empty() {
        return Err(Error::Domain("cannot compose empty feature blocks".into()));
    }
    let mut out = Vec::with_capacity(composed_dim(psi1.len(), psi2.len()));
    out.extend_from_slice(psi1);
    out.extend_from_slice(psi2);
    for &c in psi1 {
        out.extend(psi2.iter().map(|&a| c * a));
    }
    Ok(ComposedFeatures(out))
}

/// Periodic clean-up of the incrementally maintained inverse. Zero disables a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Safeguards {
    pub resymmetrize_every: u64,
    pub reinvert_every: u64,
}

impl Default for Safeguards {
    fn default() -> Self {
        Self {
            resymmetrize_every: 1_000,
            reinvert_every: 10_000,
        }
    }
}

impl Safeguards {
    pub const NONE: Safeguards = Safeguards {
        resymmetrize_every: 0,
        reinvert_every: 0,
    };
}

/// Sufficient statistics of the Gaussian posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    v_bar: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    b: DVector<f64>,
    beta: f64,
    prior_scale: f64,
    n_observations: u64,
    safeguards: Safeguards,
}

/// A draw from the posterior with its log-space prediction capped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSample {
    pub f_tilde: f64,
    /// Set when `exp` would have exceeded the cap.
    pub capped: bool,
}

/// Largest reward [`predict_reward`] returns.
pub const DEFAULT_REWARD_CAP: f64 = 1e12;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `exp(<theta, phi>)`, capped at [`DEFAULT_REWARD_CAP`].
pub fn predict_reward(theta: &[f64], phi: &ComposedFeatures) -> Result<RewardSample> {
    predict_reward_capped(theta, phi, DEFAULT_REWARD_CAP)
}

pub fn predict_reward_capped(theta: &[f64], phi: &ComposedFeatures, cap: f64) -> Result<RewardSample> {
    if theta.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            actual: phi.len(),
        });
    }
    Ok(exp_capped(dot(theta, phi.as_slice()), cap))
}

#[inline]
pub(crate) fn exp_capped(log_value: f64, cap: f64) -> RewardSample {
    if log_value >= cap.ln() || log_value.is_nan() {
        RewardSample {
            f_tilde: cap,
            capped: true,
        }
    } else {
        RewardSample {
            f_tilde: log_value.exp().max(f64::MIN_POSITIVE),
            capped: false,
        }
    }
}

/// Cached factorisation for repeated draws from one posterior snapshot.
#[derive(Debug, Clone)]
pub struct ThetaSampler {
    mean: DVector<f64>,
    /// Lower-triangular `L` with `L L^T = beta^2 V^-1`; `None` when `beta = 0`.
    factor: Option<DMatrix<f64>>,
}

impl ThetaSampler {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let Some(l) = &self.factor else {
            return self.mean.iter().copied().collect();
        };
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| {
                let row = l.row(i);
                self.mean[i] + (0..=i).map(|j| row[j] * z[j]).sum::<f64>()
            })
            .collect()
    }
}

impl PosteriorState {
    /// Prior precision `prior_scale * I`, zero mean.
    pub fn new(d: usize, prior_scale: f64, beta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("posterior dimension must be >= 1".into()));
        }
        if !(prior_scale > 0.0) || !prior_scale.is_finite() {
            return Err(Error::InvalidConfig("prior scale must be positive".into()));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidConfig("beta must be finite and >= 0".into()));
        }
        Ok(Self {
            v_bar: DMatrix::identity(d, d) * prior_scale,
            v_inv: DMatrix::identity(d, d) / prior_scale,
            b: DVector::zeros(d),
            beta,
            prior_scale,
            n_observations: 0,
            safeguards: Safeguards::default(),
        })
    }

    pub fn with_safeguards(mut self, safeguards: Safeguards) -> Self {
        self.safeguards = safeguards;
        self
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidConfig("beta must be finite and >= 0".into()));
        }
        self.beta = beta;
        Ok(())
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    pub fn n_observations(&self) -> u64 {
        self.n_observations
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.v_bar
    }

    pub fn precision_inverse(&self) -> &DMatrix<f64> {
        &self.v_inv
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// `V^-1 B`.
    pub fn mean(&self) -> DVector<f64> {
        &self.v_inv * &self.b
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Adds a batch of `(features, full-price value)` observations.
    ///
    /// Values must be strictly positive; the model is fit to their natural log.
    /// The whole batch is validated before anything is applied.
    pub fn update(&mut self, batch: &[(ComposedFeatures, f64)]) -> Result<()> {
        for (i, (phi, f)) in batch.iter().enumerate() {
            if phi.len() != self.dim() {
                return Err(Error::InvalidRow {
                    index: i,
                    reason: format!("feature length {} != {}", phi.len(), self.dim()),
                });
            }
            if !(*f > 0.0) || !f.is_finite() {
                return Err(Error::InvalidRow {
                    index: i,
                    reason: format!("reward {f} must be positive and finite"),
                });
            }
            if phi.0.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRow {
                    index: i,
                    reason: "non-finite feature".into(),
                });
            }
        }
        for (phi, f) in batch {
            self.rank_one(phi.as_slice(), f.ln());
        }
        Ok(())
    }

    fn rank_one(&mut self, phi: &[f64], log_reward: f64) {
        let d = self.dim();
        let x = DVector::from_column_slice(phi);
        self.v_bar.ger(1.0, &x, &x, 1.0);
        self.b.axpy(log_reward, &x, 1.0);

        // Sherman-Morrison: (V + x x^T)^-1 = V^-1 - (V^-1 x)(V^-1 x)^T / (1 + x^T V^-1 x)
        let u = &self.v_inv * &x;
        let denom = 1.0 + x.dot(&u);
        self.v_inv.ger(-1.0 / denom, &u, &u, 1.0);
        self.n_observations += 1;

        let n = self.n_observations;
        let sg = self.safeguards;
        if sg.reinvert_every > 0 && n % sg.reinvert_every == 0 {
            if let Some(inv) = self.v_bar.clone().cholesky().map(|c| c.inverse()) {
                self.v_inv = inv;
            }
        } else if sg.resymmetrize_every > 0 && n % sg.resymmetrize_every == 0 {
            for i in 0..d {
                for j in (i + 1)..d {
                    let m = 0.5 * (self.v_inv[(i, j)] + self.v_inv[(j, i)]);
                    self.v_inv[(i, j)] = m;
                    self.v_inv[(j, i)] = m;
                }
            }
        }
    }

    /// Posterior mean and a Cholesky factor of `beta^2 V^-1`.
    ///
    /// A failed factorisation is retried with growing diagonal jitter.
    pub fn sampler(&self) -> Result<ThetaSampler> {
        let mean = self.mean();
        if self.beta == 0.0 {
            return Ok(ThetaSampler { mean, factor: None });
        }
        let d = self.dim();
        let mut cov = &self.v_inv * (self.beta * self.beta);
        cov = (&cov + cov.transpose()) * 0.5;
        let base = cov.diagonal().amax().max(f64::MIN_POSITIVE);
        let mut jitter = 0.0;
        for _ in 0..6 {
            let mut m = cov.clone();
            for i in 0..d {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = m.cholesky() {
                return Ok(ThetaSampler {
                    mean,
                    factor: Some(ch.l()),
                });
            }
            jitter = if jitter == 0.0 { base * 1e-12 } else { jitter * 100.0 };
        }
        Err(Error::Numerical("posterior covariance is not positive definite".into()))
    }

    /// One draw of `theta ~ N(V^-1 B, beta^2 V^-1)`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.sampler()?.draw(rng))
    }

    /// `exp(<mean, phi>)`.
    pub fn mean_prediction(&self, phi: &ComposedFeatures) -> Result<f64> {
        self.check_dim(phi.len())?;
        let mean = self.mean();
        Ok(exp_capped(dot(mean.as_slice(), phi.as_slice()), DEFAULT_REWARD_CAP).f_tilde)
    }

    /// `sqrt(phi^T V^-1 phi)`.
    pub fn confidence_width(&self, phi: &ComposedFeatures) -> Result<f64> {
        self.check_dim(phi.len())?;
        let x = DVector::from_column_slice(phi.as_slice());
        Ok(x.dot(&(&self.v_inv * &x)).max(0.0).sqrt())
    }

    /// Standard deviation of `exp(<theta, phi>)` over `n_samples` posterior draws.
    pub fn predictive_sd<R: Rng + ?Sized>(
        &self,
        phi: &ComposedFeatures,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let sampler = self.sampler()?;
        predictive_sd_with(&sampler, phi, n_samples, rng)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &PosteriorCheckpoint::from(self))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ckpt: PosteriorCheckpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        ckpt.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PosteriorCheckpoint::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<PosteriorCheckpoint>(s)?.try_into()
    }
}

pub(crate) fn predictive_sd_with<R: Rng + ?Sized>(
    sampler: &ThetaSampler,
    phi: &ComposedFeatures,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_samples < 2 {
        return Err(Error::InvalidConfig("predictive SD needs at least 2 samples".into()));
    }
    if phi.len() != sampler.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: sampler.mean.len(),
            actual: phi.len(),
        });
    }
    if sampler.factor.is_none() {
        return Ok(0.0);
    }
    let draws: Vec<f64> = (0..n_samples)
        .map(|_| exp_capped(dot(&sampler.draw(rng), phi.as_slice()), DEFAULT_REWARD_CAP).f_tilde)
        .collect();
    Ok(crate::stats::sample_sd(&draws))
}

pub const POSTERIOR_FORMAT: &str = "dalloc-posterior";
pub const POSTERIOR_VERSION: u32 = 1;

/// On-disk form. Matrices are row-major.
#[derive(Serialize, Deserialize)]
struct PosteriorCheckpoint {
    format: String,
    version: u32,
    d: usize,
    beta: f64,
    prior_scale: f64,
    n_observations: u64,
    safeguards: Safeguards,
    v_bar: Vec<f64>,
    v_inv: Vec<f64>,
    b: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<&PosteriorState> for PosteriorCheckpoint {
    fn from(s: &PosteriorState) -> Self {
        PosteriorCheckpoint {
            format: POSTERIOR_FORMAT.into(),
            version: POSTERIOR_VERSION,
            d: s.dim(),
            beta: s.beta,
            prior_scale: s.prior_scale,
            n_observations: s.n_observations,
            safeguards: s.safeguards,
            v_bar: row_major(&s.v_bar),
            v_inv: row_major(&s.v_inv),
            b: s.b.iter().copied().collect(),
        }
    }
}

impl TryFrom<PosteriorCheckpoint> for PosteriorState {
    type Error = Error;
    fn try_from(c: PosteriorCheckpoint) -> Result<Self> {
        if c.format != POSTERIOR_FORMAT || c.version != POSTERIOR_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        let d = c.d;
        if d == 0 || c.v_bar.len() != d * d || c.v_inv.len() != d * d || c.b.len() != d {
            return Err(Error::InvalidConfig("posterior checkpoint shapes inconsistent".into()));
        }
        let mut state = PosteriorState::new(d, c.prior_scale, c.beta)?;
        state.v_bar = DMatrix::from_row_slice(d, d, &c.v_bar);
        state.v_inv = DMatrix::from_row_slice(d, d, &c.v_inv);
        state.b = DVector::from_vec(c.b);
        state.n_observations = c.n_observations;
        state.safeguards = c.safeguards;
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phi(v: &[f64]) -> ComposedFeatures {
        ComposedFeatures(v.to_vec())
    }

    fn random_obs(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<(ComposedFeatures, f64)> {
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let f = rng.random_range(0.5..5.0);
                (phi(&x), f)
            })
            .collect()
    }

    #[test]
    fn compose_hand_expansion() {
        let c = compose_features(
            &ContextEmbedding(vec![1.0, 2.0]),
            &ActionEncoding(vec![0.5, 1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(
            c.0,
            vec![1.0, 2.0, 0.5, 1.0, 0.0, 0.5, 1.0, 0.0, 1.0, 2.0, 0.0]
        );
        assert_eq!(c.len(), 11);
    }

    #[test]
    fn compose_zero_context_and_dims() {
        let c = compose_features(&ContextEmbedding(vec![0.0; 6]), &ActionEncoding(vec![0.3; 3]))
            .unwrap();
        assert_eq!(c.len(), 27);
        assert_eq!(composed_dim(6, 3), 27);
        assert!(c.0[9..].iter().all(|&v| v == 0.0));
        assert!(compose_features(&ContextEmbedding(vec![]), &ActionEncoding(vec![1.0])).is_err());
        assert!(compose_features(&ContextEmbedding(vec![1.0]), &ActionEncoding(vec![])).is_err());
    }

    #[test]
    fn init_posterior() {
        let s = PosteriorState::new(3, 1.0, 1.0).unwrap();
        assert_eq!(s.precision(), &DMatrix::identity(3, 3));
        assert_eq!(s.b().as_slice(), &[0.0; 3]);
        assert_eq!(s.mean().as_slice(), &[0.0; 3]);
        let s = PosteriorState::new(1, 2.0, 1.0).unwrap();
        assert_eq!(s.precision()[(0, 0)], 2.0);
        assert!(PosteriorState::new(0, 1.0, 1.0).is_err());
        assert!(PosteriorState::new(2, 0.0, 1.0).is_err());
        assert!(PosteriorState::new(2, -1.0, 1.0).is_err());
        assert!(PosteriorState::new(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn one_dimensional_update() {
        let mut s = PosteriorState::new(1, 1.0, 1.0).unwrap();
        s.update(&[(phi(&[1.0]), 2.0)]).unwrap();
        assert_eq!(s.precision()[(0, 0)], 2.0);
        assert!((s.b()[0] - 2f64.ln()).abs() < 1e-12);
        assert!((s.mean()[0] - 2f64.ln() / 2.0).abs() < 1e-12);
        assert!((s.mean()[0] - 0.3466).abs() < 1e-4);
        assert_eq!(s.n_observations(), 1);
    }

    #[test]
    fn empty_batch_is_noop() {
        let mut s = PosteriorState::new(4, 1.0, 1.0).unwrap();
        let before = s.clone();
        s.update(&[]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn update_rejects_bad_rows_atomically() {
        let mut s = PosteriorState::new(2, 1.0, 1.0).unwrap();
        let before = s.clone();
        let err = s.update(&[(phi(&[1.0, 0.0]), 1.0), (phi(&[1.0, 0.0]), 0.0)]);
        assert!(matches!(err, Err(Error::InvalidRow { index: 1, .. })));
        let err = s.update(&[(phi(&[1.0]), 1.0)]);
        assert!(matches!(err, Err(Error::InvalidRow { index: 0, .. })));
        assert_eq!(s, before);
    }

    #[test]
    fn batching_is_irrelevant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let obs = random_obs(2, 5, &mut rng);
        let mut a = PosteriorState::new(5, 1.0, 1.0).unwrap();
        a.update(&obs[..1]).unwrap();
        a.update(&obs[1..]).unwrap();
        let mut b = PosteriorState::new(5, 1.0, 1.0).unwrap();
        b.update(&obs).unwrap();
        assert!((a.precision() - b.precision()).amax() < 1e-10);
        assert!((a.b() - b.b()).amax() < 1e-10);
    }

    #[test]
    fn inverse_tracks_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = PosteriorState::new(6, 1.0, 1.0).unwrap();
        s.update(&random_obs(500, 6, &mut rng)).unwrap();
        let prod = s.precision() * s.precision_inverse();
        assert!((prod - DMatrix::identity(6, 6)).norm() < 1e-8);
    }

    #[test]
    fn zero_beta_sample_is_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s = PosteriorState::new(3, 1.0, 0.0).unwrap();
        s.update(&random_obs(10, 3, &mut rng)).unwrap();
        let theta = s.sample_theta(&mut rng).unwrap();
        assert_eq!(theta.as_slice(), s.mean().as_slice());
    }

    #[test]
    fn fresh_posterior_sample_mean_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = PosteriorState::new(2, 1.0, 1.0).unwrap();
        let sampler = s.sampler().unwrap();
        let n = 10_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let t = sampler.draw(&mut rng);
            acc[0] += t[0] / n as f64;
            acc[1] += t[1] / n as f64;
        }
        assert!(acc[0].abs() < 0.05 && acc[1].abs() < 0.05);
    }

    #[test]
    fn sampling_is_seeded() {
        let s = PosteriorState::new(4, 1.0, 1.0).unwrap();
        let a = s.sample_theta(&mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = s.sample_theta(&mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predict_reward_values() {
        assert_eq!(predict_reward(&[1.0, -1.0], &phi(&[2.0, 2.0])).unwrap().f_tilde, 1.0);
        let r = predict_reward(&[1.0], &phi(&[5f64.ln()])).unwrap();
        assert!((r.f_tilde - 5.0).abs() < 1e-12);
        let r = predict_reward(&[1.0], &phi(&[1e6])).unwrap();
        assert!(r.capped && r.f_tilde == DEFAULT_REWARD_CAP);
        let r = predict_reward(&[1.0], &phi(&[-1e6])).unwrap();
        assert!(r.f_tilde > 0.0);
        assert!(predict_reward(&[1.0, 2.0], &phi(&[1.0])).is_err());
    }

    #[test]
    fn predictive_sd_zero_beta() {
        let s = PosteriorState::new(2, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(s.predictive_sd(&phi(&[1.0, 1.0]), 100, &mut rng).unwrap(), 0.0);
        assert!(s.predictive_sd(&phi(&[1.0, 1.0]), 1, &mut rng).is_err());
    }

    #[test]
    fn predictive_sd_contracts_with_data() {
        let x = phi(&[0.5, 1.0, -0.3]);
        let mut small = PosteriorState::new(3, 1.0, 1.0).unwrap();
        let mut large = small.clone();
        small.update(&vec![(x.clone(), 2.0); 10]).unwrap();
        large.update(&vec![(x.clone(), 2.0); 100]).unwrap();
        let sd_small = small.predictive_sd(&x, 1000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let sd_large = large.predictive_sd(&x, 1000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(sd_large < sd_small, "{sd_large} !< {sd_small}");
    }

    #[test]
    fn confidence_width_fresh_is_norm() {
        let s = PosteriorState::new(3, 1.0, 1.0).unwrap();
        let x = phi(&[3.0, 0.0, 4.0]);
        assert!((s.confidence_width(&x).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut s = PosteriorState::new(5, 2.0, 0.7).unwrap();
        s.update(&random_obs(50, 5, &mut rng)).unwrap();
        let back = PosteriorState::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
