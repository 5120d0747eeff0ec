//! Context embeddings from a small feedforward regressor.
//!
//! The network is trained to predict the log full-price basket value from raw
//! customer features. Its penultimate layer is then used as a compact context
//! vector for the downstream linear reward model.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw customer features, already numeric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerFeatures {
    pub id: u64,
    pub values: Vec<f64>,
}

impl CustomerFeatures {
    pub fn new(id: u64, values: Vec<f64>) -> Self {
        Self { id, values }
    }
}

/// Penultimate-layer activations for one customer.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextEmbedding(pub Vec<f64>);

impl ContextEmbedding {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative(self, z: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
        }
    }
}

/// Layer widths and nonlinearity. The last width must be 1 (the regression output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub n_features: usize,
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            n_features: 20,
            layer_sizes: vec![64, 16, 6, 1],
            activation: Activation::Relu,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::InvalidConfig("network needs at least one input".into()));
        }
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "network needs a hidden layer to embed from and an output layer".into(),
            ));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if *self.layer_sizes.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("output layer must have width 1".into()));
        }
        Ok(())
    }

    /// Width of the penultimate layer, i.e. the embedding dimension.
    pub fn embedding_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }
}

/// Optimiser and regularisation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            dropout_rate: 0.1,
            batch_size: 64,
            epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig("dropout rate must be in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *slot = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

pub const EMBEDDING_FORMAT: &str = "dalloc-embedding";
pub const EMBEDDING_VERSION: u32 = 1;

/// Trained network plus the input standardisation it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    architecture: Architecture,
    layers: Vec<Dense>,
    input_mean: Vec<f64>,
    input_scale: Vec<f64>,
    dropout_rate: f64,
}

/// Activations recorded during a forward pass.
struct Trace {
    /// `pre[l]`: pre-activations of layer `l`.
    pre: Vec<Vec<f64>>,
    /// `post[0]` is the standardised input; `post[l + 1]` the (masked) output of layer `l`.
    post: Vec<Vec<f64>>,
    /// Per hidden layer inverted-dropout multipliers (empty when dropout is off).
    masks: Vec<Vec<f64>>,
}

impl EmbeddingModel {
    /// All weights and biases zero, identity standardisation.
    pub fn zeros(architecture: Architecture) -> Result<Self> {
        architecture.validate()?;
        let mut layers = Vec::with_capacity(architecture.layer_sizes.len());
        let mut fan_in = architecture.n_features;
        for &w in &architecture.layer_sizes {
            layers.push(Dense::zeros(fan_in, w));
            fan_in = w;
        }
        Ok(Self {
            input_mean: vec![0.0; architecture.n_features],
            input_scale: vec![1.0; architecture.n_features],
            architecture,
            layers,
            dropout_rate: 0.0,
        })
    }

    /// He-uniform hidden weights, Glorot-uniform output weights, zero biases.
    pub fn random<R: Rng + ?Sized>(architecture: Architecture, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(architecture)?;
        let n_layers = model.layers.len();
        for (l, layer) in model.layers.iter_mut().enumerate() {
            let limit = if l + 1 == n_layers {
                (6.0 / (layer.inputs + layer.outputs) as f64).sqrt()
            } else {
                (6.0 / layer.inputs as f64).sqrt()
            };
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(model)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn embedding_dim(&self) -> usize {
        self.architecture.embedding_dim()
    }

    pub fn n_features(&self) -> usize {
        self.architecture.n_features
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// Flattened parameters, layer by layer: weights (row-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                actual: params.len(),
            });
        }
        let mut off = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Replaces the stored input standardisation.
    pub fn set_standardization(&mut self, mean: Vec<f64>, scale: Vec<f64>) -> Result<()> {
        for v in [&mean, &scale] {
            if v.len() != self.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_features(),
                    actual: v.len(),
                });
            }
        }
        if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("standardisation scales must be positive".into()));
        }
        self.input_mean = mean;
        self.input_scale = scale;
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_mean.iter().zip(&self.input_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn trace<R: Rng + ?Sized>(&self, x: &[f64], dropout: Option<(f64, &mut R)>) -> Trace {
        let n = self.layers.len();
        let act = self.architecture.activation;
        let mut pre = Vec::with_capacity(n);
        let mut post = Vec::with_capacity(n + 1);
        let mut masks = Vec::new();
        post.push(self.standardize(x));
        let mut dropout = dropout;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.outputs];
            layer.forward(&post[l], &mut z);
            let out = if l + 1 == n {
                z.clone()
            } else {
                let mut h: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
                if let Some((rate, rng)) = dropout.as_mut() {
                    let keep = 1.0 - *rate;
                    let mask: Vec<f64> = (0..h.len())
                        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    for (v, m) in h.iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    masks.push(mask);
                }
                h
            };
            pre.push(z);
            post.push(out);
        }
        Trace { pre, post, masks }
    }

    fn inference_trace(&self, x: &[f64]) -> Trace {
        self.trace::<ChaCha8Rng>(x, None)
    }

    /// Penultimate-layer activations, dropout disabled.
    pub fn extract_embedding(&self, x: &CustomerFeatures) -> Result<ContextEmbedding> {
        self.check_input(&x.values)?;
        let mut t = self.inference_trace(&x.values);
        let idx = self.layers.len() - 1;
        Ok(ContextEmbedding(std::mem::take(&mut t.post[idx])))
    }

    pub fn extract_embeddings(&self, xs: &[CustomerFeatures]) -> Result<Vec<ContextEmbedding>> {
        xs.iter().map(|x| self.extract_embedding(x)).collect()
    }

    /// Full forward pass, dropout disabled.
    pub fn predict_log_basket(&self, x: &CustomerFeatures) -> Result<f64> {
        self.check_input(&x.values)?;
        Ok(self.inference_trace(&x.values).post.last().unwrap()[0])
    }

    /// Accumulates `d loss / d params` for one squared-error term into `grad`.
    fn backprop(&self, trace: &Trace, target: f64, weight: f64, grad: &mut [f64]) -> f64 {
        let n = self.layers.len();
        let act = self.architecture.activation;
        let y_hat = trace.post[n][0];
        let err = y_hat - target;
        // d/dz of weight * err^2
        let mut delta = vec![2.0 * weight * err];

        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0usize, |acc, l| {
                let o = *acc;
                *acc += l.n_params();
                Some(o)
            })
            .collect();

        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let input = &trace.post[l];
            let off = offsets[l];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * layer.inputs..off + (o + 1) * layer.inputs];
                for (g, v) in row.iter_mut().zip(input) {
                    *g += d * v;
                }
                grad[off + layer.weights.len() + o] += d;
            }
            if l == 0 {
                break;
            }
            // propagate into layer l-1 outputs, then through its mask and activation
            let mut prev = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            let z = &trace.pre[l - 1];
            let mask = trace.masks.get(l - 1);
            for (j, p) in prev.iter_mut().enumerate() {
                let m = mask.map_or(1.0, |m| m[j]);
                let h = act.apply(z[j]);
                *p *= m * act.derivative(z[j], h);
            }
            delta = prev;
        }
        weight * err * err
    }

    /// Mean squared error over `rows`, dropout disabled.
    pub fn loss(&self, rows: &[(CustomerFeatures, f64)]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::Empty("loss over empty dataset".into()));
        }
        let mut total = 0.0;
        for (x, y) in rows {
            let p = self.predict_log_basket(x)?;
            total += (p - y) * (p - y);
        }
        Ok(total / rows.len() as f64)
    }

    /// Analytic gradient of [`EmbeddingModel::loss`] with respect to [`EmbeddingModel::parameters`].
    pub fn gradient(&self, rows: &[(CustomerFeatures, f64)]) -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Err(Error::Empty("gradient over empty dataset".into()));
        }
        let mut grad = vec![0.0; self.n_params()];
        let w = 1.0 / rows.len() as f64;
        for (x, y) in rows {
            self.check_input(&x.values)?;
            let t = self.inference_trace(&x.values);
            self.backprop(&t, *y, w, &mut grad);
        }
        Ok(grad)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &Checkpoint::from(self))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        ckpt.into_model()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<Checkpoint>(s)?.into_model()
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: EmbeddingModel,
}

impl From<&EmbeddingModel> for Checkpoint {
    fn from(m: &EmbeddingModel) -> Self {
        Checkpoint {
            format: EMBEDDING_FORMAT.into(),
            version: EMBEDDING_VERSION,
            model: m.clone(),
        }
    }
}

impl Checkpoint {
    fn into_model(self) -> Result<EmbeddingModel> {
        if self.format != EMBEDDING_FORMAT || self.version != EMBEDDING_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let m = self.model;
        m.architecture.validate()?;
        let mut fan_in = m.architecture.n_features;
        if m.layers.len() != m.architecture.layer_sizes.len() {
            return Err(Error::InvalidConfig("checkpoint layer count mismatch".into()));
        }
        for (layer, &w) in m.layers.iter().zip(&m.architecture.layer_sizes) {
            if layer.inputs != fan_in
                || layer.outputs != w
                || layer.weights.len() != fan_in * w
                || layer.bias.len() != w
            {
                return Err(Error::InvalidConfig("checkpoint layer shapes do not chain".into()));
            }
            fan_in = w;
        }
        Ok(m)
    }
}

/// Model together with the per-epoch training loss (dropout-free, full dataset).
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: EmbeddingModel,
    pub epoch_losses: Vec<f64>,
    /// Loss of the constant-zero predictor, `mean(y^2)`.
    pub zero_baseline_loss: f64,
}

fn validate_rows(dataset: &[(CustomerFeatures, f64)], n_features: usize) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset".into()));
    }
    for (i, (x, y)) in dataset.iter().enumerate() {
        if x.values.len() != n_features {
            return Err(Error::InvalidRow {
                index: i,
                reason: format!("{} features, expected {n_features}", x.values.len()),
            });
        }
        if !y.is_finite() {
            return Err(Error::InvalidRow {
                index: i,
                reason: "non-finite target".into(),
            });
        }
        if let Some(j) = x.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRow {
                index: i,
                reason: format!("non-finite feature {j}"),
            });
        }
    }
    Ok(())
}

/// Per-feature mean and standard deviation; constant features get scale 1.
fn standardization(dataset: &[(CustomerFeatures, f64)], n_features: usize) -> (Vec<f64>, Vec<f64>) {
    let n = dataset.len() as f64;
    let mut mean = vec![0.0; n_features];
    for (x, _) in dataset {
        for (m, v) in mean.iter_mut().zip(&x.values) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; n_features];
    for (x, _) in dataset {
        for ((s, v), m) in var.iter_mut().zip(&x.values).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
        .collect();
    (mean, scale)
}

/// Mini-batch Adam on mean squared error with inverted dropout on hidden layers.
pub fn train_embedding_model(
    dataset: &[(CustomerFeatures, f64)],
    architecture: &Architecture,
    hyper: &TrainConfig,
) -> Result<TrainingOutcome> {
    architecture.validate()?;
    hyper.validate()?;
    validate_rows(dataset, architecture.n_features)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = EmbeddingModel::random(architecture.clone(), &mut rng)?;
    let (mean, scale) = standardization(dataset, architecture.n_features);
    model.set_standardization(mean, scale)?;
    model.dropout_rate = hyper.dropout_rate;

    // start the output at the target mean
    let y_mean = dataset.iter().map(|(_, y)| y).sum::<f64>() / dataset.len() as f64;
    model.layers.last_mut().unwrap().bias[0] = y_mean;
    let zero_baseline_loss =
        dataset.iter().map(|(_, y)| y * y).sum::<f64>() / dataset.len() as f64;

    let n_params = model.n_params();
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut params = model.parameters();
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut step = 0i32;
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = &dataset[i];
                let t = if hyper.dropout_rate > 0.0 {
                    model.trace(&x.values, Some((hyper.dropout_rate, &mut rng)))
                } else {
                    model.inference_trace(&x.values)
                };
                model.backprop(&t, *y, w, &mut grad);
            }
            step += 1;
            let bc1 = 1.0 - hyper.beta1.powi(step);
            let bc2 = 1.0 - hyper.beta2.powi(step);
            for k in 0..n_params {
                m1[k] = hyper.beta1 * m1[k] + (1.0 - hyper.beta1) * grad[k];
                m2[k] = hyper.beta2 * m2[k] + (1.0 - hyper.beta2) * grad[k] * grad[k];
                let m_hat = m1[k] / bc1;
                let v_hat = m2[k] / bc2;
                params[k] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
            }
            model.set_parameters(&params)?;
        }
        epoch_losses.push(model.loss(dataset)?);
    }

    Ok(TrainingOutcome {
        model,
        epoch_losses,
        zero_baseline_loss,
    })
}

/// Ordinary (optionally ridge-penalised) least squares with an unpenalised intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Zero-variance columns found during fitting.
    pub constant_columns: Vec<usize>,
}

impl LinearModel {
    pub fn predict(&self, x: &CustomerFeatures) -> Result<f64> {
        if x.values.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                actual: x.values.len(),
            });
        }
        Ok(self.intercept
            + self
                .coefficients
                .iter()
                .zip(&x.values)
                .map(|(c, v)| c * v)
                .sum::<f64>())
    }
}

/// Fits `y ~ intercept + x . beta` minimising squared error plus `ridge * |beta|^2`.
pub fn train_linear_baseline(
    dataset: &[(CustomerFeatures, f64)],
    ridge: f64,
) -> Result<LinearModel> {
    if dataset.is_empty() {
        return Err(Error::Empty("regression dataset".into()));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidConfig("ridge penalty must be finite and >= 0".into()));
    }
    let p = dataset[0].0.values.len();
    validate_rows(dataset, p)?;
    let n = dataset.len();

    let x = DMatrix::from_fn(n, p, |i, j| dataset[i].0.values[j]);
    let y = DVector::from_iterator(n, dataset.iter().map(|(_, y)| *y));
    let x_mean: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let y_mean = y.mean();

    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - x_mean[j]);
    let yc = y.add_scalar(-y_mean);

    let constant_columns: Vec<usize> = (0..p)
        .filter(|&j| {
            let scale = x.column(j).amax().max(1.0);
            xc.column(j).amax() <= 1e-12 * scale
        })
        .collect();
    if !constant_columns.is_empty() && ridge == 0.0 {
        return Err(Error::DegenerateFeatures(constant_columns));
    }

    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += ridge;
    }
    let rhs = xc.transpose() * yc;
    let beta = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular normal equations; add a ridge penalty".into()))?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical("non-finite regression coefficients".into()));
    }
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        intercept,
        coefficients,
        constant_columns,
    })
}
