//! Single-neuron classification head trained on frozen embeddings.
//!
//! The head outputs `sigmoid(w . x + b)`, read as the likelihood that the
//! presentation is an attack (target 1 = attack, 0 = bona fide). It is the
//! only trained component: the embeddings are read-only inputs.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Label, LabeledDataset};

/// Predictions are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PREDICTION_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("dimension mismatch: head expects {expected}, input has {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("training data must contain both bona fide and attack samples")]
    SingleClassDataset,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid probe head: {0}")]
    InvalidHead(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeHead {
    pub backbone_id: String,
    pub dim: usize,
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl ProbeHead {
    pub fn zeros(backbone_id: &str, dim: usize) -> Self {
        ProbeHead {
            backbone_id: backbone_id.to_owned(),
            dim,
            bias: 0.0,
            weights: vec![0.0; dim],
        }
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.dim == 0 {
            return Err(ProbeError::InvalidHead("dim must be positive".into()));
        }
        if self.weights.len() != self.dim {
            return Err(ProbeError::InvalidHead(format!(
                "dim is {} but {} weights are given",
                self.dim,
                self.weights.len()
            )));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(ProbeError::InvalidHead("non-finite parameter".into()));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f32]) -> Result<(), ProbeError> {
        if x.len() != self.dim {
            return Err(ProbeError::DimMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// `w . x + b`
    pub fn logit(&self, x: &[f32]) -> Result<f64, ProbeError> {
        self.check_input(x)?;
        Ok(self.logit_unchecked(x))
    }

    fn logit_unchecked(&self, x: &[f32]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(w, &v)| w * v as f64)
            .sum::<f64>()
            + self.bias
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("head serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ProbeError> {
        crate::io::write_atomic(path, self.to_json().as_bytes()).map_err(|source| ProbeError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ProbeError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProbeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let head = Self::from_json(&text).map_err(|source| ProbeError::Json {
            path: path.display().to_string(),
            source,
        })?;
        head.validate()?;
        Ok(head)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Attack likelihood for one embedding.
pub fn predict(head: &ProbeHead, x: &[f32]) -> Result<f64, ProbeError> {
    Ok(sigmoid(head.logit(x)?))
}

/// Binary cross-entropy of a prediction against target `truth` (1 = attack).
pub fn bce_loss(prediction: f64, truth: f64) -> f64 {
    let p = prediction.clamp(PREDICTION_EPS, 1.0 - PREDICTION_EPS);
    -(truth * p.ln() + (1.0 - truth) * (1.0 - p).ln())
}

/// Gradient of the BCE loss w.r.t. the head parameters:
/// `d/db = p - y`, `d/dw = (p - y) x`.
pub fn loss_gradient(
    head: &ProbeHead,
    x: &[f32],
    truth: f64,
) -> Result<(Vec<f64>, f64), ProbeError> {
    let residual = predict(head, x)? - truth;
    Ok((x.iter().map(|&v| residual * v as f64).collect(), residual))
}

fn default_lr() -> f64 {
    1e-4
}
fn default_epochs() -> usize {
    50
}
fn default_batch() -> usize {
    128
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            seed: 0,
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_eps: default_eps(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        let bad = |m: &str| Err(ProbeError::InvalidConfig(m.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 2 || !self.batch_size.is_multiple_of(2) {
            return bad("batch_size must be even and at least 2");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

/// Indices into a dataset forming one class-balanced mini-batch: the first
/// half are bona fide samples, the second half attacks.
pub type Batch = Vec<usize>;

/// One epoch of 1:1 class-balanced mini-batches.
///
/// The majority class is shuffled and split into `ceil(n_major / half)`
/// batches (the last one topped up from a fresh shuffle), so every majority
/// sample appears at least once. The minority class is oversampled by
/// concatenating independent shuffles until all batches are filled.
pub fn balanced_batches(
    dataset: &LabeledDataset,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Batch>, ProbeError> {
    if batch_size < 2 || !batch_size.is_multiple_of(2) {
        return Err(ProbeError::InvalidConfig(
            "batch_size must be even and at least 2".into(),
        ));
    }
    let half = batch_size / 2;
    let (mut bona_fide, mut attack) = (Vec::new(), Vec::new());
    for (i, s) in dataset.samples().iter().enumerate() {
        match s.record.label {
            Label::BonaFide => bona_fide.push(i),
            Label::Attack => attack.push(i),
        }
    }
    if bona_fide.is_empty() || attack.is_empty() {
        return Err(ProbeError::SingleClassDataset);
    }
    let n_batches = bona_fide.len().max(attack.len()).div_ceil(half);
    let needed = n_batches * half;
    let bf_stream = cycled_shuffles(&bona_fide, needed, rng);
    let at_stream = cycled_shuffles(&attack, needed, rng);
    Ok(bf_stream
        .chunks(half)
        .zip(at_stream.chunks(half))
        .map(|(b, a)| b.iter().chain(a).copied().collect())
        .collect())
}

fn cycled_shuffles(pool: &[usize], needed: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::with_capacity(needed + pool.len());
    while out.len() < needed {
        let mut round = pool.to_vec();
        round.shuffle(rng);
        out.extend(round);
    }
    out.truncate(needed);
    out
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(config: &TrainConfig, n_params: usize) -> Self {
        Adam {
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
            lr: config.learning_rate,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    fn update<'a>(&mut self, params: impl Iterator<Item = &'a mut f64>, grads: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Trains a zero-initialised head with Adam on balanced mini-batches.
///
/// Each batch contributes the mean gradient of its samples; the epoch loss is
/// the mean of the batch losses measured before each update. Deterministic
/// for a fixed `config.seed`.
pub fn train_head(
    dataset: &LabeledDataset,
    backbone_id: &str,
    config: &TrainConfig,
) -> Result<(ProbeHead, TrainLog), ProbeError> {
    config.validate()?;
    let dim = dataset.dim();
    let mut head = ProbeHead::zeros(backbone_id, dim);
    let mut adam = Adam::new(config, dim + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let samples = dataset.samples();
    let mut grads = vec![0.0; dim + 1];
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let batches = balanced_batches(dataset, config.batch_size, &mut rng)?;
        let mut loss_sum = 0.0;
        for batch in &batches {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = &samples[i];
                let y = s.record.label.target();
                let p = sigmoid(head.logit_unchecked(&s.embedding));
                batch_loss += bce_loss(p, y);
                let r = p - y;
                for (g, &x) in grads.iter_mut().zip(&s.embedding) {
                    *g += r * x as f64;
                }
                grads[dim] += r;
            }
            let n = batch.len() as f64;
            grads.iter_mut().for_each(|g| *g /= n);
            batch_loss /= n;
            if !batch_loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(ProbeError::NonFiniteLoss { epoch });
            }
            loss_sum += batch_loss;
            let ProbeHead { weights, bias, .. } = &mut head;
            adam.update(weights.iter_mut().chain(std::iter::once(bias)), &grads);
        }
        let mean = loss_sum / batches.len() as f64;
        if !mean.is_finite() {
            return Err(ProbeError::NonFiniteLoss { epoch });
        }
        log::debug!("{backbone_id}: epoch {epoch} loss {mean:.6}");
        epoch_losses.push(mean);
    }
    head.validate().map_err(|_| ProbeError::NonFiniteLoss {
        epoch: config.epochs,
    })?;
    let final_loss = *epoch_losses.last().expect("epochs >= 1");
    Ok((
        head,
        TrainLog {
            epoch_losses,
            final_loss,
        },
    ))
}

/// Scores every sample of a dataset.
pub fn predict_all(head: &ProbeHead, dataset: &LabeledDataset) -> Result<Vec<f64>, ProbeError> {
    dataset
        .samples()
        .iter()
        .map(|s| predict(head, &s.embedding))
        .collect()
}
