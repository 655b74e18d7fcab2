//! Mini-batch Adam training shared by the sequence model and the feedforward
//! baseline.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, forward_batch, mean_loss};
use super::params::{ModelDims, ModelParams};
use super::{SeqError, TrainingExample};
use crate::evalharness::{classification_report, ClassificationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
    pub patience: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    /// Share of the training examples held out for model selection.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 30,
            batch_size: 64,
            dropout: 0.2,
            seed: 42,
            patience: 5,
            hidden1: 128,
            hidden2: 64,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SeqError> {
        let ok = self.learning_rate > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0
            && self.batch_size > 0
            && (0.0..1.0).contains(&self.dropout)
            && (0.0..1.0).contains(&self.validation_fraction)
            && self.hidden1 > 0
            && self.hidden2 > 0;
        if ok {
            Ok(())
        } else {
            Err(SeqError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// A mini-batch: one `B × D` matrix per timestep.
pub struct Batch {
    pub steps: Vec<Array2<f64>>,
    pub labels: Vec<f64>,
}

impl Batch {
    pub fn gather(examples: &[TrainingExample], indices: &[usize]) -> Self {
        let width = examples[indices[0]].timesteps[0].len();
        let t = examples[indices[0]].timesteps.len();
        let steps = (0..t)
            .map(|k| {
                let mut m = Array2::zeros((indices.len(), width));
                for (r, &i) in indices.iter().enumerate() {
                    m.row_mut(r)
                        .as_slice_mut()
                        .unwrap()
                        .copy_from_slice(&examples[i].timesteps[k]);
                }
                m
            })
            .collect();
        let labels = indices
            .iter()
            .map(|&i| f64::from(examples[i].label))
            .collect();
        Batch { steps, labels }
    }

    pub fn views(&self) -> Vec<ArrayView2<'_, f64>> {
        self.steps.iter().map(|s| s.view()).collect()
    }
}

/// Something the trainer can fit.
pub trait Trainable: Clone {
    /// Batch-mean loss and its gradient, with dropout drawn from `rng`.
    fn loss_and_gradient(&self, batch: &Batch, rng: &mut ChaCha8Rng) -> (f64, Self);
    /// Inference probabilities, dropout off.
    fn predict_batch(&self, batch: &Batch) -> Vec<f64>;
    fn parameters(&self) -> Vec<&[f64]>;
    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;
    fn zeros_like(&self) -> Self;
}

impl Trainable for ModelParams {
    fn loss_and_gradient(&self, batch: &Batch, rng: &mut ChaCha8Rng) -> (f64, Self) {
        let cache = forward_batch(self, &batch.views(), Some(rng));
        let l = mean_loss(&cache.probabilities, &batch.labels);
        (l, backward(self, &cache, &batch.labels))
    }

    fn predict_batch(&self, batch: &Batch) -> Vec<f64> {
        forward_batch::<ChaCha8Rng>(self, &batch.views(), None)
            .probabilities
            .to_vec()
    }

    fn parameters(&self) -> Vec<&[f64]> {
        self.tensors()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.tensors_mut()
    }

    fn zeros_like(&self) -> Self {
        ModelParams::zeros_like(self)
    }
}

/// Adam with bias correction.
pub struct Adam<M> {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: M,
    second: M,
}

impl<M: Trainable> Adam<M> {
    pub fn new(params: &M, config: &TrainConfig) -> Self {
        Adam {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            first: params.zeros_like(),
            second: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut M, grad: &M) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let grads = grad.parameters();
        for (((p, g), m), v) in params
            .parameters_mut()
            .into_iter()
            .zip(grads)
            .zip(self.first.parameters_mut())
            .zip(self.second.parameters_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: ClassificationReport,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

pub fn predict_examples<M: Trainable>(model: &M, examples: &[TrainingExample], batch_size: usize) -> Vec<f64> {
    let idx: Vec<usize> = (0..examples.len()).collect();
    idx.chunks(batch_size.max(1))
        .flat_map(|chunk| model.predict_batch(&Batch::gather(examples, chunk)))
        .collect()
}

fn threshold(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

pub fn check_classes(examples: &[TrainingExample]) -> Result<(), SeqError> {
    if examples.is_empty() {
        return Err(SeqError::EmptyDataset);
    }
    let positives = examples.iter().filter(|e| e.label == 1).count();
    if positives == 0 || positives == examples.len() {
        return Err(SeqError::SingleClassDataset);
    }
    Ok(())
}

/// Seeded split of example indices into (train, validation).
pub fn split_validation(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_val = ((n as f64) * fraction).round() as usize;
    let n_val = n_val.min(n.saturating_sub(1));
    let val = idx[..n_val].to_vec();
    let train = idx[n_val..].to_vec();
    (train, val)
}

/// Fits `model` with shuffled mini-batches and keeps the parameters with the
/// best validation F1 on class 1 (earliest epoch on ties). Validation falls
/// back to the training examples when the split leaves none.
pub fn fit<M: Trainable>(
    mut model: M,
    examples: &[TrainingExample],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(M, TrainingHistory), SeqError> {
    let mut history = TrainingHistory::default();
    if config.epochs == 0 {
        return Ok((model, history));
    }
    let (mut train_idx, val_idx) = split_validation(examples.len(), config.validation_fraction, rng);
    let val_set: Vec<TrainingExample> = if val_idx.is_empty() {
        train_idx.iter().map(|&i| examples[i].clone()).collect()
    } else {
        val_idx.iter().map(|&i| examples[i].clone()).collect()
    };
    let val_labels: Vec<u8> = val_set.iter().map(|e| e.label).collect();

    let mut adam = Adam::new(&model, config);
    let mut best: Option<(f64, M)> = None;
    let mut since_best = 0;
    for epoch in 0..config.epochs {
        train_idx.shuffle(rng);
        let mut total = 0.0;
        for (b, chunk) in train_idx.chunks(config.batch_size).enumerate() {
            let batch = Batch::gather(examples, chunk);
            let (loss, grad) = model.loss_and_gradient(&batch, rng);
            if !loss.is_finite() {
                return Err(SeqError::NonFiniteLoss { epoch, batch: b });
            }
            total += loss * chunk.len() as f64;
            adam.update(&mut model, &grad);
        }
        let train_loss = total / train_idx.len() as f64;
        let preds = threshold(&predict_examples(&model, &val_set, config.batch_size.max(256)));
        let validation = classification_report(&preds, &val_labels)?;
        let f1 = validation.class1.f1.unwrap_or(0.0);
        log::info!(
            "epoch {epoch}: loss {train_loss:.5} val acc {:.4} f1(1) {f1:.4}",
            validation.accuracy
        );
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation,
        });
        if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
            best = Some((f1, model.clone()));
            history.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }
    Ok((best.map(|(_, m)| m).unwrap_or(model), history))
}

/// Trains the bidirectional recurrent model with attention.
pub fn train(
    examples: &[TrainingExample],
    config: &TrainConfig,
) -> Result<(ModelParams, TrainingHistory), SeqError> {
    config.validate()?;
    check_classes(examples)?;
    let width = examples[0].timesteps[0].len();
    if examples
        .iter()
        .any(|e| e.timesteps.iter().any(|s| s.len() != width))
    {
        return Err(SeqError::ShapeMismatch {
            expected: width,
            found: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims = ModelDims::new(width, config.hidden1, config.hidden2);
    let params = ModelParams::init(dims, config.dropout, &mut rng);
    fit(params, examples, config, &mut rng)
}
