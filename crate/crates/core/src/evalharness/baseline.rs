//! Feedforward baseline: both timesteps concatenated into one vector, two
//! ReLU hidden layers, a sigmoid output. Trained with the same loop, loss and
//! optimizer as the sequence model.

use std::path::Path;

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::seqnet::checkpoint::{read_container, scatter, write_container, TensorInfo};
use crate::seqnet::network::mean_loss;
use crate::seqnet::train::{check_classes, fit, Batch, Trainable};
use crate::seqnet::{SeqError, TrainConfig, TrainingExample, TrainingHistory};

pub const BASELINE_MAGIC: &[u8; 4] = b"JRFF";

const TENSOR_NAMES: [&str; 6] = ["hidden1.weights", "hidden1.bias", "hidden2.weights", "hidden2.bias", "output.weights", "output.bias"];

#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array1<f64>,
    pub b3: Array1<f64>,
    pub dropout: f64,
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = 1.0 / (rows as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
}

impl FeedforwardParams {
    pub fn zeros(input: usize, hidden1: usize, hidden2: usize, dropout: f64) -> Self {
        FeedforwardParams {
            w1: Array2::zeros((input, hidden1)),
            b1: Array1::zeros(hidden1),
            w2: Array2::zeros((hidden1, hidden2)),
            b2: Array1::zeros(hidden2),
            w3: Array1::zeros(hidden2),
            b3: Array1::zeros(1),
            dropout,
        }
    }

    pub fn init(input: usize, hidden1: usize, hidden2: usize, dropout: f64, rng: &mut impl Rng) -> Self {
        let w1 = uniform(rng, input, hidden1);
        let w2 = uniform(rng, hidden1, hidden2);
        let w3 = uniform(rng, hidden2, 1).column(0).to_owned();
        FeedforwardParams {
            w1,
            b1: Array1::zeros(hidden1),
            w2,
            b2: Array1::zeros(hidden2),
            w3,
            b3: Array1::zeros(1),
            dropout,
        }
    }

    pub fn input(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> (usize, usize) {
        (self.w1.ncols(), self.w2.ncols())
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
            self.w3.as_slice().unwrap(),
            self.b3.as_slice().unwrap(),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
            self.w3.as_slice_mut().unwrap(),
            self.b3.as_slice_mut().unwrap(),
        ]
    }
}

struct Cache {
    x: Array2<f64>,
    z1: Array2<f64>,
    h1: Array2<f64>,
    mask: Option<Array2<f64>>,
    z2: Array2<f64>,
    h2: Array2<f64>,
    p: Array1<f64>,
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

fn forward(params: &FeedforwardParams, batch: &Batch, rng: Option<&mut ChaCha8Rng>) -> Cache {
    let views = batch.views();
    let x = concatenate(Axis(1), &views).expect("steps share a batch size");
    let z1 = x.dot(&params.w1) + &params.b1;
    let mut h1 = relu(&z1);
    let mask = match rng {
        Some(rng) if params.dropout > 0.0 => {
            let keep = 1.0 - params.dropout;
            let m = Array2::from_shape_simple_fn(h1.raw_dim(), || {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            h1 *= &m;
            Some(m)
        }
        _ => None,
    };
    let z2 = h1.dot(&params.w2) + &params.b2;
    let h2 = relu(&z2);
    let logits = h2.dot(&params.w3) + params.b3[0];
    let p = logits.mapv(|l| 1.0 / (1.0 + (-l).exp()));
    Cache {
        x,
        z1,
        h1,
        mask,
        z2,
        h2,
        p,
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn backward(params: &FeedforwardParams, c: &Cache, labels: &[f64]) -> FeedforwardParams {
    let b = labels.len() as f64;
    let y = Array1::from(labels.to_vec());
    let dlogit = (&c.p - &y) / b;
    let mut g = FeedforwardParams::zeros(params.input(), params.hidden().0, params.hidden().1, params.dropout);
    g.w3 = c.h2.t().dot(&dlogit);
    g.b3[0] = dlogit.sum();
    let dlogit_col = dlogit.view().insert_axis(Axis(1));
    let w3_row = params.w3.view().insert_axis(Axis(0));
    let mut dz2 = dlogit_col.dot(&w3_row);
    dz2.zip_mut_with(&c.z2, |d, &z| {
        if z <= 0.0 {
            *d = 0.0
        }
    });
    g.w2 = standard(c.h1.t().dot(&dz2));
    g.b2 = dz2.sum_axis(Axis(0));
    let mut dz1 = dz2.dot(&params.w2.t());
    if let Some(m) = &c.mask {
        dz1 *= m;
    }
    dz1.zip_mut_with(&c.z1, |d, &z| {
        if z <= 0.0 {
            *d = 0.0
        }
    });
    g.w1 = standard(c.x.t().dot(&dz1));
    g.b1 = dz1.sum_axis(Axis(0));
    g
}

impl Trainable for FeedforwardParams {
    fn loss_and_gradient(&self, batch: &Batch, rng: &mut ChaCha8Rng) -> (f64, Self) {
        let cache = forward(self, batch, Some(rng));
        let l = mean_loss(&cache.p, &batch.labels);
        (l, backward(self, &cache, &batch.labels))
    }

    fn predict_batch(&self, batch: &Batch) -> Vec<f64> {
        forward(self, batch, None).p.to_vec()
    }

    fn parameters(&self) -> Vec<&[f64]> {
        self.tensors()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.tensors_mut()
    }

    fn zeros_like(&self) -> Self {
        let (h1, h2) = self.hidden();
        FeedforwardParams::zeros(self.input(), h1, h2, self.dropout)
    }
}

/// Trains the baseline on the same examples and configuration as the
/// sequence model.
pub fn train_feedforward_baseline(
    examples: &[TrainingExample],
    config: &TrainConfig,
) -> Result<(FeedforwardParams, TrainingHistory), SeqError> {
    config.validate()?;
    check_classes(examples)?;
    let width: usize = examples[0].timesteps.iter().map(Vec::len).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = FeedforwardParams::init(width, config.hidden1, config.hidden2, config.dropout, &mut rng);
    fit(params, examples, config, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    input: usize,
    hidden1: usize,
    hidden2: usize,
    dropout: f64,
    tensors: Vec<TensorInfo>,
}

impl FeedforwardParams {
    pub fn save(&self, path: &Path) -> Result<(), SeqError> {
        let (hidden1, hidden2) = self.hidden();
        let tensors = self.tensors();
        let header = Header {
            kind: "feedforward".into(),
            input: self.input(),
            hidden1,
            hidden2,
            dropout: self.dropout,
            tensors: TENSOR_NAMES
                .iter()
                .zip(&tensors)
                .map(|(n, t)| TensorInfo {
                    name: n.to_string(),
                    len: t.len(),
                })
                .collect(),
        };
        write_container(path, BASELINE_MAGIC, &header, &tensors)
    }

    pub fn load(path: &Path) -> Result<Self, SeqError> {
        let (h, values): (Header, Vec<f64>) = read_container(path, BASELINE_MAGIC)?;
        let mut p = FeedforwardParams::zeros(h.input, h.hidden1, h.hidden2, h.dropout);
        scatter(&h.tensors, &values, p.tensors_mut())?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rng: &mut ChaCha8Rng, b: usize, d: usize) -> Batch {
        let steps = (0..2)
            .map(|_| Array2::from_shape_simple_fn((b, d), || rng.gen_range(-1.0..1.0)))
            .collect();
        let labels = (0..b).map(|i| (i % 2) as f64).collect();
        Batch { steps, labels }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params = FeedforwardParams::init(6, 5, 4, 0.0, &mut rng);
        params.b1.fill(0.05);
        params.b2.fill(0.05);
        let batch = batch(&mut rng, 5, 3);
        let (_, grad) = params.loss_and_gradient(&batch, &mut rng);
        let h = 1e-6;
        let analytic: Vec<f64> = grad.tensors().into_iter().flatten().copied().collect();
        let n = analytic.len();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let mut plus = params.clone();
            let mut minus = params.clone();
            set_flat(&mut plus, k, h);
            set_flat(&mut minus, k, -h);
            let lp = mean_loss(&forward(&plus, &batch, None).p, &batch.labels);
            let lm = mean_loss(&forward(&minus, &batch, None).p, &batch.labels);
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "relative error {worst}");
    }

    fn set_flat(p: &mut FeedforwardParams, mut k: usize, delta: f64) {
        for t in p.tensors_mut() {
            if k < t.len() {
                t[k] += delta;
                return;
            }
            k -= t.len();
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = FeedforwardParams::init(4, 3, 2, 0.1, &mut ChaCha8Rng::seed_from_u64(1));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ff.bin");
        p.save(&path).unwrap();
        assert_eq!(FeedforwardParams::load(&path).unwrap(), p);
        assert!(crate::seqnet::ProgressionModel::load(&path).is_err());
    }

    #[test]
    fn learns_a_separable_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let examples: Vec<TrainingExample> = (0..200)
            .map(|i| {
                let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let label = u8::from(a[0] + b[1] > 0.0);
                TrainingExample {
                    candidate_id: format!("C{i}"),
                    timesteps: [a, b],
                    label,
                }
            })
            .collect();
        let config = TrainConfig {
            learning_rate: 1e-2,
            epochs: 60,
            batch_size: 16,
            hidden1: 16,
            hidden2: 8,
            dropout: 0.0,
            patience: 60,
            validation_fraction: 0.0,
            ..Default::default()
        };
        let (p, _) = train_feedforward_baseline(&examples, &config).unwrap();
        let probs = crate::seqnet::train::predict_examples(&p, &examples, 64);
        let correct = probs
            .iter()
            .zip(&examples)
            .filter(|(p, e)| u8::from(**p >= 0.5) == e.label)
            .count();
        assert!(correct >= 190, "{correct}/200");
    }
}
