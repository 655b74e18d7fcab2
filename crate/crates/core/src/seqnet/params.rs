use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Layer widths. Hidden sizes are per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl ModelDims {
    pub fn new(input: usize, hidden1: usize, hidden2: usize) -> Self {
        ModelDims {
            input,
            hidden1,
            hidden2,
        }
    }

    /// Width of a layer-2 timestep output (both directions).
    pub fn context(&self) -> usize {
        2 * self.hidden2
    }
}

/// One recurrent direction. Gate blocks are laid out as `[input, forget, cell, output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    /// in × 4h
    pub input: Array2<f64>,
    /// h × 4h
    pub recurrent: Array2<f64>,
    /// 4h
    pub bias: Array1<f64>,
}

impl LstmWeights {
    fn zeros(input: usize, hidden: usize) -> Self {
        LstmWeights {
            input: Array2::zeros((input, 4 * hidden)),
            recurrent: Array2::zeros((hidden, 4 * hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut w = Self::zeros(input, hidden);
        fill_uniform(w.input.as_slice_mut().unwrap(), input, rng);
        fill_uniform(w.recurrent.as_slice_mut().unwrap(), hidden, rng);
        w.bias
            .slice_mut(ndarray::s![hidden..2 * hidden])
            .fill(1.0);
        w
    }

    pub fn hidden(&self) -> usize {
        self.recurrent.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer {
    pub forward: LstmWeights,
    pub backward: LstmWeights,
}

impl BiLstmLayer {
    fn zeros(input: usize, hidden: usize) -> Self {
        BiLstmLayer {
            forward: LstmWeights::zeros(input, hidden),
            backward: LstmWeights::zeros(input, hidden),
        }
    }

    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstmLayer {
            forward: LstmWeights::init(input, hidden, rng),
            backward: LstmWeights::init(input, hidden, rng),
        }
    }
}

/// Two stacked bidirectional LSTM layers, a score vector for attention over
/// the layer-2 timestep outputs, and a logistic output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub layer1: BiLstmLayer,
    pub layer2: BiLstmLayer,
    pub attention: Array1<f64>,
    pub output_weights: Array1<f64>,
    pub output_bias: Array1<f64>,
    pub dropout: f64,
}

fn fill_uniform<R: Rng>(values: &mut [f64], fan_in: usize, rng: &mut R) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for v in values {
        *v = rng.gen_range(-bound..bound);
    }
}

pub const TENSOR_NAMES: [&str; 15] = [
    "layer1.forward.input",
    "layer1.forward.recurrent",
    "layer1.forward.bias",
    "layer1.backward.input",
    "layer1.backward.recurrent",
    "layer1.backward.bias",
    "layer2.forward.input",
    "layer2.forward.recurrent",
    "layer2.forward.bias",
    "layer2.backward.input",
    "layer2.backward.recurrent",
    "layer2.backward.bias",
    "attention",
    "output.weights",
    "output.bias",
];

impl ModelParams {
    pub fn zeros(dims: ModelDims, dropout: f64) -> Self {
        ModelParams {
            dims,
            layer1: BiLstmLayer::zeros(dims.input, dims.hidden1),
            layer2: BiLstmLayer::zeros(2 * dims.hidden1, dims.hidden2),
            attention: Array1::zeros(dims.context()),
            output_weights: Array1::zeros(dims.context()),
            output_bias: Array1::zeros(1),
            dropout,
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget-gate bias 1.
    pub fn init<R: Rng>(dims: ModelDims, dropout: f64, rng: &mut R) -> Self {
        let layer1 = BiLstmLayer::init(dims.input, dims.hidden1, rng);
        let layer2 = BiLstmLayer::init(2 * dims.hidden1, dims.hidden2, rng);
        let mut attention = Array1::zeros(dims.context());
        fill_uniform(attention.as_slice_mut().unwrap(), dims.context(), rng);
        let mut output_weights = Array1::zeros(dims.context());
        fill_uniform(output_weights.as_slice_mut().unwrap(), dims.context(), rng);
        ModelParams {
            dims,
            layer1,
            layer2,
            attention,
            output_weights,
            output_bias: Array1::zeros(1),
            dropout,
        }
    }

    /// A zeroed value of the same shape, for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims, self.dropout)
    }

    /// Every tensor as a flat slice, in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(TENSOR_NAMES.len());
        for layer in [&self.layer1, &self.layer2] {
            for dir in [&layer.forward, &layer.backward] {
                out.push(dir.input.as_slice().unwrap());
                out.push(dir.recurrent.as_slice().unwrap());
                out.push(dir.bias.as_slice().unwrap());
            }
        }
        out.push(self.attention.as_slice().unwrap());
        out.push(self.output_weights.as_slice().unwrap());
        out.push(self.output_bias.as_slice().unwrap());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(TENSOR_NAMES.len());
        for layer in [&mut self.layer1, &mut self.layer2] {
            for dir in [&mut layer.forward, &mut layer.backward] {
                out.push(dir.input.as_slice_mut().unwrap());
                out.push(dir.recurrent.as_slice_mut().unwrap());
                out.push(dir.bias.as_slice_mut().unwrap());
            }
        }
        out.push(self.attention.as_slice_mut().unwrap());
        out.push(self.output_weights.as_slice_mut().unwrap());
        out.push(self.output_bias.as_slice_mut().unwrap());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}
