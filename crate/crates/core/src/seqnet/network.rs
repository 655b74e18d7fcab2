//! Batched forward pass and backpropagation through time.
//!
//! A batch is one `B × D` matrix per timestep. Layer outputs concatenate the
//! forward-direction and reverse-direction hidden states for each timestep.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::params::{BiLstmLayer, LstmWeights, ModelParams};

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

/// Caches in processing order (reversed for the backward direction).
#[derive(Debug, Clone)]
struct DirectionCache {
    steps: Vec<StepCache>,
}

fn direction_forward(
    w: &LstmWeights,
    inputs: &[ArrayView2<f64>],
) -> (Vec<Array2<f64>>, DirectionCache) {
    let batch = inputs[0].nrows();
    let h = w.hidden();
    let mut h_prev = Array2::zeros((batch, h));
    let mut c_prev = Array2::zeros((batch, h));
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        let mut z = x.dot(&w.input);
        z += &h_prev.dot(&w.recurrent);
        z += &w.bias;
        let i = z.slice(s![.., 0..h]).mapv(sigmoid);
        let f = z.slice(s![.., h..2 * h]).mapv(sigmoid);
        let g = z.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
        let o = z.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
        let mut c = &f * &c_prev;
        c += &(&i * &g);
        let tanh_c = c.mapv(f64::tanh);
        let h_new = &o * &tanh_c;
        outputs.push(h_new.clone());
        steps.push(StepCache {
            x: x.to_owned(),
            h_prev: std::mem::replace(&mut h_prev, h_new),
            c_prev: std::mem::replace(&mut c_prev, c),
            i,
            f,
            g,
            o,
            tanh_c,
        });
    }
    (outputs, DirectionCache { steps })
}

/// `d_out[k]` is the loss gradient w.r.t. the hidden output of processing step
/// `k`. Accumulates into `grad` and returns input gradients per step.
fn direction_backward(
    w: &LstmWeights,
    cache: &DirectionCache,
    d_out: &[Array2<f64>],
    grad: &mut LstmWeights,
) -> Vec<Array2<f64>> {
    let h = w.hidden();
    let n = cache.steps.len();
    let batch = d_out[0].nrows();
    let mut dh_next: Array2<f64> = Array2::zeros((batch, h));
    let mut dc_next: Array2<f64> = Array2::zeros((batch, h));
    let mut dx = vec![Array2::zeros((0, 0)); n];
    for k in (0..n).rev() {
        let st = &cache.steps[k];
        let dh = &d_out[k] + &dh_next;
        let mut dz = Array2::zeros((batch, 4 * h));
        let mut dc = Array2::zeros((batch, h));
        Zip::from(&mut dc)
            .and(&dh)
            .and(&st.o)
            .and(&st.tanh_c)
            .and(&dc_next)
            .for_each(|dc, &dh, &o, &tc, &dcn| *dc = dh * o * (1.0 - tc * tc) + dcn);
        Zip::from(dz.slice_mut(s![.., 0..h]))
            .and(&dc)
            .and(&st.g)
            .and(&st.i)
            .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
        Zip::from(dz.slice_mut(s![.., h..2 * h]))
            .and(&dc)
            .and(&st.c_prev)
            .and(&st.f)
            .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
        Zip::from(dz.slice_mut(s![.., 2 * h..3 * h]))
            .and(&dc)
            .and(&st.i)
            .and(&st.g)
            .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
        Zip::from(dz.slice_mut(s![.., 3 * h..4 * h]))
            .and(&dh)
            .and(&st.tanh_c)
            .and(&st.o)
            .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));

        grad.input += &st.x.t().dot(&dz);
        grad.recurrent += &st.h_prev.t().dot(&dz);
        grad.bias += &dz.sum_axis(Axis(0));
        dx[k] = dz.dot(&w.input.t());
        dh_next = dz.dot(&w.recurrent.t());
        dc_next = dc * &st.f;
    }
    dx
}

#[derive(Debug, Clone)]
struct LayerCache {
    forward: DirectionCache,
    backward: DirectionCache,
}

fn layer_forward(layer: &BiLstmLayer, xs: &[ArrayView2<f64>]) -> (Vec<Array2<f64>>, LayerCache) {
    let (fwd_out, fwd_cache) = direction_forward(&layer.forward, xs);
    let reversed: Vec<ArrayView2<f64>> = xs.iter().rev().cloned().collect();
    let (mut bwd_out, bwd_cache) = direction_forward(&layer.backward, &reversed);
    bwd_out.reverse();
    let ys = fwd_out
        .iter()
        .zip(&bwd_out)
        .map(|(a, b)| concatenate![Axis(1), *a, *b])
        .collect();
    (
        ys,
        LayerCache {
            forward: fwd_cache,
            backward: bwd_cache,
        },
    )
}

fn layer_backward(
    layer: &BiLstmLayer,
    cache: &LayerCache,
    dys: &[Array2<f64>],
    grad: &mut BiLstmLayer,
) -> Vec<Array2<f64>> {
    let h = layer.forward.hidden();
    let d_fwd: Vec<Array2<f64>> = dys.iter().map(|d| d.slice(s![.., 0..h]).to_owned()).collect();
    let d_bwd: Vec<Array2<f64>> = dys
        .iter()
        .rev()
        .map(|d| d.slice(s![.., h..2 * h]).to_owned())
        .collect();
    let dx_f = direction_backward(&layer.forward, &cache.forward, &d_fwd, &mut grad.forward);
    let mut dx_b = direction_backward(&layer.backward, &cache.backward, &d_bwd, &mut grad.backward);
    dx_b.reverse();
    dx_f.into_iter().zip(dx_b).map(|(a, b)| a + b).collect()
}

/// Activations kept from a forward pass for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer1: LayerCache,
    masks: Option<Vec<Array2<f64>>>,
    layer2: LayerCache,
    y2: Vec<Array2<f64>>,
    tanh_y2: Vec<Array2<f64>>,
    context: Array2<f64>,
    /// B × T attention weights.
    pub attention: Array2<f64>,
    /// Per-row output probabilities.
    pub probabilities: Array1<f64>,
}

/// Runs the network over a batch. Dropout on the layer-1 outputs is applied
/// (inverted, so inference needs no rescaling) only when `dropout_rng` is given.
pub fn forward_batch<R: Rng>(
    params: &ModelParams,
    steps: &[ArrayView2<f64>],
    dropout_rng: Option<&mut R>,
) -> ForwardCache {
    let (mut y1, layer1) = layer_forward(&params.layer1, steps);
    let p = params.dropout;
    let masks = match dropout_rng {
        Some(rng) if p > 0.0 => {
            let keep = 1.0 / (1.0 - p);
            let masks: Vec<Array2<f64>> = y1
                .iter()
                .map(|y| Array2::from_shape_fn(y.raw_dim(), |_| if rng.gen::<f64>() < p { 0.0 } else { keep }))
                .collect();
            for (y, m) in y1.iter_mut().zip(&masks) {
                *y *= m;
            }
            Some(masks)
        }
        _ => None,
    };
    let views: Vec<ArrayView2<f64>> = y1.iter().map(|y| y.view()).collect();
    let (y2, layer2) = layer_forward(&params.layer2, &views);

    let batch = steps[0].nrows();
    let t = steps.len();
    let tanh_y2: Vec<Array2<f64>> = y2.iter().map(|y| y.mapv(f64::tanh)).collect();
    let mut scores = Array2::zeros((batch, t));
    for (k, ty) in tanh_y2.iter().enumerate() {
        scores.column_mut(k).assign(&ty.dot(&params.attention));
    }
    let mut attention = scores;
    for mut row in attention.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    let mut context = Array2::zeros((batch, params.dims.context()));
    for (k, y) in y2.iter().enumerate() {
        let a = attention.column(k).insert_axis(Axis(1)).to_owned();
        context += &(y * &a);
    }
    let logits = context.dot(&params.output_weights) + params.output_bias[0];
    let probabilities = logits.mapv(sigmoid);
    ForwardCache {
        layer1,
        masks,
        layer2,
        y2,
        tanh_y2,
        context,
        attention,
        probabilities,
    }
}

pub const PROB_EPSILON: f64 = 1e-12;

/// Binary cross-entropy with the probability clamped to `[1e-12, 1 - 1e-12]`.
pub fn loss(probability: f64, label: f64) -> f64 {
    let p = probability.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

pub fn mean_loss(probabilities: &Array1<f64>, labels: &[f64]) -> f64 {
    probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| loss(p, y))
        .sum::<f64>()
        / labels.len() as f64
}

/// Gradients of the batch-mean loss, reusing the activations (and dropout
/// masks) of `cache`.
pub fn backward(params: &ModelParams, cache: &ForwardCache, labels: &[f64]) -> ModelParams {
    let mut grad = params.zeros_like();
    let batch = labels.len();
    let dlogit: Array1<f64> = cache
        .probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - y) / batch as f64)
        .collect();

    grad.output_weights = cache.context.t().dot(&dlogit);
    grad.output_bias[0] = dlogit.sum();
    let dcontext = dlogit
        .view()
        .insert_axis(Axis(1))
        .dot(&params.output_weights.view().insert_axis(Axis(0)));

    let t = cache.y2.len();
    // d loss / d attention weight, per row and timestep
    let mut dalpha = Array2::zeros((batch, t));
    for (k, y) in cache.y2.iter().enumerate() {
        dalpha.column_mut(k).assign(&(&dcontext * y).sum_axis(Axis(1)));
    }
    let weighted: Array1<f64> = (&cache.attention * &dalpha).sum_axis(Axis(1));
    let dscore = &cache.attention * &(&dalpha - &weighted.insert_axis(Axis(1)));

    let mut dy2 = Vec::with_capacity(t);
    for k in 0..t {
        let a = cache.attention.column(k).insert_axis(Axis(1)).to_owned();
        let ds = dscore.column(k).insert_axis(Axis(1)).to_owned();
        grad.attention += &cache.tanh_y2[k].t().dot(&dscore.column(k));
        let mut d = &dcontext * &a;
        let through_tanh = cache.tanh_y2[k].mapv(|v| 1.0 - v * v)
            * &params.attention.view().insert_axis(Axis(0))
            * &ds;
        d += &through_tanh;
        dy2.push(d);
    }

    let mut dy1 = layer_backward(&params.layer2, &cache.layer2, &dy2, &mut grad.layer2);
    if let Some(masks) = &cache.masks {
        for (d, m) in dy1.iter_mut().zip(masks) {
            *d *= m;
        }
    }
    layer_backward(&params.layer1, &cache.layer1, &dy1, &mut grad.layer1);
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqnet::params::ModelDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type NoRng = ChaCha8Rng;

    #[test]
    fn loss_examples() {
        assert!(loss(1.0, 1.0) < 1e-11);
        assert!((loss(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss(0.5, 1.0) - 0.693_147_180_559_945_3).abs() < 1e-12);
        assert!((loss(0.9, 0.0) - 2.302_585_092_994_046).abs() < 1e-9);
        assert!(loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn zero_weights_give_sigmoid_bias_and_even_attention() {
        let mut p = ModelParams::zeros(ModelDims::new(3, 2, 2), 0.0);
        p.output_bias[0] = 0.7;
        let x = Array2::from_shape_vec((1, 3), vec![0.5, -1.0, 2.0]).unwrap();
        let c = forward_batch::<NoRng>(&p, &[x.view(), x.view()], None);
        assert!((c.probabilities[0] - sigmoid(0.7)).abs() < 1e-15);
        assert_eq!(c.attention.row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn output_bias_gradient_is_residual() {
        let dims = ModelDims::new(4, 3, 2);
        let p = ModelParams::init(dims, 0.0, &mut ChaCha8Rng::seed_from_u64(5));
        let x0 = Array2::from_shape_vec((1, 4), vec![0.1, 0.2, -0.3, 0.4]).unwrap();
        let x1 = Array2::from_shape_vec((1, 4), vec![-0.5, 0.0, 0.3, 0.9]).unwrap();
        let c = forward_batch::<NoRng>(&p, &[x0.view(), x1.view()], None);
        for y in [0.0, 1.0] {
            let g = backward(&p, &c, &[y]);
            assert!((g.output_bias[0] - (c.probabilities[0] - y)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_input_zero_recurrent_gives_zero_input_gradients() {
        let dims = ModelDims::new(4, 3, 2);
        let mut p = ModelParams::init(dims, 0.0, &mut ChaCha8Rng::seed_from_u64(9));
        for layer in [&mut p.layer1, &mut p.layer2] {
            layer.forward.recurrent.fill(0.0);
            layer.backward.recurrent.fill(0.0);
        }
        let x = Array2::zeros((1, 4));
        let c = forward_batch::<NoRng>(&p, &[x.view(), x.view()], None);
        let g = backward(&p, &c, &[1.0]);
        assert!(g.layer1.forward.input.iter().all(|&v| v == 0.0));
        assert!(g.layer1.backward.input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_rows_are_independent() {
        let dims = ModelDims::new(3, 4, 2);
        let p = ModelParams::init(dims, 0.0, &mut ChaCha8Rng::seed_from_u64(2));
        let a0 = Array2::from_shape_vec((2, 3), vec![0.1, 0.2, 0.3, -1.0, 0.5, 0.0]).unwrap();
        let a1 = Array2::from_shape_vec((2, 3), vec![0.3, -0.2, 0.1, 0.2, 0.2, 0.7]).unwrap();
        let both = forward_batch::<NoRng>(&p, &[a0.view(), a1.view()], None);
        for r in 0..2 {
            let s0 = a0.slice(s![r..r + 1, ..]);
            let s1 = a1.slice(s![r..r + 1, ..]);
            let one = forward_batch::<NoRng>(&p, &[s0, s1], None);
            assert!((one.probabilities[0] - both.probabilities[r]).abs() < 1e-14);
        }
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let dims = ModelDims::new(3, 8, 2);
        let p = ModelParams::init(dims, 0.5, &mut ChaCha8Rng::seed_from_u64(2));
        let x = Array2::from_elem((1, 3), 0.4);
        let eval = forward_batch::<NoRng>(&p, &[x.view(), x.view()], None);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let train = forward_batch(&p, &[x.view(), x.view()], Some(&mut rng));
        assert!(train.masks.is_some());
        assert_ne!(eval.probabilities[0], train.probabilities[0]);
    }
}
