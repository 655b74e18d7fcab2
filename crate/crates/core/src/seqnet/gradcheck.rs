use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{backward, forward_batch, loss};
use super::params::{ModelDims, ModelParams, TENSOR_NAMES};
use super::TrainingExample;

/// Where the worst disagreement between analytic and numeric gradients sits.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub tensor: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub parameters_checked: usize,
}

fn example_steps(example: &TrainingExample) -> Vec<Array2<f64>> {
    example
        .timesteps
        .iter()
        .map(|v| Array2::from_shape_vec((1, v.len()), v.clone()).unwrap())
        .collect()
}

fn example_loss(params: &ModelParams, steps: &[Array2<f64>], label: f64) -> f64 {
    let views: Vec<ArrayView2<f64>> = steps.iter().map(|s| s.view()).collect();
    let c = forward_batch::<ChaCha8Rng>(params, &views, None);
    loss(c.probabilities[0], label)
}

/// Analytic gradients for one example with dropout off.
pub fn analytic_gradients(params: &ModelParams, example: &TrainingExample) -> ModelParams {
    let steps = example_steps(example);
    let views: Vec<ArrayView2<f64>> = steps.iter().map(|s| s.view()).collect();
    let c = forward_batch::<ChaCha8Rng>(params, &views, None);
    backward(params, &c, &[f64::from(example.label)])
}

/// Central-difference check of every parameter against `analytic`.
/// Relative error is `|a - n| / max(|a|, |n|, DENOMINATOR_FLOOR)`.
pub fn gradient_check_with(
    params: &ModelParams,
    example: &TrainingExample,
    h: f64,
    analytic: &ModelParams,
) -> GradCheckReport {
    let steps = example_steps(example);
    let label = f64::from(example.label);
    let mut probe = params.clone();
    let analytic_tensors = analytic.tensors();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        tensor: TENSOR_NAMES[0],
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        parameters_checked: 0,
    };
    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        for i in 0..analytic_tensors[t].len() {
            let original = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = original + h;
            let up = example_loss(&probe, &steps, label);
            probe.tensors_mut()[t][i] = original - h;
            let down = example_loss(&probe, &steps, label);
            probe.tensors_mut()[t][i] = original;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic_tensors[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
            report.parameters_checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.tensor = name;
                report.index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report
}

/// Checks the network's own backward pass. Dropout is ignored.
pub fn gradient_check(params: &ModelParams, example: &TrainingExample, h: f64) -> GradCheckReport {
    let analytic = analytic_gradients(params, example);
    gradient_check_with(params, example, h, &analytic)
}

/// Gradients smaller than this are compared in absolute terms. Central
/// differences at h = 1e-5 carry roundoff near 1e-11, which would dominate
/// a relative error on entries of order 1e-9.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

/// One check on a randomly sized small network.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCheck {
    pub dims: ModelDims,
    pub report: GradCheckReport,
}

/// Checks `n` small networks with random widths, weights, inputs and labels.
pub fn random_gradient_checks(n: usize, h: f64, seed: u64) -> Vec<RandomCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let dims = ModelDims::new(rng.gen_range(1..=6), rng.gen_range(1..=4), rng.gen_range(1..=4));
            let params = ModelParams::init(dims, 0.0, &mut rng);
            let example = TrainingExample {
                candidate_id: String::new(),
                timesteps: [
                    (0..dims.input).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    (0..dims.input).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                ],
                label: rng.gen_range(0..=1),
            };
            RandomCheck {
                dims,
                report: gradient_check(&params, &example, h),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> (ModelParams, TrainingExample) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(ModelDims::new(4, 3, 2), 0.0, &mut rng);
        let ex = TrainingExample {
            candidate_id: "C".into(),
            timesteps: [
                (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ],
            label: (seed % 2) as u8,
        };
        (params, ex)
    }

    #[test]
    fn small_net_passes() {
        let (p, ex) = small(3);
        let r = gradient_check(&p, &ex, 1e-5);
        assert!(r.max_relative_error < 1e-4, "{r:?}");
        assert_eq!(r.parameters_checked, p.parameter_count());
    }

    #[test]
    fn detects_scaled_output_gradient() {
        let (p, ex) = small(4);
        let mut g = analytic_gradients(&p, &ex);
        g.output_weights *= 2.0;
        let r = gradient_check_with(&p, &ex, 1e-5, &g);
        assert!(r.max_relative_error >= 0.333, "{r:?}");
        assert_eq!(r.tensor, "output.weights");
    }

    #[test]
    fn coarse_step_is_less_accurate() {
        let (p, ex) = small(5);
        let fine = gradient_check(&p, &ex, 1e-5).max_relative_error;
        let coarse = gradient_check(&p, &ex, 1e-1).max_relative_error;
        assert!(coarse > fine, "{coarse} <= {fine}");
    }
}
