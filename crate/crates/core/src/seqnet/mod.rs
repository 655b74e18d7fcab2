//! Two-timestep progression classifier: a stacked bidirectional LSTM with
//! attention, trained from scratch.
//!
//! An example pairs the candidate's profile and the job they last clicked
//! (timestep 1) with their later profile and the job in question
//! (timestep 2); the target is whether the later interaction was positive.

pub(crate) mod checkpoint;
mod gradcheck;
pub(crate) mod network;
mod params;
pub mod train;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CandidateSnapshot, DataError, Dataset, Job, Timestamp};
use crate::evalharness::EvalError;
use crate::featurize::{FeatureVector, Featurizer};

pub use checkpoint::{ProgressionModel, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{
    analytic_gradients, gradient_check, gradient_check_with, random_gradient_checks, DENOMINATOR_FLOOR, GradCheckReport, RandomCheck,
};
pub use network::{backward, forward_batch, loss, mean_loss, ForwardCache, PROB_EPSILON};
pub use params::{BiLstmLayer, LstmWeights, ModelDims, ModelParams, TENSOR_NAMES};
pub use train::{
    check_classes, fit, predict_examples, split_validation, train, Adam, Batch, EpochRecord,
    Trainable, TrainConfig, TrainingHistory,
};

pub const TIMESTEPS: usize = 2;

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("input width {found} does not match expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("training data contains a single class")]
    SingleClassDataset,
    #[error("no training examples")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("candidate {0} has no positive interaction")]
    NoInteractionHistory(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Metric(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub candidate_id: String,
    pub timesteps: [Vec<f64>; TIMESTEPS],
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutput {
    pub probability: f64,
    pub attention_weights: Vec<f64>,
}

/// Turns a (candidate snapshot, job) pair into one timestep vector:
/// candidate features, job features and, optionally, their competency-group
/// overlap.
#[derive(Debug, Clone, Copy)]
pub struct ProgressionEncoder<'a> {
    pub featurizer: &'a Featurizer,
    pub append_competency: bool,
}

impl<'a> ProgressionEncoder<'a> {
    pub fn new(featurizer: &'a Featurizer, append_competency: bool) -> Self {
        ProgressionEncoder {
            featurizer,
            append_competency,
        }
    }

    pub fn width(&self) -> usize {
        2 * self.featurizer.dim() + usize::from(self.append_competency)
    }

    fn join(&self, cand: &FeatureVector, cand_skills: &[String], job: &FeatureVector, job_skills: &[String]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.width());
        v.extend_from_slice(cand.as_slice());
        v.extend_from_slice(job.as_slice());
        if self.append_competency {
            v.push(self.featurizer.competency_overlap(cand_skills, job_skills));
        }
        v
    }

    pub fn encode_step(&self, snapshot: &CandidateSnapshot, job: &Job) -> Vec<f64> {
        let (cv, _) = self.featurizer.vectorize_candidate_lossy(snapshot);
        let (jv, _) = self.featurizer.vectorize_job_lossy(job);
        self.join(&cv, &snapshot.profile.skills, &jv, &job.required_skills)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SequenceExamples {
    pub examples: Vec<TrainingExample>,
    /// Interactions with no earlier positive interaction by the same candidate.
    pub skipped_no_prior_positive: usize,
    pub skipped_missing_snapshot: usize,
}

/// Emits one example per interaction that has an earlier positive interaction
/// by the same candidate. Timestep 1 is that most recent earlier positive
/// (profile as of then, its job); timestep 2 is the interaction itself.
pub fn build_sequence_examples(dataset: &Dataset, encoder: &ProgressionEncoder) -> SequenceExamples {
    build_sequence_examples_for(dataset, encoder, dataset.candidates.keys().map(String::as_str))
}

/// Same as [`build_sequence_examples`], restricted to the given candidates
/// and emitted in the order they are listed. Unknown ids are skipped.
pub fn build_sequence_examples_for<'c>(
    dataset: &Dataset,
    encoder: &ProgressionEncoder,
    candidates: impl IntoIterator<Item = &'c str>,
) -> SequenceExamples {
    let mut out = SequenceExamples::default();
    let mut job_vectors: BTreeMap<&str, FeatureVector> = BTreeMap::new();
    let mut job_vec = |job: &Job| -> FeatureVector {
        job_vectors
            .entry(dataset.jobs.get_key_value(&job.id).unwrap().0.as_str())
            .or_insert_with(|| encoder.featurizer.vectorize_job_lossy(job).0)
            .clone()
    };
    for cid in candidates {
        let Some((cid, _)) = dataset.candidates.get_key_value(cid) else {
            continue;
        };
        let mut snap_cache: BTreeMap<Timestamp, Option<(CandidateSnapshot, FeatureVector)>> = BTreeMap::new();
        let mut snap = |t: Timestamp| {
            snap_cache
                .entry(t)
                .or_insert_with(|| {
                    dataset.snapshot_at(cid, t).ok().map(|s| {
                        let v = encoder.featurizer.vectorize_candidate_lossy(&s).0;
                        (s, v)
                    })
                })
                .clone()
        };
        let mut last_positive = None;
        for it in dataset.interactions_of(cid) {
            match last_positive {
                None => out.skipped_no_prior_positive += 1,
                Some((t1, j1)) => {
                    let first = snap(t1);
                    let second = snap(it.timestamp);
                    match (first, second) {
                        (Some((s1, v1)), Some((s2, v2))) => {
                            let job1: &Job = &dataset.jobs[j1];
                            let job2: &Job = &dataset.jobs[&it.job_id];
                            let step1 = encoder.join(&v1, &s1.profile.skills, &job_vec(job1), &job1.required_skills);
                            let step2 = encoder.join(&v2, &s2.profile.skills, &job_vec(job2), &job2.required_skills);
                            out.examples.push(TrainingExample {
                                candidate_id: cid.clone(),
                                timesteps: [step1, step2],
                                label: it.label(),
                            });
                        }
                        _ => out.skipped_missing_snapshot += 1,
                    }
                }
            }
            if it.is_positive() {
                last_positive = Some((it.timestamp, &it.job_id));
            }
        }
    }
    out
}

fn check_width(params: &ModelParams, found: usize) -> Result<(), SeqError> {
    if params.dims.input != found {
        return Err(SeqError::ShapeMismatch {
            expected: params.dims.input,
            found,
        });
    }
    Ok(())
}

/// Single-example forward pass. Dropout is drawn from `rng` only in train mode.
pub fn forward<R: Rng>(
    params: &ModelParams,
    example: &TrainingExample,
    train_mode: bool,
    rng: &mut R,
) -> Result<PredictionOutput, SeqError> {
    for step in &example.timesteps {
        check_width(params, step.len())?;
    }
    let steps: Vec<Array2<f64>> = example
        .timesteps
        .iter()
        .map(|v| Array2::from_shape_vec((1, v.len()), v.clone()).unwrap())
        .collect();
    let views: Vec<ArrayView2<f64>> = steps.iter().map(|s| s.view()).collect();
    let cache = if train_mode {
        forward_batch(params, &views, Some(rng))
    } else {
        forward_batch::<R>(params, &views, None)
    };
    Ok(PredictionOutput {
        probability: cache.probabilities[0],
        attention_weights: cache.attention.row(0).to_vec(),
    })
}

/// Probability that the candidate, now at `current`, will click `query`
/// given that at `then` they clicked `last_positive_job`.
pub fn predict(
    params: &ModelParams,
    encoder: &ProgressionEncoder,
    then: &CandidateSnapshot,
    last_positive_job: &Job,
    current: &CandidateSnapshot,
    query: &Job,
) -> Result<f64, SeqError> {
    let ex = TrainingExample {
        candidate_id: current.candidate_id.clone(),
        timesteps: [
            encoder.encode_step(then, last_positive_job),
            encoder.encode_step(current, query),
        ],
        label: 0,
    };
    let mut unused = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    Ok(forward(params, &ex, false, &mut unused)?.probability)
}

/// Scores many jobs for one candidate in a single batch. The first timestep
/// is built from the candidate's most recent positive interaction.
pub fn predict_for_candidate(
    params: &ModelParams,
    encoder: &ProgressionEncoder,
    dataset: &Dataset,
    candidate_id: &str,
    jobs: &[&Job],
) -> Result<Vec<f64>, SeqError> {
    check_width(params, encoder.width())?;
    let last = dataset
        .last_positive(candidate_id)
        .ok_or_else(|| SeqError::NoInteractionHistory(candidate_id.to_string()))?;
    let current = dataset.current_snapshot(candidate_id)?;
    let then = match dataset.snapshot_at(candidate_id, last.timestamp) {
        Ok(s) => s,
        Err(DataError::NoSnapshotBefore { .. }) => current.clone(),
        Err(e) => return Err(e.into()),
    };
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    let first = encoder.encode_step(&then, dataset.job(&last.job_id)?);
    let width = first.len();
    let mut step1 = Array2::zeros((jobs.len(), width));
    let mut step2 = Array2::zeros((jobs.len(), width));
    for (r, job) in jobs.iter().enumerate() {
        step1.row_mut(r).as_slice_mut().unwrap().copy_from_slice(&first);
        step2
            .row_mut(r)
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&encoder.encode_step(&current, job));
    }
    let cache = forward_batch::<ChaCha8Rng>(params, &[step1.view(), step2.view()], None);
    Ok(cache.probabilities.to_vec())
}
