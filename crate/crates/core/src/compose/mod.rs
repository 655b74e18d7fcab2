//! End-to-end slate composition: filter the job pool, route on interaction
//! history, blend the sub-recommendations, fall back to fuzzy matching and
//! resurface jobs that have gone unshown for too long.

mod blend;
mod edge;
mod filter;
mod starvation;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CandidateId, DataError, Dataset, JobId, Timestamp};
use crate::featurize::{fnv1a, Featurizer};
use crate::recommenders::{
    ml_recommend, similar_candidates_recommend, similar_jobs_recommend, RankedJobs, Source,
};
use crate::seqnet::{ModelParams, ProgressionEncoder};
use crate::simindex::SimIndex;

pub use blend::blend;
pub use edge::{edge_case_recommend, edge_case_score, title_overlap};
pub use filter::{apply_filter, build_job_filter, JobFilter};
pub use starvation::{starvation_sweep, StarvationCounter, DEFAULT_STARVATION_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlateEntry {
    pub job_id: JobId,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationSlate {
    pub candidate_id: CandidateId,
    pub composed_at: Timestamp,
    pub entries: Vec<SlateEntry>,
}

impl RecommendationSlate {
    pub fn job_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.job_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeConfig {
    pub experience_relaxation_years: f64,
    pub ml_cutoff: f64,
    pub similar_jobs_threshold: f64,
    pub similar_candidates_threshold: f64,
    pub blend_window: usize,
    pub blend_per_source: usize,
    pub edge_keep_threshold: f64,
    /// Truncates the blended slate before starvation insertions.
    pub top: Option<usize>,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            experience_relaxation_years: 1.0,
            ml_cutoff: 0.5,
            similar_jobs_threshold: 0.70,
            similar_candidates_threshold: 0.80,
            blend_window: 10,
            blend_per_source: 2,
            edge_keep_threshold: 0.3,
            top: None,
        }
    }
}

/// Similarity indices over job vectors and current candidate vectors.
pub struct Indices {
    pub jobs: SimIndex,
    pub candidates: SimIndex,
}

impl Indices {
    pub fn build(dataset: &Dataset, featurizer: &Featurizer) -> Self {
        let jobs = SimIndex::build(
            dataset
                .jobs
                .values()
                .map(|j| (j.id.clone(), featurizer.vectorize_job_lossy(j).0)),
        );
        let candidates = SimIndex::build(dataset.candidates.keys().map(|id| {
            let snap = dataset.current_snapshot(id).expect("candidate exists");
            (id.clone(), featurizer.vectorize_candidate_lossy(&snap).0)
        }));
        Indices { jobs, candidates }
    }
}

/// Everything `compose` reads.
pub struct ComposeContext<'a> {
    pub dataset: &'a Dataset,
    pub featurizer: &'a Featurizer,
    /// Without a model the model list is empty.
    pub model: Option<&'a ModelParams>,
    pub append_competency: bool,
    pub indices: &'a Indices,
    pub config: &'a ComposeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    History,
    ColdStart,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposeReport {
    pub route: Route,
    pub filtered: usize,
    pub excluded_applied: usize,
    pub machine_learning: usize,
    pub similar_jobs: usize,
    pub similar_candidates: usize,
    pub edge_case: usize,
    pub starvation_inserted: Vec<JobId>,
    /// Set when the slate is empty: `empty_filter`, `exhausted` or `no_match`.
    pub reason: Option<String>,
    pub model_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposeOutcome {
    pub slate: RecommendationSlate,
    pub report: ComposeReport,
}

fn without(mut list: RankedJobs, applied: &BTreeSet<JobId>) -> RankedJobs {
    list.retain(|j| !applied.contains(j));
    list
}

pub fn compose(
    candidate_id: &str,
    ctx: &ComposeContext,
    counters: &mut StarvationCounter,
    rng: &mut impl Rng,
    now: Timestamp,
) -> Result<ComposeOutcome, DataError> {
    let ds = ctx.dataset;
    let cfg = ctx.config;
    let current = ds.current_snapshot(candidate_id)?;
    let filter = build_job_filter(&current.profile, cfg.experience_relaxation_years);
    let j_filtered = apply_filter(&filter, &ds.jobs);
    let applied = ds.applied_jobs(candidate_id);
    let eligible: BTreeSet<JobId> = j_filtered.difference(&applied).cloned().collect();

    let has_history = ds.last_positive(candidate_id).is_some();
    let mut model_error = None;
    let r_ml = match (has_history, ctx.model) {
        (true, Some(model)) => {
            let encoder = ProgressionEncoder::new(ctx.featurizer, ctx.append_competency);
            match ml_recommend(candidate_id, &j_filtered, ds, model, &encoder, cfg.ml_cutoff) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("model recommendations for {candidate_id}: {e}");
                    model_error = Some(e.to_string());
                    RankedJobs::empty(Source::MachineLearning)
                }
            }
        }
        _ => RankedJobs::empty(Source::MachineLearning),
    };
    let r_sj = if has_history {
        similar_jobs_recommend(candidate_id, &j_filtered, ds, &ctx.indices.jobs, cfg.similar_jobs_threshold)
    } else {
        RankedJobs::empty(Source::SimilarJobsApplied)
    };
    let r_sc = similar_candidates_recommend(
        candidate_id,
        &j_filtered,
        ds,
        &ctx.indices.candidates,
        cfg.similar_candidates_threshold,
    );
    let (r_ml, r_sj, r_sc) = (without(r_ml, &applied), without(r_sj, &applied), without(r_sc, &applied));

    let mut entries = blend(&r_ml, &r_sj, &r_sc, rng, cfg.blend_window, cfg.blend_per_source);
    let mut edge_count = 0;
    if entries.is_empty() {
        let edge = edge_case_recommend(&current.profile, &eligible, ds, ctx.featurizer, cfg.edge_keep_threshold);
        edge_count = edge.len();
        entries = edge
            .entries
            .into_iter()
            .map(|e| SlateEntry {
                job_id: e.job_id,
                source: Source::EdgeCase,
            })
            .collect();
    }
    if let Some(top) = cfg.top {
        entries.truncate(top);
    }
    let inserted = starvation_sweep(counters, candidate_id, &eligible, &mut entries, rng);
    let reason = entries.is_empty().then(|| {
        if j_filtered.is_empty() {
            "empty_filter"
        } else if eligible.is_empty() {
            "exhausted"
        } else {
            "no_match"
        }
        .to_string()
    });
    Ok(ComposeOutcome {
        slate: RecommendationSlate {
            candidate_id: candidate_id.to_string(),
            composed_at: now,
            entries,
        },
        report: ComposeReport {
            route: if has_history { Route::History } else { Route::ColdStart },
            filtered: j_filtered.len(),
            excluded_applied: j_filtered.len() - eligible.len(),
            machine_learning: r_ml.len(),
            similar_jobs: r_sj.len(),
            similar_candidates: r_sc.len(),
            edge_case: edge_count,
            starvation_inserted: inserted,
            reason,
            model_error,
        },
    })
}

/// The model's list alone, filtered and capped like a blended slate, with no
/// fallbacks or starvation insertions. Comparison arm for click simulation.
pub fn compose_ml_only(candidate_id: &str, ctx: &ComposeContext, now: Timestamp) -> Result<RecommendationSlate, DataError> {
    let ds = ctx.dataset;
    let cfg = ctx.config;
    let current = ds.current_snapshot(candidate_id)?;
    let filter = build_job_filter(&current.profile, cfg.experience_relaxation_years);
    let j_filtered = apply_filter(&filter, &ds.jobs);
    let applied = ds.applied_jobs(candidate_id);
    let mut entries: Vec<SlateEntry> = match (ds.last_positive(candidate_id), ctx.model) {
        (Some(_), Some(model)) => {
            let encoder = ProgressionEncoder::new(ctx.featurizer, ctx.append_competency);
            match ml_recommend(candidate_id, &j_filtered, ds, model, &encoder, cfg.ml_cutoff) {
                Ok(r) => without(r, &applied)
                    .entries
                    .into_iter()
                    .map(|e| SlateEntry {
                        job_id: e.job_id,
                        source: Source::MachineLearning,
                    })
                    .collect(),
                Err(e) => {
                    log::warn!("model recommendations for {candidate_id}: {e}");
                    Vec::new()
                }
            }
        }
        _ => Vec::new(),
    };
    if let Some(top) = cfg.top {
        entries.truncate(top);
    }
    Ok(RecommendationSlate {
        candidate_id: candidate_id.to_string(),
        composed_at: now,
        entries,
    })
}

/// Random stream for one candidate's composition.
pub fn candidate_rng(seed: u64, candidate_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(candidate_id))
}

/// Composes slates for `ids` in order. Every candidate draws from
/// [`candidate_rng`] and touches only its own counters, so the output does
/// not depend on `threads`.
pub fn compose_many(
    ids: &[CandidateId],
    ctx: &ComposeContext,
    counters: &mut StarvationCounter,
    seed: u64,
    threads: usize,
    now: Timestamp,
) -> Result<Vec<ComposeOutcome>, DataError> {
    let mut work: Vec<(&str, StarvationCounter)> =
        ids.iter().map(|id| (id.as_str(), counters.take_candidate(id))).collect();
    let one = |(id, c): &mut (&str, StarvationCounter)| compose(id, ctx, c, &mut candidate_rng(seed, id), now);
    let results: Vec<Result<ComposeOutcome, DataError>> = if threads <= 1 || work.len() < 2 {
        work.iter_mut().map(one).collect()
    } else {
        let chunk = work.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = work
                .chunks_mut(chunk)
                .map(|part| s.spawn(move || part.iter_mut().map(one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("composition thread panicked"))
                .collect()
        })
    };
    for (_, c) in work {
        counters.absorb(c);
    }
    results.into_iter().collect()
}
