//! The three sub-recommenders: model predictions, jobs similar to ones the
//! candidate applied to, and jobs applied to by similar candidates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, InteractionKind, JobId};
use crate::seqnet::{predict_for_candidate, ModelParams, ProgressionEncoder, SeqError};
use crate::simindex::{similar_candidates, similar_jobs, SimIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    MachineLearning,
    SimilarJobsApplied,
    SimilarCandidatesApplied,
    EdgeCase,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::MachineLearning => "machine_learning",
            Source::SimilarJobsApplied => "similar_jobs_applied",
            Source::SimilarCandidatesApplied => "similar_candidates_applied",
            Source::EdgeCase => "edge_case",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Score(f64),
    Neighbor { id: String, similarity: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub job_id: JobId,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedJobs {
    pub source: Source,
    pub entries: Vec<RankedEntry>,
}

impl RankedJobs {
    pub fn empty(source: Source) -> Self {
        RankedJobs {
            source,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn job_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.job_id.as_str())
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.entries.retain(|e| keep(&e.job_id));
    }
}

/// Newest first, then by id.
pub fn sort_by_recency(dataset: &Dataset, entries: &mut [RankedEntry]) {
    entries.sort_by(|a, b| {
        let ta = dataset.jobs[&a.job_id].created_on;
        let tb = dataset.jobs[&b.job_id].created_on;
        tb.cmp(&ta).then_with(|| a.job_id.cmp(&b.job_id))
    });
}

fn ranked(dataset: &Dataset, source: Source, mut entries: Vec<RankedEntry>) -> RankedJobs {
    sort_by_recency(dataset, &mut entries);
    RankedJobs { source, entries }
}

/// Jobs from `j_filtered` whose predicted probability reaches `cutoff`.
pub fn ml_recommend(
    candidate_id: &str,
    j_filtered: &BTreeSet<JobId>,
    dataset: &Dataset,
    model: &ModelParams,
    encoder: &ProgressionEncoder,
    cutoff: f64,
) -> Result<RankedJobs, SeqError> {
    let jobs: Vec<_> = j_filtered
        .iter()
        .filter_map(|id| dataset.jobs.get(id))
        .collect();
    let probs = predict_for_candidate(model, encoder, dataset, candidate_id, &jobs)?;
    let entries = jobs
        .iter()
        .zip(probs)
        .filter(|(_, p)| *p >= cutoff)
        .map(|(j, p)| RankedEntry {
            job_id: j.id.clone(),
            provenance: Provenance::Score(p),
        })
        .collect();
    Ok(ranked(dataset, Source::MachineLearning, entries))
}

/// Keeps the most similar neighbor per job, smaller neighbor id on ties.
fn keep_best(best: &mut BTreeMap<JobId, (String, f64)>, job: &str, via: &str, s: f64) {
    match best.get_mut(job) {
        Some(cur) if s > cur.1 || (s == cur.1 && via < cur.0.as_str()) => *cur = (via.to_string(), s),
        Some(_) => {}
        None => {
            best.insert(job.to_string(), (via.to_string(), s));
        }
    }
}

fn neighbor_entries(best: BTreeMap<JobId, (String, f64)>) -> Vec<RankedEntry> {
    best.into_iter()
        .map(|(job_id, (id, similarity))| RankedEntry {
            job_id,
            provenance: Provenance::Neighbor { id, similarity },
        })
        .collect()
}

/// Jobs in `j_filtered` similar to any job the candidate applied to.
pub fn similar_jobs_recommend(
    candidate_id: &str,
    j_filtered: &BTreeSet<JobId>,
    dataset: &Dataset,
    job_index: &SimIndex,
    threshold: f64,
) -> RankedJobs {
    let mut best = BTreeMap::new();
    for seed in dataset.applied_jobs(candidate_id) {
        match similar_jobs(&seed, j_filtered.iter().map(String::as_str), job_index, threshold) {
            Ok(list) => {
                for (job, s) in &list.entries {
                    keep_best(&mut best, job, &seed, *s);
                }
            }
            Err(e) => log::warn!("similar jobs for {seed}: {e}"),
        }
    }
    ranked(dataset, Source::SimilarJobsApplied, neighbor_entries(best))
}

/// Jobs in `j_filtered` that similar candidates applied to.
pub fn similar_candidates_recommend(
    candidate_id: &str,
    j_filtered: &BTreeSet<JobId>,
    dataset: &Dataset,
    candidate_index: &SimIndex,
    threshold: f64,
) -> RankedJobs {
    let pool = dataset.candidates.keys().map(String::as_str);
    let neighbors = match similar_candidates(candidate_id, pool, candidate_index, threshold) {
        Ok(list) => list,
        Err(e) => {
            log::warn!("similar candidates for {candidate_id}: {e}");
            return RankedJobs::empty(Source::SimilarCandidatesApplied);
        }
    };
    let mut best = BTreeMap::new();
    for (nid, s) in &neighbors.entries {
        for it in dataset.interactions_of(nid) {
            if it.kind == InteractionKind::CandidateApply && j_filtered.contains(&it.job_id) {
                keep_best(&mut best, &it.job_id, nid, *s);
            }
        }
    }
    ranked(dataset, Source::SimilarCandidatesApplied, neighbor_entries(best))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::domain::{Candidate, Interaction, Job, Profile};
    use crate::featurize::FeatureVector;

    pub(crate) fn job(id: &str, created_on: i64) -> Job {
        Job {
            id: id.into(),
            required_skills: vec!["rust".into()],
            min_experience: 0.0,
            max_experience: 10.0,
            industry: "software".into(),
            title: "engineer".into(),
            created_on,
            organization_id: "o".into(),
            location: None,
        }
    }

    pub(crate) fn candidate(id: &str) -> Candidate {
        Candidate {
            id: id.into(),
            profile: Profile {
                skills: vec!["rust".into()],
                experience_years: 3.0,
                location: "x".into(),
                industry: "software".into(),
                organization_id: "o".into(),
                job_title: "engineer".into(),
            },
            updated_at: 0,
        }
    }

    fn apply(c: &str, j: &str, t: i64) -> Interaction {
        Interaction {
            candidate_id: c.into(),
            job_id: j.into(),
            kind: InteractionKind::CandidateApply,
            timestamp: t,
        }
    }

    fn index(items: &[(&str, &[f64])]) -> SimIndex {
        SimIndex::build(items.iter().map(|(id, v)| (id.to_string(), FeatureVector(v.to_vec()))))
    }

    fn set(ids: &[&str]) -> BTreeSet<JobId> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn recency_order_with_id_tiebreak() {
        let ds = Dataset::new(
            vec![candidate("c")],
            vec![job("b", 5), job("a", 5), job("z", 10)],
            vec![],
            vec![],
        )
        .unwrap();
        let mut e: Vec<RankedEntry> = ["b", "a", "z"]
            .iter()
            .map(|j| RankedEntry {
                job_id: j.to_string(),
                provenance: Provenance::Score(1.0),
            })
            .collect();
        sort_by_recency(&ds, &mut e);
        let ids: Vec<&str> = e.iter().map(|e| e.job_id.as_str()).collect();
        assert_eq!(ids, ["z", "a", "b"]);
    }

    #[test]
    fn similar_jobs_cover_cold_jobs_and_dedup() {
        let ds = Dataset::new(
            vec![candidate("c")],
            vec![job("s1", 1), job("s2", 1), job("new", 9), job("far", 3)],
            vec![apply("c", "s1", 1), apply("c", "s2", 2)],
            vec![],
        )
        .unwrap();
        let idx = index(&[
            ("s1", &[1.0, 0.0]),
            ("s2", &[1.0, 0.1]),
            ("new", &[0.9, 0.436]),
            ("far", &[0.0, 1.0]),
        ]);
        let r = similar_jobs_recommend("c", &set(&["new", "far"]), &ds, &idx, 0.70);
        assert_eq!(r.job_ids().collect::<Vec<_>>(), ["new"]);
        assert_eq!(r.source, Source::SimilarJobsApplied);
        let none = similar_jobs_recommend("c", &set(&["new"]), &ds, &idx, 0.99);
        assert!(none.is_empty());
    }

    #[test]
    fn no_applications_means_no_similar_jobs() {
        let ds = Dataset::new(vec![candidate("c")], vec![job("a", 1)], vec![], vec![]).unwrap();
        let idx = index(&[("a", &[1.0])]);
        assert!(similar_jobs_recommend("c", &set(&["a"]), &ds, &idx, 0.7).is_empty());
    }

    #[test]
    fn similar_candidates_cold_start() {
        let ds = Dataset::new(
            vec![candidate("new"), candidate("n1"), candidate("n2")],
            vec![job("x", 1), job("y", 2)],
            vec![apply("n1", "x", 1), apply("n1", "y", 2), apply("n2", "y", 3)],
            vec![],
        )
        .unwrap();
        let idx = index(&[("new", &[1.0, 0.0]), ("n1", &[0.9, 0.436]), ("n2", &[0.0, 1.0])]);
        let r = similar_candidates_recommend("new", &set(&["x"]), &ds, &idx, 0.80);
        assert_eq!(r.job_ids().collect::<Vec<_>>(), ["x"]);
        match &r.entries[0].provenance {
            Provenance::Neighbor { id, .. } => assert_eq!(id, "n1"),
            p => panic!("{p:?}"),
        }
        assert!(similar_candidates_recommend("new", &set(&["x", "y"]), &ds, &idx, 0.95).is_empty());
    }
}
