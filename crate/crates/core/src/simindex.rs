//! Exact cosine retrieval over small, pre-filtered pools.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::featurize::FeatureVector;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("vector has no nonzero entry")]
    ZeroVector,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("unknown candidate {0}")]
    UnknownCandidate(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Taking one square root of the product keeps a vector's similarity with
/// itself at exactly 1.
fn scaled(dot: f64, na_sq: f64, nb_sq: f64) -> f64 {
    (dot / (na_sq * nb_sq).sqrt()).clamp(-1.0, 1.0)
}

/// `dot(a,b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SimError> {
    if a.len() != b.len() {
        return Err(SimError::LengthMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm_sq(a), norm_sq(b));
    if na == 0.0 || nb == 0.0 {
        return Err(SimError::ZeroVector);
    }
    Ok(scaled(dot(a, b), na, nb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query: String,
    pub threshold: f64,
    /// Score descending, id ascending on ties.
    pub entries: Vec<(String, f64)>,
}

impl NeighborList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }
}

/// Vectors keyed by id with their squared norms cached. Zero vectors are left out and
/// remembered so queries about them return nothing instead of failing.
#[derive(Debug, Clone, Default)]
pub struct SimIndex {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
    position: BTreeMap<String, usize>,
    excluded: BTreeSet<String>,
}

impl SimIndex {
    pub fn build<I>(items: I) -> Self
    where
        I: IntoIterator<Item = (String, FeatureVector)>,
    {
        let mut index = SimIndex::default();
        for (id, FeatureVector(v)) in items {
            let n = norm_sq(&v);
            if n == 0.0 {
                index.excluded.insert(id);
                continue;
            }
            index.position.insert(id.clone(), index.ids.len());
            index.ids.push(id);
            index.vectors.push(v);
            index.norms.push(n);
        }
        if !index.excluded.is_empty() {
            log::warn!("{} zero vectors excluded from retrieval", index.excluded.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.position.contains_key(id)
    }

    pub fn is_excluded(&self, id: &str) -> bool {
        self.excluded.contains(id)
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.position.get(id).map(|&i| self.vectors[i].as_slice())
    }

    /// Every pool member with cosine to `query` at or above `threshold`.
    /// Returns `None` when the query id is unknown.
    pub fn neighbors<'a, P>(&self, query: &str, pool: P, threshold: f64) -> Option<NeighborList>
    where
        P: IntoIterator<Item = &'a str>,
    {
        let list = |entries| NeighborList {
            query: query.to_string(),
            threshold,
            entries,
        };
        if self.excluded.contains(query) {
            return Some(list(Vec::new()));
        }
        let &q = self.position.get(query)?;
        let qv = &self.vectors[q];
        let qn = self.norms[q];
        let mut entries: Vec<(String, f64)> = pool
            .into_iter()
            .filter(|&id| id != query)
            .filter_map(|id| self.position.get(id).map(|&i| (id, i)))
            .map(|(id, i)| {
                let s = scaled(dot(qv, &self.vectors[i]), qn, self.norms[i]);
                (id.to_string(), s)
            })
            .filter(|(_, s)| *s >= threshold)
            .collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.dedup_by(|a, b| a.0 == b.0);
        Some(list(entries))
    }
}

fn check_threshold(t: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(SimError::InvalidThreshold(t))
    }
}

pub fn similar_jobs<'a, P>(
    query_job_id: &str,
    pool: P,
    jobs: &SimIndex,
    threshold: f64,
) -> Result<NeighborList, SimError>
where
    P: IntoIterator<Item = &'a str>,
{
    check_threshold(threshold)?;
    jobs.neighbors(query_job_id, pool, threshold)
        .ok_or_else(|| SimError::UnknownJob(query_job_id.to_string()))
}

pub fn similar_candidates<'a, P>(
    query_candidate_id: &str,
    pool: P,
    candidates: &SimIndex,
    threshold: f64,
) -> Result<NeighborList, SimError>
where
    P: IntoIterator<Item = &'a str>,
{
    check_threshold(threshold)?;
    candidates
        .neighbors(query_candidate_id, pool, threshold)
        .ok_or_else(|| SimError::UnknownCandidate(query_candidate_id.to_string()))
}
