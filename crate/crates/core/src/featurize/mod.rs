//! Skill tokens, embeddings, latent competency groups and feature vectors.

mod embedding;
mod groups;
mod vectorize;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Dataset;

pub use embedding::{embed_skills, ppmi, SkillEmbedding};
pub use groups::{competency_similarity, derive_competency_groups, expand_skills, CompetencyGroups};
pub use vectorize::{
    fnv1a, FeatureLayout, FeatureVector, Featurizer, FeaturizerConfig, Segment, VectorStats,
    FEATURIZER_FORMAT,
};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("skill is empty after trimming")]
    EmptySkill,
    #[error("no skills in vocabulary")]
    EmptyVocabulary,
    #[error("embedding dimension {d} exceeds vocabulary size {vocab}")]
    DimensionTooLarge { d: usize, vocab: usize },
    #[error("embedding dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("co-occurrence matrix carries no signal")]
    DegenerateMatrix,
    #[error("co-occurrence matrix is not symmetric and non-negative")]
    InvalidMatrix,
    #[error("k={k} must be in 1..={vocab}")]
    KTooLarge { k: usize, vocab: usize },
    #[error("unknown skill {0:?}")]
    UnknownSkill(String),
    #[error("empty skill set")]
    EmptySkillSet,
    #[error("none of the entity's skills are in the vocabulary")]
    AllSkillsUnknown,
    #[error("featurizer checkpoint: {0}")]
    Checkpoint(String),
}

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_skill(raw: &str) -> Result<String, FeatureError> {
    let token = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    if token.is_empty() {
        Err(FeatureError::EmptySkill)
    } else {
        Ok(token)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct SkillVocabulary {
    index: BTreeMap<String, usize>,
    tokens: Vec<String>,
}

impl From<Vec<String>> for SkillVocabulary {
    fn from(tokens: Vec<String>) -> Self {
        SkillVocabulary::from_tokens(tokens)
    }
}

impl From<SkillVocabulary> for Vec<String> {
    fn from(v: SkillVocabulary) -> Self {
        v.tokens
    }
}

impl SkillVocabulary {
    /// Builds a vocabulary from tokens; duplicates keep their first index.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let mut index = BTreeMap::new();
        let mut list = Vec::new();
        for t in tokens {
            if !index.contains_key(&t) {
                index.insert(t.clone(), list.len());
                list.push(t);
            }
        }
        SkillVocabulary {
            index,
            tokens: list,
        }
    }

    /// All candidate, snapshot and job skills, in sorted token order.
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let mut all = std::collections::BTreeSet::new();
        for c in dataset.candidates.values() {
            all.extend(c.profile.skills.iter().cloned());
        }
        for s in dataset.snapshots.values().flatten() {
            all.extend(s.profile.skills.iter().cloned());
        }
        for j in dataset.jobs.values() {
            all.extend(j.required_skills.iter().cloned());
        }
        Self::from_tokens(all)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Counts how many skill sets contain each pair of skills. The diagonal holds
/// per-skill occurrence counts.
pub fn cooccurrence_from_sets<'a, I>(
    vocab: &SkillVocabulary,
    sets: I,
) -> Result<DMatrix<f64>, FeatureError>
where
    I: IntoIterator<Item = &'a [String]>,
{
    if vocab.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }
    let n = vocab.len();
    let mut m = DMatrix::zeros(n, n);
    let mut ids = Vec::new();
    for set in sets {
        ids.clear();
        ids.extend(set.iter().filter_map(|s| vocab.get(s)));
        ids.sort_unstable();
        ids.dedup();
        for (a, &i) in ids.iter().enumerate() {
            m[(i, i)] += 1.0;
            for &j in &ids[a + 1..] {
                m[(i, j)] += 1.0;
                m[(j, i)] += 1.0;
            }
        }
    }
    Ok(m)
}

/// Co-occurrence over every candidate profile and job in the dataset.
pub fn build_cooccurrence(
    dataset: &Dataset,
    vocab: &SkillVocabulary,
) -> Result<DMatrix<f64>, FeatureError> {
    let sets = dataset
        .candidates
        .values()
        .map(|c| c.profile.skills.as_slice())
        .chain(dataset.jobs.values().map(|j| j.required_skills.as_slice()));
    cooccurrence_from_sets(vocab, sets)
}
