use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{classification_report, ClassificationReport, EvalError};
use crate::domain::{CandidateId, Dataset};

/// Disjoint candidate sets, so no candidate contributes to both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSplit {
    pub train: Vec<CandidateId>,
    pub test: Vec<CandidateId>,
}

/// Seeded split of candidate ids; both sides come back sorted.
pub fn split_candidates(dataset: &Dataset, test_fraction: f64, seed: u64) -> CandidateSplit {
    let mut ids: Vec<CandidateId> = dataset.candidates.keys().cloned().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((ids.len() as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut train = ids.split_off(n_test);
    let mut test = ids;
    train.sort();
    test.sort();
    CandidateSplit { train, test }
}

/// Keeps candidates, in a seeded order, until their interactions would exceed
/// `max_interactions`. Returns the kept ids sorted.
pub fn cap_candidates(dataset: &Dataset, ids: &[CandidateId], max_interactions: usize, seed: u64) -> Vec<CandidateId> {
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut kept = Vec::new();
    let mut total = 0;
    for id in order {
        let n = dataset.interactions_of(&id).count();
        if total + n > max_interactions && !kept.is_empty() {
            break;
        }
        total += n;
        kept.push(id);
    }
    kept.sort();
    kept
}

/// Predicts the more frequent label everywhere (class 0 on ties).
pub fn majority_baseline(labels: &[u8]) -> Result<ClassificationReport, EvalError> {
    let ones = labels.iter().filter(|&&y| y == 1).count();
    let majority = u8::from(2 * ones > labels.len());
    classification_report(&vec![majority; labels.len()], labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, GeneratorConfig};

    #[test]
    fn split_is_disjoint_and_covering() {
        let cfg = GeneratorConfig {
            n_candidates: 50,
            n_jobs: 60,
            n_interactions: 500,
            ..Default::default()
        };
        let (ds, _) = generate(&cfg).unwrap();
        let s = split_candidates(&ds, 0.2, 3);
        assert_eq!(s.test.len(), 10);
        assert_eq!(s.train.len(), 40);
        assert!(s.test.iter().all(|c| !s.train.contains(c)));
        assert_eq!(split_candidates(&ds, 0.2, 3), s);
        let capped = cap_candidates(&ds, &s.train, 100, 1);
        let total: usize = capped.iter().map(|c| ds.interactions_of(c).count()).sum();
        assert!(total <= 100 && !capped.is_empty());
    }

    #[test]
    fn majority_predicts_frequent_class() {
        let r = majority_baseline(&[0, 0, 1]).unwrap();
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.class1.precision, None);
    }
}
