use std::collections::{BTreeSet, HashSet};

use crate::domain::{Dataset, Job, JobId, Profile};
use crate::featurize::Featurizer;
use crate::recommenders::{Provenance, RankedEntry, RankedJobs, Source};
use crate::simindex::cosine;

/// Jaccard overlap of whitespace-separated title tokens.
pub fn title_overlap(a: &str, b: &str) -> f64 {
    let ta: HashSet<&str> = a.split_whitespace().collect();
    let tb: HashSet<&str> = b.split_whitespace().collect();
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// Half skill-centroid cosine, half the share of matching side features:
/// experience within the job's range, same industry, similar title.
pub fn edge_case_score(profile: &Profile, job: &Job, featurizer: &Featurizer) -> f64 {
    let (cc, _) = featurizer.skill_centroid(&profile.skills);
    let (jc, _) = featurizer.skill_centroid(&job.required_skills);
    let skill = cosine(&cc, &jc).unwrap_or(0.0);
    let e = profile.experience_years;
    let fuzzy = [
        e >= job.min_experience && e <= job.max_experience,
        profile.industry == job.industry,
        title_overlap(&profile.job_title, &job.title) >= 0.5,
    ];
    let matched = fuzzy.iter().filter(|&&b| b).count() as f64 / fuzzy.len() as f64;
    0.5 * skill + 0.5 * matched
}

/// Fuzzy-matched jobs from `pool` scoring at least `keep`, best first.
pub fn edge_case_recommend(
    profile: &Profile,
    pool: &BTreeSet<JobId>,
    dataset: &Dataset,
    featurizer: &Featurizer,
    keep: f64,
) -> RankedJobs {
    let mut entries: Vec<RankedEntry> = pool
        .iter()
        .filter_map(|id| dataset.jobs.get(id))
        .map(|j| (j, edge_case_score(profile, j, featurizer)))
        .filter(|(_, s)| *s >= keep)
        .map(|(j, s)| RankedEntry {
            job_id: j.id.clone(),
            provenance: Provenance::Score(s),
        })
        .collect();
    entries.sort_by(|a, b| {
        let (Provenance::Score(x), Provenance::Score(y)) = (&a.provenance, &b.provenance) else {
            unreachable!()
        };
        y.total_cmp(x).then_with(|| a.job_id.cmp(&b.job_id))
    });
    RankedJobs {
        source: Source::EdgeCase,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn title_overlap_examples() {
        assert_eq!(title_overlap("data engineer", "data engineer"), 1.0);
        assert_eq!(title_overlap("senior data engineer", "data engineer"), 2.0 / 3.0);
        assert_eq!(title_overlap("", ""), 0.0);
        assert_eq!(title_overlap("chef", "pilot"), 0.0);
    }
}
