use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{Job, JobId, Profile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFilter {
    pub min_experience: f64,
    pub max_experience: f64,
    pub locations: Option<BTreeSet<String>>,
    pub industries: Option<BTreeSet<String>>,
}

fn present(token: &str) -> Option<BTreeSet<String>> {
    (!token.is_empty()).then(|| BTreeSet::from([token.to_string()]))
}

/// Experience window `[max(0, e - w), e + w]` plus the candidate's location
/// and industry when those are set.
pub fn build_job_filter(profile: &Profile, relaxation_years: f64) -> JobFilter {
    let e = profile.experience_years;
    JobFilter {
        min_experience: (e - relaxation_years).max(0.0),
        max_experience: e + relaxation_years,
        locations: present(&profile.location),
        industries: present(&profile.industry),
    }
}

impl JobFilter {
    /// Jobs without a location are not constrained by the location set.
    pub fn matches(&self, job: &Job) -> bool {
        let overlap = job.min_experience <= self.max_experience && job.max_experience >= self.min_experience;
        let location = match (&self.locations, &job.location) {
            (Some(set), Some(loc)) => set.contains(loc),
            _ => true,
        };
        let industry = self
            .industries
            .as_ref()
            .is_none_or(|set| set.contains(&job.industry));
        overlap && location && industry
    }
}

pub fn apply_filter(filter: &JobFilter, jobs: &BTreeMap<JobId, Job>) -> BTreeSet<JobId> {
    jobs.values()
        .filter(|j| filter.matches(j))
        .map(|j| j.id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommenders::tests::{candidate, job};

    fn ranged(id: &str, lo: f64, hi: f64) -> Job {
        Job {
            min_experience: lo,
            max_experience: hi,
            ..job(id, 0)
        }
    }

    #[test]
    fn window_examples() {
        let mut p = candidate("c").profile;
        p.experience_years = 4.0;
        let f = build_job_filter(&p, 1.0);
        assert_eq!((f.min_experience, f.max_experience), (3.0, 5.0));
        let f2 = build_job_filter(&p, 2.0);
        assert_eq!((f2.min_experience, f2.max_experience), (2.0, 6.0));
        p.experience_years = 0.0;
        let f0 = build_job_filter(&p, 1.0);
        assert_eq!((f0.min_experience, f0.max_experience), (0.0, 1.0));
    }

    #[test]
    fn overlap_and_categories() {
        let mut p = candidate("c").profile;
        p.experience_years = 4.0;
        let f = build_job_filter(&p, 1.0);
        assert!(f.matches(&ranged("a", 5.0, 8.0)));
        assert!(!f.matches(&ranged("b", 6.0, 9.0)));
        let other = Job {
            industry: "retail".into(),
            ..ranged("c", 3.0, 4.0)
        };
        assert!(!f.matches(&other));
        let elsewhere = Job {
            location: Some("y".into()),
            ..ranged("d", 3.0, 4.0)
        };
        assert!(!f.matches(&elsewhere));
        p.industry.clear();
        assert!(build_job_filter(&p, 1.0).matches(&other));
        assert!(apply_filter(&f, &BTreeMap::new()).is_empty());
    }
}
