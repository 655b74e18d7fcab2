//! Candidates, jobs, interactions and the JSONL files they live in.
//!
//! A [`Dataset`] is immutable once loaded. All id-indexed collections are
//! `BTreeMap`s so that iteration order (and therefore every downstream
//! output) is deterministic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::normalize_skill;

pub type CandidateId = String;
pub type JobId = String;
/// UTC seconds.
pub type Timestamp = i64;

/// 2014-04-01T00:00:00Z
pub const OBSERVED_RANGE_START: Timestamp = 1_396_310_400;
/// 2019-03-31T23:59:59Z
pub const OBSERVED_RANGE_END: Timestamp = 1_554_076_799;

pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const JOBS_FILE: &str = "jobs.jsonl";
pub const INTERACTIONS_FILE: &str = "interactions.jsonl";
pub const SNAPSHOTS_FILE: &str = "snapshots.jsonl";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("interaction {interaction} references missing {missing}")]
    DanglingReference { interaction: String, missing: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("duplicate interaction {0}")]
    DuplicateInteraction(String),
    #[error("unknown candidate {0}")]
    UnknownCandidate(String),
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("candidate {candidate} has no snapshot at or before t={t}")]
    NoSnapshotBefore { candidate: String, t: Timestamp },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    RecruiterTag,
    #[serde(rename = "expand")]
    CandidateExpand,
    #[serde(rename = "apply")]
    CandidateApply,
    ShownIgnored,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 4] = [
        InteractionKind::RecruiterTag,
        InteractionKind::CandidateExpand,
        InteractionKind::CandidateApply,
        InteractionKind::ShownIgnored,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::RecruiterTag => "recruiter_tag",
            InteractionKind::CandidateExpand => "expand",
            InteractionKind::CandidateApply => "apply",
            InteractionKind::ShownIgnored => "shown_ignored",
        }
    }
}

/// Recruiter tags, expands and applies are all clicks; ignored impressions are not.
pub fn label_interaction(kind: InteractionKind) -> u8 {
    match kind {
        InteractionKind::RecruiterTag
        | InteractionKind::CandidateExpand
        | InteractionKind::CandidateApply => 1,
        InteractionKind::ShownIgnored => 0,
    }
}

/// The attributes shared by a candidate's current profile and its snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub skills: Vec<String>,
    pub experience_years: f64,
    pub location: String,
    pub industry: String,
    pub organization_id: String,
    pub job_title: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    #[serde(flatten)]
    pub profile: Profile,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSnapshot {
    #[serde(rename = "id")]
    pub candidate_id: CandidateId,
    pub as_of: Timestamp,
    #[serde(flatten)]
    pub profile: Profile,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub required_skills: Vec<String>,
    pub min_experience: f64,
    pub max_experience: f64,
    pub industry: String,
    pub title: String,
    pub created_on: Timestamp,
    pub organization_id: String,
    /// Not part of the core job schema; absent locations match any location filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub candidate_id: CandidateId,
    pub job_id: JobId,
    pub kind: InteractionKind,
    pub timestamp: Timestamp,
}

impl Interaction {
    pub fn label(&self) -> u8 {
        label_interaction(self.kind)
    }

    pub fn is_positive(&self) -> bool {
        self.label() == 1
    }

    fn key(&self) -> (Timestamp, &str, &str, InteractionKind) {
        (self.timestamp, &self.candidate_id, &self.job_id, self.kind)
    }
}

fn fold(token: &str) -> String {
    token.trim().to_lowercase()
}

fn normalize_skills(raw: &[String]) -> Result<Vec<String>, String> {
    let mut set = BTreeSet::new();
    for s in raw {
        set.insert(normalize_skill(s).map_err(|e| e.to_string())?);
    }
    Ok(set.into_iter().collect())
}

impl Profile {
    fn normalize(&mut self) -> Result<(), String> {
        if !(self.experience_years.is_finite() && self.experience_years >= 0.0) {
            return Err(format!(
                "experience_years must be finite and non-negative, got {}",
                self.experience_years
            ));
        }
        self.skills = normalize_skills(&self.skills)?;
        self.location = fold(&self.location);
        self.industry = fold(&self.industry);
        self.organization_id = fold(&self.organization_id);
        self.job_title = fold(&self.job_title);
        Ok(())
    }
}

impl Job {
    fn normalize(&mut self) -> Result<(), String> {
        if !(self.min_experience.is_finite() && self.max_experience.is_finite()) {
            return Err("experience bounds must be finite".into());
        }
        if self.min_experience > self.max_experience {
            return Err(format!(
                "min_experience {} exceeds max_experience {}",
                self.min_experience, self.max_experience
            ));
        }
        self.required_skills = normalize_skills(&self.required_skills)?;
        self.industry = fold(&self.industry);
        self.title = fold(&self.title);
        self.organization_id = fold(&self.organization_id);
        self.location = self.location.as_deref().map(fold);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub candidates: BTreeMap<CandidateId, Candidate>,
    pub jobs: BTreeMap<JobId, Job>,
    /// Sorted by (timestamp, candidate, job, kind).
    pub interactions: Vec<Interaction>,
    /// Explicit snapshot history per candidate, sorted by `as_of`. Candidates
    /// without an entry use their current profile at every time.
    pub snapshots: BTreeMap<CandidateId, Vec<CandidateSnapshot>>,
    by_candidate: BTreeMap<CandidateId, Vec<usize>>,
}

impl Dataset {
    /// Validates and indexes the given records.
    pub fn new(
        candidates: Vec<Candidate>,
        jobs: Vec<Job>,
        interactions: Vec<Interaction>,
        snapshots: Vec<CandidateSnapshot>,
    ) -> Result<Self, DataError> {
        let mut cand_map = BTreeMap::new();
        for mut c in candidates {
            c.profile
                .normalize()
                .map_err(|reason| record_error("candidate", &c.id, reason))?;
            let id = c.id.clone();
            if cand_map.insert(id.clone(), c).is_some() {
                return Err(DataError::DuplicateId(id));
            }
        }
        let mut job_map = BTreeMap::new();
        for mut j in jobs {
            j.normalize()
                .map_err(|reason| record_error("job", &j.id, reason))?;
            let id = j.id.clone();
            if job_map.insert(id.clone(), j).is_some() {
                return Err(DataError::DuplicateId(id));
            }
        }

        let mut snap_map: BTreeMap<CandidateId, Vec<CandidateSnapshot>> = BTreeMap::new();
        for mut s in snapshots {
            let Some(owner) = cand_map.get(&s.candidate_id) else {
                return Err(DataError::UnknownCandidate(s.candidate_id));
            };
            s.profile
                .normalize()
                .map_err(|reason| record_error("snapshot", &s.candidate_id, reason))?;
            if s.as_of > owner.updated_at {
                return Err(record_error(
                    "snapshot",
                    &s.candidate_id,
                    format!("as_of {} is after updated_at {}", s.as_of, owner.updated_at),
                ));
            }
            snap_map.entry(s.candidate_id.clone()).or_default().push(s);
        }
        for list in snap_map.values_mut() {
            list.sort_by_key(|s| s.as_of);
            if let Some(w) = list.windows(2).find(|w| w[0].as_of == w[1].as_of) {
                return Err(DataError::DuplicateId(format!(
                    "{}@{}",
                    w[0].candidate_id, w[0].as_of
                )));
            }
        }

        let mut interactions = interactions;
        let mut seen = HashSet::with_capacity(interactions.len());
        let mut out_of_range = 0usize;
        for it in &interactions {
            if !cand_map.contains_key(&it.candidate_id) {
                return Err(DataError::DanglingReference {
                    interaction: describe(it),
                    missing: format!("candidate {}", it.candidate_id),
                });
            }
            if !job_map.contains_key(&it.job_id) {
                return Err(DataError::DanglingReference {
                    interaction: describe(it),
                    missing: format!("job {}", it.job_id),
                });
            }
            if !seen.insert(it.key()) {
                return Err(DataError::DuplicateInteraction(describe(it)));
            }
            if !(OBSERVED_RANGE_START..=OBSERVED_RANGE_END).contains(&it.timestamp) {
                out_of_range += 1;
            }
        }
        drop(seen);
        if out_of_range > 0 {
            log::warn!("{out_of_range} interactions fall outside 2014-04..2019-03");
        }
        interactions.sort_by(|a, b| a.key().cmp(&b.key()));

        let mut by_candidate: BTreeMap<CandidateId, Vec<usize>> = BTreeMap::new();
        for (i, it) in interactions.iter().enumerate() {
            by_candidate
                .entry(it.candidate_id.clone())
                .or_default()
                .push(i);
        }

        Ok(Dataset {
            candidates: cand_map,
            jobs: job_map,
            interactions,
            snapshots: snap_map,
            by_candidate,
        })
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.candidates.len(),
            self.jobs.len(),
            self.interactions.len(),
        )
    }

    pub fn candidate(&self, id: &str) -> Result<&Candidate, DataError> {
        self.candidates
            .get(id)
            .ok_or_else(|| DataError::UnknownCandidate(id.to_string()))
    }

    pub fn job(&self, id: &str) -> Result<&Job, DataError> {
        self.jobs
            .get(id)
            .ok_or_else(|| DataError::UnknownJob(id.to_string()))
    }

    /// A candidate's interactions in time order.
    pub fn interactions_of<'a>(
        &'a self,
        candidate_id: &str,
    ) -> impl DoubleEndedIterator<Item = &'a Interaction> + 'a {
        self.by_candidate
            .get(candidate_id)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.interactions[i])
    }

    /// Jobs the candidate has applied to (Apply-kind interactions only).
    pub fn applied_jobs(&self, candidate_id: &str) -> BTreeSet<JobId> {
        self.interactions_of(candidate_id)
            .filter(|it| it.kind == InteractionKind::CandidateApply)
            .map(|it| it.job_id.clone())
            .collect()
    }

    pub fn last_positive(&self, candidate_id: &str) -> Option<&Interaction> {
        self.interactions_of(candidate_id)
            .rev()
            .find(|it| it.is_positive())
    }

    /// The candidate's current profile as a snapshot.
    pub fn current_snapshot(&self, candidate_id: &str) -> Result<CandidateSnapshot, DataError> {
        let c = self.candidate(candidate_id)?;
        Ok(CandidateSnapshot {
            candidate_id: c.id.clone(),
            as_of: c.updated_at,
            profile: c.profile.clone(),
            updated_at: c.updated_at,
        })
    }

    pub fn snapshot_at(
        &self,
        candidate_id: &str,
        t: Timestamp,
    ) -> Result<CandidateSnapshot, DataError> {
        snapshot_at(candidate_id, t, self)
    }
}

/// Latest snapshot with `as_of <= t`.
pub fn snapshot_at(
    candidate_id: &str,
    t: Timestamp,
    dataset: &Dataset,
) -> Result<CandidateSnapshot, DataError> {
    let candidate = dataset.candidate(candidate_id)?;
    match dataset.snapshots.get(candidate_id) {
        None => Ok(CandidateSnapshot {
            candidate_id: candidate.id.clone(),
            as_of: candidate.updated_at.min(t),
            profile: candidate.profile.clone(),
            updated_at: candidate.updated_at,
        }),
        Some(list) => {
            let idx = list.partition_point(|s| s.as_of <= t);
            if idx == 0 {
                return Err(DataError::NoSnapshotBefore {
                    candidate: candidate_id.to_string(),
                    t,
                });
            }
            Ok(list[idx - 1].clone())
        }
    }
}

fn describe(it: &Interaction) -> String {
    format!(
        "({}, {}, {}, {})",
        it.candidate_id,
        it.job_id,
        it.kind.as_str(),
        it.timestamp
    )
}

fn record_error(what: &str, id: &str, reason: String) -> DataError {
    DataError::Parse {
        path: what.to_string(),
        line: 0,
        reason: format!("{id}: {reason}"),
    }
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DataError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: display.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| DataError::Parse {
            path: display.clone(),
            line: n + 1,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), DataError> {
    let io = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_dataset(
    candidates_path: &Path,
    jobs_path: &Path,
    interactions_path: &Path,
) -> Result<Dataset, DataError> {
    load_dataset_with_snapshots(candidates_path, jobs_path, interactions_path, None)
}

pub fn load_dataset_with_snapshots(
    candidates_path: &Path,
    jobs_path: &Path,
    interactions_path: &Path,
    snapshots_path: Option<&Path>,
) -> Result<Dataset, DataError> {
    let candidates = read_jsonl(candidates_path)?;
    let jobs = read_jsonl(jobs_path)?;
    let interactions = read_jsonl(interactions_path)?;
    let snapshots = match snapshots_path {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    Dataset::new(candidates, jobs, interactions, snapshots)
}

/// Loads the standard file set from a directory; `snapshots.jsonl` is optional.
pub fn load_dir(dir: &Path) -> Result<Dataset, DataError> {
    let snaps = dir.join(SNAPSHOTS_FILE);
    load_dataset_with_snapshots(
        &dir.join(CANDIDATES_FILE),
        &dir.join(JOBS_FILE),
        &dir.join(INTERACTIONS_FILE),
        snaps.exists().then_some(snaps.as_path()),
    )
}

/// Writes the standard file set into `dir`, in id/time order.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write_jsonl(&dir.join(CANDIDATES_FILE), dataset.candidates.values())?;
    write_jsonl(&dir.join(JOBS_FILE), dataset.jobs.values())?;
    write_jsonl(&dir.join(INTERACTIONS_FILE), dataset.interactions.iter())?;
    let snaps: Vec<&CandidateSnapshot> = dataset.snapshots.values().flatten().collect();
    if !snaps.is_empty() {
        write_jsonl(&dir.join(SNAPSHOTS_FILE), snaps)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(skills: &[&str], exp: f64) -> Profile {
        Profile {
            skills: skills.iter().map(|s| s.to_string()).collect(),
            experience_years: exp,
            location: "pune".into(),
            industry: "it".into(),
            organization_id: "o1".into(),
            job_title: "developer".into(),
        }
    }

    pub(crate) fn candidate(id: &str) -> Candidate {
        Candidate {
            id: id.into(),
            profile: profile(&["rust"], 3.0),
            updated_at: 100,
        }
    }

    pub(crate) fn job(id: &str) -> Job {
        Job {
            id: id.into(),
            required_skills: vec!["rust".into()],
            min_experience: 1.0,
            max_experience: 4.0,
            industry: "it".into(),
            title: "developer".into(),
            created_on: 50,
            organization_id: "o2".into(),
            location: None,
        }
    }

    fn interaction(c: &str, j: &str, kind: InteractionKind, t: i64) -> Interaction {
        Interaction {
            candidate_id: c.into(),
            job_id: j.into(),
            kind,
            timestamp: t,
        }
    }

    #[test]
    fn labels_partition_kinds() {
        assert_eq!(label_interaction(InteractionKind::RecruiterTag), 1);
        assert_eq!(label_interaction(InteractionKind::CandidateApply), 1);
        assert_eq!(label_interaction(InteractionKind::CandidateExpand), 1);
        assert_eq!(label_interaction(InteractionKind::ShownIgnored), 0);
    }

    #[test]
    fn kind_wire_names() {
        for kind in InteractionKind::ALL {
            let s = serde_json::to_string(&kind).unwrap();
            assert_eq!(s, format!("\"{}\"", kind.as_str()));
        }
    }

    #[test]
    fn counts_and_sorting() {
        let ds = Dataset::new(
            vec![candidate("C1"), candidate("C2"), candidate("C3")],
            vec![job("J1"), job("J2")],
            vec![
                interaction("C1", "J1", InteractionKind::CandidateApply, 30),
                interaction("C1", "J2", InteractionKind::ShownIgnored, 10),
                interaction("C2", "J1", InteractionKind::RecruiterTag, 20),
                interaction("C3", "J2", InteractionKind::CandidateExpand, 5),
                interaction("C3", "J1", InteractionKind::ShownIgnored, 40),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(ds.counts(), (3, 2, 5));
        assert!(ds
            .interactions
            .windows(2)
            .all(|w| w[0].timestamp <= w[1].timestamp));
        assert_eq!(ds.interactions_of("C1").count(), 2);
        assert_eq!(ds.applied_jobs("C1").into_iter().collect::<Vec<_>>(), ["J1"]);
    }

    #[test]
    fn dangling_job_rejected() {
        let err = Dataset::new(
            vec![candidate("C1")],
            vec![job("J1")],
            vec![interaction("C1", "J999", InteractionKind::CandidateApply, 1)],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, DataError::DanglingReference { .. }), "{err}");
    }

    #[test]
    fn duplicate_ids_and_interactions_rejected() {
        let err = Dataset::new(vec![candidate("C1"), candidate("C1")], vec![], vec![], vec![])
            .unwrap_err();
        assert!(matches!(err, DataError::DuplicateId(_)));
        let it = interaction("C1", "J1", InteractionKind::CandidateApply, 1);
        let err = Dataset::new(
            vec![candidate("C1")],
            vec![job("J1")],
            vec![it.clone(), it],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, DataError::DuplicateInteraction(_)));
    }

    #[test]
    fn categorical_tokens_are_folded() {
        let mut c = candidate("C1");
        c.profile.industry = "  Information Technology ".into();
        c.profile.skills = vec!["Rust".into(), " rust".into(), "Node.JS ".into()];
        let ds = Dataset::new(vec![c], vec![], vec![], vec![]).unwrap();
        let p = &ds.candidates["C1"].profile;
        assert_eq!(p.industry, "information technology");
        assert_eq!(p.skills, ["node.js", "rust"]);
    }

    #[test]
    fn inverted_experience_bounds_rejected() {
        let mut j = job("J1");
        j.min_experience = 5.0;
        j.max_experience = 2.0;
        assert!(Dataset::new(vec![], vec![j], vec![], vec![]).is_err());
    }

    fn with_snapshots() -> Dataset {
        let snap = |t| CandidateSnapshot {
            candidate_id: "C1".into(),
            as_of: t,
            profile: profile(&["rust"], t as f64 / 10.0),
            updated_at: 100,
        };
        Dataset::new(vec![candidate("C1")], vec![], vec![], vec![snap(20), snap(10)]).unwrap()
    }

    #[test]
    fn snapshot_latest_not_after() {
        let ds = with_snapshots();
        assert_eq!(snapshot_at("C1", 15, &ds).unwrap().as_of, 10);
        assert_eq!(snapshot_at("C1", 10, &ds).unwrap().as_of, 10);
        assert_eq!(snapshot_at("C1", 99, &ds).unwrap().as_of, 20);
        assert!(matches!(
            snapshot_at("C1", 5, &ds),
            Err(DataError::NoSnapshotBefore { t: 5, .. })
        ));
    }

    #[test]
    fn single_profile_serves_all_times() {
        let ds = Dataset::new(vec![candidate("C1")], vec![], vec![], vec![]).unwrap();
        let s = snapshot_at("C1", -1_000, &ds).unwrap();
        assert_eq!(s.profile, ds.candidates["C1"].profile);
    }

    #[test]
    fn snapshot_after_profile_update_rejected() {
        let s = CandidateSnapshot {
            candidate_id: "C1".into(),
            as_of: 101,
            profile: profile(&["rust"], 1.0),
            updated_at: 100,
        };
        assert!(Dataset::new(vec![candidate("C1")], vec![], vec![], vec![s]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn snapshot_at_is_monotone(times in proptest::collection::btree_set(0i64..1000, 1..8),
                                   t1 in 0i64..1200, dt in 0i64..500) {
            let snaps = times.iter().map(|&t| CandidateSnapshot {
                candidate_id: "C1".into(),
                as_of: t,
                profile: profile(&["rust"], 1.0),
                updated_at: 1000,
            }).collect();
            let mut c = candidate("C1");
            c.updated_at = 1000;
            let ds = Dataset::new(vec![c], vec![], vec![], snaps).unwrap();
            let t2 = t1 + dt;
            if let (Ok(a), Ok(b)) = (snapshot_at("C1", t1, &ds), snapshot_at("C1", t2, &ds)) {
                proptest::prop_assert!(a.as_of <= b.as_of);
            }
        }
    }
}
