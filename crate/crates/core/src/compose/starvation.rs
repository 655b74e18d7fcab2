use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SlateEntry;
use crate::domain::{read_jsonl, write_jsonl, CandidateId, DataError, JobId};
use crate::recommenders::Source;

pub const DEFAULT_STARVATION_THRESHOLD: u32 = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CounterRecord {
    candidate_id: CandidateId,
    job_id: JobId,
    count: u32,
}

/// Per (candidate, job) count of compositions in which an eligible job was
/// left out of the slate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarvationCounter {
    pub threshold: u32,
    counts: BTreeMap<(CandidateId, JobId), u32>,
}

impl Default for StarvationCounter {
    fn default() -> Self {
        StarvationCounter::new(DEFAULT_STARVATION_THRESHOLD)
    }
}

impl StarvationCounter {
    pub fn new(threshold: u32) -> Self {
        StarvationCounter {
            threshold,
            counts: BTreeMap::new(),
        }
    }

    pub fn get(&self, candidate_id: &str, job_id: &str) -> u32 {
        self.counts
            .get(&(candidate_id.to_string(), job_id.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn set(&mut self, candidate_id: &str, job_id: &str, count: u32) {
        let key = (candidate_id.to_string(), job_id.to_string());
        if count == 0 {
            self.counts.remove(&key);
        } else {
            self.counts.insert(key, count);
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Removes and returns the counts belonging to one candidate.
    pub fn take_candidate(&mut self, candidate_id: &str) -> StarvationCounter {
        let keys: Vec<_> = self
            .counts
            .keys()
            .filter(|(c, _)| c == candidate_id)
            .cloned()
            .collect();
        let mut out = StarvationCounter::new(self.threshold);
        for k in keys {
            let v = self.counts.remove(&k).unwrap();
            out.counts.insert(k, v);
        }
        out
    }

    /// Copies every count from `other` in, replacing existing entries.
    pub fn absorb(&mut self, other: StarvationCounter) {
        self.counts.extend(other.counts);
    }

    /// Reads a JSONL sidecar; a missing file is an empty store.
    pub fn load(path: &Path, threshold: u32) -> Result<Self, DataError> {
        let mut c = StarvationCounter::new(threshold);
        if !path.exists() {
            return Ok(c);
        }
        for r in read_jsonl::<CounterRecord>(path)? {
            c.set(&r.candidate_id, &r.job_id, r.count);
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let records: Vec<CounterRecord> = self
            .counts
            .iter()
            .map(|((c, j), &count)| CounterRecord {
                candidate_id: c.clone(),
                job_id: j.clone(),
                count,
            })
            .collect();
        write_jsonl(path, &records)
    }
}

/// Counts eligible jobs missing from the slate; any whose count passes the
/// threshold is inserted at a random position and reset. Returns the
/// inserted job ids.
pub fn starvation_sweep(
    counters: &mut StarvationCounter,
    candidate_id: &str,
    eligible: &BTreeSet<JobId>,
    slate: &mut Vec<SlateEntry>,
    rng: &mut impl Rng,
) -> Vec<JobId> {
    let shown: BTreeSet<&str> = slate.iter().map(|e| e.job_id.as_str()).collect();
    let mut starved = Vec::new();
    for job in eligible {
        if shown.contains(job.as_str()) {
            counters.set(candidate_id, job, 0);
            continue;
        }
        let n = counters.get(candidate_id, job) + 1;
        if n > counters.threshold {
            starved.push(job.clone());
            counters.set(candidate_id, job, 0);
        } else {
            counters.set(candidate_id, job, n);
        }
    }
    for job in &starved {
        let pos = rng.gen_range(0..=slate.len());
        slate.insert(
            pos,
            SlateEntry {
                job_id: job.clone(),
                source: Source::EdgeCase,
            },
        );
    }
    starved
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eligible(ids: &[&str]) -> BTreeSet<JobId> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn shown(id: &str) -> SlateEntry {
        SlateEntry {
            job_id: id.into(),
            source: Source::MachineLearning,
        }
    }

    #[test]
    fn crossing_threshold_inserts_and_resets() {
        let mut c = StarvationCounter::default();
        c.set("c", "j", 50);
        let mut slate = vec![shown("a")];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ins = starvation_sweep(&mut c, "c", &eligible(&["a", "j"]), &mut slate, &mut rng);
        assert_eq!(ins, ["j"]);
        assert_eq!(c.get("c", "j"), 0);
        assert!(slate.iter().any(|e| e.job_id == "j" && e.source == Source::EdgeCase));
    }

    #[test]
    fn shown_resets_and_scope_is_respected() {
        let mut c = StarvationCounter::default();
        c.set("c", "j", 10);
        c.set("c", "gone", 7);
        let mut slate = vec![shown("j")];
        starvation_sweep(&mut c, "c", &eligible(&["j", "k"]), &mut slate, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(c.get("c", "j"), 0);
        assert_eq!(c.get("c", "k"), 1);
        assert_eq!(c.get("c", "gone"), 7);
    }

    #[test]
    fn first_appearance_by_composition_51() {
        let mut c = StarvationCounter::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for round in 1..=60 {
            let mut slate = vec![shown("a")];
            let ins = starvation_sweep(&mut c, "c", &eligible(&["a", "b"]), &mut slate, &mut rng);
            if round == 51 {
                assert_eq!(ins, ["b"]);
                break;
            }
            assert!(ins.is_empty(), "round {round}");
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counters.jsonl");
        assert!(StarvationCounter::load(&path, 50).unwrap().is_empty());
        let mut c = StarvationCounter::default();
        c.set("c1", "j1", 3);
        c.set("c2", "j9", 49);
        c.save(&path).unwrap();
        assert_eq!(StarvationCounter::load(&path, 50).unwrap(), c);
    }

    #[test]
    fn take_and_absorb_partition_by_candidate() {
        let mut c = StarvationCounter::default();
        c.set("c1", "j1", 3);
        c.set("c2", "j1", 4);
        c.set("c1", "j2", 5);
        let original = c.clone();
        let mine = c.take_candidate("c1");
        assert_eq!((mine.len(), c.len()), (2, 1));
        assert_eq!(mine.get("c1", "j2"), 5);
        c.absorb(mine);
        assert_eq!(c, original);
    }
}
