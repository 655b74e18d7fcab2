//! Synthetic career-ladder data with a planted progression signal.
//!
//! Skills are organised in ladders (career tracks) of fixed depth. A candidate
//! climbs one ladder over time, and the jobs they respond to are the ones one
//! level above where they currently stand. Everything is driven by a single
//! seed, so the same configuration always produces the same files.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    read_jsonl, save_dataset, write_jsonl, Candidate, CandidateSnapshot, DataError, Dataset,
    Interaction, InteractionKind, Job, Profile, Timestamp, OBSERVED_RANGE_END, OBSERVED_RANGE_START,
};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";

/// Positive interaction counts by kind in the reference dataset: recruiter
/// tags, expands, applies.
pub const POSITIVE_KIND_COUNTS: [u64; 3] = [215_218, 72_794, 28_486];
const POSITIVE_KINDS: [InteractionKind; 3] = [
    InteractionKind::RecruiterTag,
    InteractionKind::CandidateExpand,
    InteractionKind::CandidateApply,
];

const LEVEL_NAMES: [&str; 8] = ["trainee", "junior", "associate", "senior", "lead", "principal", "head", "chief"];
const LOCATIONS: [&str; 5] = ["north", "south", "east", "west", "central"];

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Paper,
    Small,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_candidates: usize,
    pub n_jobs: usize,
    pub n_interactions: usize,
    pub n_ladders: usize,
    pub ladder_depth: usize,
    pub skills_per_level: usize,
    pub generic_skills: usize,
    /// Ladders sharing one industry label.
    pub ladders_per_industry: usize,
    pub n_organizations: usize,
    pub positive_rate: f64,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_candidates: 4208,
            n_jobs: 2334,
            n_interactions: 1_125_776,
            n_ladders: 8,
            ladder_depth: 6,
            skills_per_level: 3,
            generic_skills: 12,
            ladders_per_industry: 2,
            n_organizations: 40,
            positive_rate: 0.281,
            noise_rate: 0.05,
            seed: 42,
        }
    }
}

impl GeneratorConfig {
    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Paper => GeneratorConfig::default(),
            Scale::Small => GeneratorConfig {
                n_candidates: 800,
                n_jobs: 400,
                n_interactions: 50_000,
                ..Default::default()
            },
        }
    }

    /// Probability that a sampled job is the candidate's next rung, chosen so
    /// that the post-noise positive share equals `positive_rate`.
    pub fn target_probability(&self) -> f64 {
        (self.positive_rate - self.noise_rate) / (1.0 - 2.0 * self.noise_rate)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::ConfigInvalid(m.to_string()));
        if self.n_candidates == 0 || self.n_jobs == 0 || self.n_interactions == 0 {
            return bad("counts must be positive");
        }
        if self.n_ladders < 2 || self.ladder_depth < 2 || self.ladder_depth > LEVEL_NAMES.len() {
            return bad("need at least 2 ladders and a depth between 2 and 8");
        }
        if self.skills_per_level == 0 || self.ladders_per_industry == 0 || self.n_organizations == 0 {
            return bad("skills_per_level, ladders_per_industry and n_organizations must be positive");
        }
        if self.n_jobs < self.n_ladders * self.ladder_depth {
            return bad("n_jobs must cover every (ladder, level) cell");
        }
        if !(0.0..=1.0).contains(&self.positive_rate) || !(0.0..0.5).contains(&self.noise_rate) {
            return bad("positive_rate must be in [0, 1] and noise_rate in [0, 0.5)");
        }
        let q = self.target_probability();
        if !(0.0..=1.0).contains(&q) {
            return bad("positive_rate is unreachable at this noise_rate");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TruthRecord {
    Meta {
        ladder_depth: usize,
    },
    Candidate {
        id: String,
        ladder: usize,
        /// (from time, level) pairs in time order.
        trajectory: Vec<(Timestamp, usize)>,
    },
    Job {
        id: String,
        ladder: usize,
        level: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub ladder_depth: usize,
    pub candidates: BTreeMap<String, (usize, Vec<(Timestamp, usize)>)>,
    pub jobs: BTreeMap<String, (usize, usize)>,
}

impl GroundTruth {
    pub fn level_at(&self, candidate_id: &str, t: Timestamp) -> Option<(usize, usize)> {
        let (ladder, traj) = self.candidates.get(candidate_id)?;
        let level = traj
            .iter()
            .take_while(|(from, _)| *from <= t)
            .last()
            .or(traj.first())
            .map(|(_, l)| *l)?;
        Some((*ladder, level))
    }

    /// 1 when the job sits one rung above the candidate (or on the top rung
    /// for a candidate already there), 0 otherwise.
    pub fn pref(&self, candidate_id: &str, job_id: &str, t: Timestamp) -> f64 {
        let (Some((cl, level)), Some(&(jl, jlevel))) = (self.level_at(candidate_id, t), self.jobs.get(job_id)) else {
            return 0.0;
        };
        let target = (level + 1).min(self.ladder_depth - 1);
        f64::from(u8::from(cl == jl && jlevel == target))
    }

    /// Preference against the candidate's final state.
    pub fn pref_now(&self, candidate_id: &str, job_id: &str) -> f64 {
        self.pref(candidate_id, job_id, Timestamp::MAX)
    }

    pub fn records(&self) -> Vec<TruthRecord> {
        let mut out = vec![TruthRecord::Meta {
            ladder_depth: self.ladder_depth,
        }];
        out.extend(self.candidates.iter().map(|(id, (ladder, trajectory))| TruthRecord::Candidate {
                id: id.clone(),
                ladder: *ladder,
                trajectory: trajectory.clone(),
            }));
        out.extend(self.jobs.iter().map(|(id, &(ladder, level))| TruthRecord::Job {
            id: id.clone(),
            ladder,
            level,
        }));
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        write_jsonl(path, &self.records())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let mut gt = GroundTruth::default();
        for r in read_jsonl::<TruthRecord>(path)? {
            match r {
                TruthRecord::Meta { ladder_depth } => gt.ladder_depth = ladder_depth,
                TruthRecord::Candidate { id, ladder, trajectory } => {
                    gt.candidates.insert(id, (ladder, trajectory));
                }
                TruthRecord::Job { id, ladder, level } => {
                    gt.jobs.insert(id, (ladder, level));
                }
            }
        }
        Ok(gt)
    }
}

impl crate::evalharness::PreferenceOracle for GroundTruth {
    fn preference(&self, candidate_id: &str, job_id: &str) -> f64 {
        self.pref_now(candidate_id, job_id)
    }
}

/// Multinomial split of `n_positives` over recruiter tag, expand and apply
/// with the reference proportions.
pub fn positive_kind_split(n_positives: u64, seed: u64) -> [u64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 3];
    for _ in 0..n_positives {
        counts[sample_kind(&mut rng)] += 1;
    }
    counts
}

fn sample_kind(rng: &mut impl Rng) -> usize {
    let total: u64 = POSITIVE_KIND_COUNTS.iter().sum();
    let mut x = rng.gen_range(0..total);
    for (i, &c) in POSITIVE_KIND_COUNTS.iter().enumerate() {
        if x < c {
            return i;
        }
        x -= c;
    }
    unreachable!()
}

struct Ladders<'a> {
    cfg: &'a GeneratorConfig,
}

impl Ladders<'_> {
    fn skill(&self, ladder: usize, level: usize, k: usize) -> String {
        format!("track{ladder} level{level} skill{k}")
    }

    fn industry(&self, ladder: usize) -> String {
        format!("industry{}", ladder / self.cfg.ladders_per_industry)
    }

    fn title(&self, ladder: usize, level: usize) -> String {
        format!("{} track{ladder}", LEVEL_NAMES[level])
    }

    fn generic(&self, rng: &mut impl Rng, n: usize) -> Vec<String> {
        (0..n)
            .map(|_| format!("generic skill{}", rng.gen_range(0..self.cfg.generic_skills.max(1))))
            .collect()
    }

    /// Everything learned up to `level`, plus a couple of generic skills.
    fn candidate_skills(&self, rng: &mut impl Rng, ladder: usize, level: usize) -> Vec<String> {
        let mut s: Vec<String> = (0..=level)
            .flat_map(|l| (0..self.cfg.skills_per_level).map(move |k| (l, k)))
            .map(|(l, k)| self.skill(ladder, l, k))
            .collect();
        if self.cfg.generic_skills > 0 {
            s.extend(self.generic(rng, 2));
        }
        s
    }

    fn profile(&self, rng: &mut impl Rng, ladder: usize, level: usize, base: &Profile) -> Profile {
        Profile {
            skills: self.candidate_skills(rng, ladder, level),
            experience_years: 2.0 * level as f64 + rng.gen_range(0.0..2.0),
            job_title: self.title(ladder, level),
            ..base.clone()
        }
    }
}

/// Builds a dataset and the ground truth it was sampled from.
pub fn generate(cfg: &GeneratorConfig) -> Result<(Dataset, GroundTruth), GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lad = Ladders { cfg };
    let depth = cfg.ladder_depth;
    let cells = cfg.n_ladders * depth;
    let width = |n: usize| n.to_string().len();
    let (cw, jw) = (width(cfg.n_candidates), width(cfg.n_jobs));
    let span = OBSERVED_RANGE_END - OBSERVED_RANGE_START;

    let mut truth = GroundTruth {
        ladder_depth: depth,
        ..Default::default()
    };

    // jobs: cell i % cells, so every cell is populated
    let mut jobs = Vec::with_capacity(cfg.n_jobs);
    let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for i in 0..cfg.n_jobs {
        let cell = i % cells;
        let (ladder, level) = (cell / depth, cell % depth);
        let id = format!("J{:0jw$}", i);
        let mut skills: Vec<String> = (0..cfg.skills_per_level).map(|k| lad.skill(ladder, level, k)).collect();
        if level > 0 {
            let k = rng.gen_range(0..cfg.skills_per_level);
            skills.push(lad.skill(ladder, level - 1, k));
        }
        if cfg.generic_skills > 0 {
            skills.extend(lad.generic(&mut rng, 1));
        }
        jobs.push(Job {
            id: id.clone(),
            required_skills: skills,
            min_experience: (2.0 * level as f64 - 1.0).max(0.0),
            max_experience: 2.0 * level as f64 + 2.0,
            industry: lad.industry(ladder),
            title: lad.title(ladder, level),
            created_on: OBSERVED_RANGE_START + rng.gen_range(0..span),
            organization_id: format!("org{}", rng.gen_range(0..cfg.n_organizations)),
            location: None,
        });
        by_cell[cell].push(i);
        truth.jobs.insert(id, (ladder, level));
    }

    let q = cfg.target_probability();
    let mut candidates = Vec::with_capacity(cfg.n_candidates);
    let mut snapshots = Vec::new();
    let mut interactions = Vec::with_capacity(cfg.n_interactions);
    let base_count = cfg.n_interactions / cfg.n_candidates;
    let extra = cfg.n_interactions % cfg.n_candidates;
    for c in 0..cfg.n_candidates {
        let id = format!("C{:0cw$}", c);
        let ladder = rng.gen_range(0..cfg.n_ladders);
        let start_level = rng.gen_range(0..depth - 1);
        let n = base_count + usize::from(c < extra);
        let base = Profile {
            skills: Vec::new(),
            experience_years: 0.0,
            location: LOCATIONS[rng.gen_range(0..LOCATIONS.len())].to_string(),
            industry: lad.industry(ladder),
            organization_id: format!("org{}", rng.gen_range(0..cfg.n_organizations)),
            job_title: String::new(),
        };

        // strictly increasing interaction times
        let step = (span / (n as i64 + 1)).max(1);
        let times: Vec<Timestamp> = (0..n as i64)
            .map(|k| OBSERVED_RANGE_START + step * (k + 1) + rng.gen_range(0..step))
            .collect();
        // level-ups happen at sorted random interaction indices
        let ups = rng.gen_range(0..=(depth - 1 - start_level)).min(n);
        let mut up_at: Vec<usize> = (1..n.max(1)).collect();
        up_at.shuffle(&mut rng);
        up_at.truncate(ups);
        up_at.sort_unstable();

        let first_snapshot = snapshots.len();
        let mut trajectory = vec![(OBSERVED_RANGE_START, start_level)];
        let mut profile = lad.profile(&mut rng, ladder, start_level, &base);
        snapshots.push(CandidateSnapshot {
            candidate_id: id.clone(),
            as_of: OBSERVED_RANGE_START,
            profile: profile.clone(),
            updated_at: 0,
        });
        let mut level = start_level;
        let mut ups_iter = up_at.iter().peekable();
        for (k, &t) in times.iter().enumerate() {
            if ups_iter.peek() == Some(&&k) {
                ups_iter.next();
                level += 1;
                profile = lad.profile(&mut rng, ladder, level, &base);
                trajectory.push((t, level));
                snapshots.push(CandidateSnapshot {
                    candidate_id: id.clone(),
                    as_of: t,
                    profile: profile.clone(),
                    updated_at: 0,
                });
            }
            let target = (level + 1).min(depth - 1);
            let cell = if rng.gen::<f64>() < q {
                ladder * depth + target
            } else {
                distractor_cell(&mut rng, cfg, ladder, level, target)
            };
            let job = &jobs[*by_cell[cell].choose(&mut rng).unwrap()];
            let pref = cell == ladder * depth + target;
            let label = pref ^ (rng.gen::<f64>() < cfg.noise_rate);
            let kind = if label {
                POSITIVE_KINDS[sample_kind(&mut rng)]
            } else {
                InteractionKind::ShownIgnored
            };
            interactions.push(Interaction {
                candidate_id: id.clone(),
                job_id: job.id.clone(),
                kind,
                timestamp: t,
            });
        }
        let updated_at = trajectory.last().unwrap().0;
        for s in &mut snapshots[first_snapshot..] {
            s.updated_at = updated_at;
        }
        candidates.push(Candidate {
            id: id.clone(),
            profile,
            updated_at,
        });
        truth.candidates.insert(id, (ladder, trajectory));
    }
    let dataset = Dataset::new(candidates, jobs, interactions, snapshots)?;
    Ok((dataset, truth))
}

/// A non-target cell: half the time a nearby rung of the same ladder, otherwise
/// any rung of another ladder.
fn distractor_cell(rng: &mut impl Rng, cfg: &GeneratorConfig, ladder: usize, level: usize, target: usize) -> usize {
    let depth = cfg.ladder_depth;
    if rng.gen_bool(0.5) {
        let lo = level.saturating_sub(2);
        let hi = (level + 2).min(depth - 1);
        let options: Vec<usize> = (lo..=hi).filter(|&l| l != target).collect();
        if let Some(&l) = options.choose(rng) {
            return ladder * depth + l;
        }
    }
    let mut other = rng.gen_range(0..cfg.n_ladders - 1);
    if other >= ladder {
        other += 1;
    }
    other * depth + rng.gen_range(0..depth)
}

/// Writes the dataset files plus the ground truth into `dir`.
pub fn write_generated(dataset: &Dataset, truth: &GroundTruth, dir: &Path) -> Result<(), DataError> {
    save_dataset(dataset, dir)?;
    truth.save(&dir.join(GROUND_TRUTH_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GeneratorConfig {
        GeneratorConfig {
            n_candidates: 60,
            n_jobs: 96,
            n_interactions: 3000,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn counts_match_config() {
        let (ds, gt) = generate(&tiny()).unwrap();
        assert_eq!(ds.counts(), (60, 96, 3000));
        assert_eq!(gt.candidates.len(), 60);
        assert_eq!(gt.jobs.len(), 96);
    }

    #[test]
    fn deterministic_per_seed() {
        let (a, ga) = generate(&tiny()).unwrap();
        let (b, gb) = generate(&tiny()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        let (c, _) = generate(&GeneratorConfig { seed: 12, ..tiny() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn planted_rule_without_noise() {
        let cfg = GeneratorConfig {
            noise_rate: 0.0,
            ..tiny()
        };
        let (ds, gt) = generate(&cfg).unwrap();
        for it in &ds.interactions {
            let p = gt.pref(&it.candidate_id, &it.job_id, it.timestamp);
            assert_eq!(p, f64::from(it.label()));
        }
    }

    #[test]
    fn oracle_recovers_labels() {
        let cfg = tiny();
        let (ds, gt) = generate(&cfg).unwrap();
        let hits = ds
            .interactions
            .iter()
            .filter(|it| gt.pref(&it.candidate_id, &it.job_id, it.timestamp) == f64::from(it.label()))
            .count();
        let acc = hits as f64 / ds.interactions.len() as f64;
        assert!(acc >= 1.0 - cfg.noise_rate - 0.02, "{acc}");
    }

    #[test]
    fn next_rung_job_is_preferred() {
        let mut gt = GroundTruth {
            ladder_depth: 6,
            ..Default::default()
        };
        gt.candidates.insert("c".into(), (2, vec![(0, 2)]));
        gt.jobs.insert("next".into(), (2, 3));
        gt.jobs.insert("same".into(), (2, 2));
        gt.jobs.insert("other".into(), (1, 3));
        assert_eq!(gt.pref("c", "next", 10), 1.0);
        assert_eq!(gt.pref("c", "same", 10), 0.0);
        assert_eq!(gt.pref("c", "other", 10), 0.0);
    }

    #[test]
    fn kind_split_examples() {
        assert_eq!(positive_kind_split(0, 1), [0, 0, 0]);
        assert_eq!(positive_kind_split(10, 1).iter().sum::<u64>(), 10);
        let n = 316_498;
        let split = positive_kind_split(n, 7);
        for (got, want) in split.iter().zip(POSITIVE_KIND_COUNTS) {
            let rel = (*got as f64 - want as f64).abs() / want as f64;
            assert!(rel < 0.01, "{split:?}");
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(generate(&GeneratorConfig { n_jobs: 10, ..tiny() }).is_err());
        assert!(generate(&GeneratorConfig { noise_rate: 0.6, ..tiny() }).is_err());
        assert!(generate(&GeneratorConfig { n_candidates: 0, ..tiny() }).is_err());
    }

    #[test]
    fn truth_file_round_trip() {
        let (_, gt) = generate(&tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(GROUND_TRUTH_FILE);
        gt.save(&p).unwrap();
        assert_eq!(GroundTruth::load(&p).unwrap(), gt);
    }
}
