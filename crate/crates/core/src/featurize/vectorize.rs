use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    build_cooccurrence, competency_similarity, derive_competency_groups, embed_skills,
    expand_skills, CompetencyGroups, FeatureError, SkillEmbedding, SkillVocabulary,
};
use crate::domain::{CandidateSnapshot, Dataset, Job};

pub const FEATURIZER_FORMAT: &str = "jobrec-featurizer";
const FEATURIZER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Skills,
    Experience,
    Industry,
    Title,
    Location,
    Organization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub embed_dim: usize,
    pub experience_cap: f64,
    pub hash_width: usize,
}

impl FeatureLayout {
    pub const SEGMENTS: [Segment; 6] = [
        Segment::Skills,
        Segment::Experience,
        Segment::Industry,
        Segment::Title,
        Segment::Location,
        Segment::Organization,
    ];

    pub fn width(&self, segment: Segment) -> usize {
        match segment {
            Segment::Skills => self.embed_dim,
            Segment::Experience => 1,
            _ => self.hash_width,
        }
    }

    /// Half-open index range of a segment.
    pub fn range(&self, segment: Segment) -> std::ops::Range<usize> {
        let mut start = 0;
        for s in Self::SEGMENTS {
            let w = self.width(s);
            if s == segment {
                return start..start + w;
            }
            start += w;
        }
        unreachable!()
    }

    pub fn total(&self) -> usize {
        Self::SEGMENTS.iter().map(|&s| self.width(s)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn segment(&self, layout: &FeatureLayout, segment: Segment) -> &[f64] {
        &self.0[layout.range(segment)]
    }
}

/// How many of an entity's skills made it into its vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VectorStats {
    pub known: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub embed_dim: usize,
    pub competency_k: usize,
    pub expand_m: usize,
    pub experience_cap: f64,
    pub hash_width: usize,
    pub expand_in_vectors: bool,
    pub seed: u64,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            embed_dim: 64,
            competency_k: 32,
            expand_m: 2,
            experience_cap: 40.0,
            hash_width: 16,
            expand_in_vectors: false,
            seed: 42,
        }
    }
}

/// Vocabulary, embedding, competency groups and the vector layout, frozen
/// together so that vectors stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub vocabulary: SkillVocabulary,
    pub embedding: SkillEmbedding,
    pub groups: CompetencyGroups,
    pub layout: FeatureLayout,
    pub expand_m: usize,
    pub expand_in_vectors: bool,
}

/// FNV-1a; stable across platforms and toolchains.
/// 64-bit FNV-1a.
pub fn fnv1a(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Featurizer {
    pub fn build(dataset: &Dataset, config: &FeaturizerConfig) -> Result<Self, FeatureError> {
        let vocabulary = SkillVocabulary::from_dataset(dataset);
        let cooc = build_cooccurrence(dataset, &vocabulary)?;
        let embedding = embed_skills(&cooc, config.embed_dim)?;
        let groups = derive_competency_groups(&embedding, config.competency_k, config.seed)?;
        Ok(Featurizer {
            format: FEATURIZER_FORMAT.to_string(),
            version: FEATURIZER_VERSION,
            seed: config.seed,
            vocabulary,
            embedding,
            groups,
            layout: FeatureLayout {
                embed_dim: config.embed_dim,
                experience_cap: config.experience_cap,
                hash_width: config.hash_width,
            },
            expand_m: config.expand_m,
            expand_in_vectors: config.expand_in_vectors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        let bytes =
            serde_json::to_vec(self).map_err(|e| FeatureError::Checkpoint(e.to_string()))?;
        std::fs::write(path, bytes)
            .map_err(|e| FeatureError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let bytes = std::fs::read(path)
            .map_err(|e| FeatureError::Checkpoint(format!("{}: {e}", path.display())))?;
        let f: Featurizer =
            serde_json::from_slice(&bytes).map_err(|e| FeatureError::Checkpoint(e.to_string()))?;
        if f.format != FEATURIZER_FORMAT || f.version != FEATURIZER_VERSION {
            return Err(FeatureError::Checkpoint(format!(
                "unsupported format {} v{}",
                f.format, f.version
            )));
        }
        if f.embedding.len() != f.vocabulary.len() || f.groups.assignment.len() != f.vocabulary.len()
        {
            return Err(FeatureError::Checkpoint("inconsistent dimensions".into()));
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    fn skill_set(&self, skills: &[String]) -> BTreeSet<String> {
        let known: BTreeSet<String> = skills
            .iter()
            .filter(|s| self.vocabulary.get(s).is_some())
            .cloned()
            .collect();
        if self.expand_in_vectors && !known.is_empty() {
            // every member is known, so expansion cannot fail
            expand_skills(&known, &self.vocabulary, &self.groups, &self.embedding, self.expand_m)
                .unwrap_or(known)
        } else {
            known
        }
    }

    /// Mean embedding row of the known skills; zeros when none are known.
    pub fn skill_centroid(&self, skills: &[String]) -> (Vec<f64>, VectorStats) {
        let set = self.skill_set(skills);
        let known_inputs = skills.iter().filter(|s| self.vocabulary.get(s).is_some()).count();
        let stats = VectorStats {
            known: known_inputs,
            dropped: skills.len() - known_inputs,
        };
        let mut mean = vec![0.0; self.layout.embed_dim];
        if set.is_empty() {
            return (mean, stats);
        }
        for s in &set {
            let row = self.embedding.row(self.vocabulary.get(s).unwrap());
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = set.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        (mean, stats)
    }

    fn hash_into(&self, out: &mut [f64], segment: Segment, token: Option<&str>) {
        if let Some(t) = token.filter(|t| !t.is_empty()) {
            let r = self.layout.range(segment);
            let bucket = (fnv1a(t) % self.layout.hash_width as u64) as usize;
            out[r.start + bucket] = 1.0;
        }
    }

    fn assemble(
        &self,
        skills: &[String],
        experience: f64,
        industry: &str,
        title: &str,
        location: Option<&str>,
        organization: &str,
    ) -> (FeatureVector, VectorStats) {
        let mut v = vec![0.0; self.layout.total()];
        let (centroid, stats) = self.skill_centroid(skills);
        v[self.layout.range(Segment::Skills)].copy_from_slice(&centroid);
        v[self.layout.range(Segment::Experience).start] =
            (experience / self.layout.experience_cap).clamp(0.0, 1.0);
        self.hash_into(&mut v, Segment::Industry, Some(industry));
        self.hash_into(&mut v, Segment::Title, Some(title));
        self.hash_into(&mut v, Segment::Location, location);
        self.hash_into(&mut v, Segment::Organization, Some(organization));
        (FeatureVector(v), stats)
    }

    /// Vectorizes a candidate, keeping a zero skill segment when no skill is known.
    pub fn vectorize_candidate_lossy(&self, s: &CandidateSnapshot) -> (FeatureVector, VectorStats) {
        let p = &s.profile;
        self.assemble(
            &p.skills,
            p.experience_years,
            &p.industry,
            &p.job_title,
            Some(&p.location),
            &p.organization_id,
        )
    }

    /// Jobs are placed at the midpoint of their experience range.
    pub fn vectorize_job_lossy(&self, job: &Job) -> (FeatureVector, VectorStats) {
        self.assemble(
            &job.required_skills,
            0.5 * (job.min_experience + job.max_experience),
            &job.industry,
            &job.title,
            job.location.as_deref(),
            &job.organization_id,
        )
    }

    pub fn vectorize_candidate(&self, s: &CandidateSnapshot) -> Result<FeatureVector, FeatureError> {
        let (v, stats) = self.vectorize_candidate_lossy(s);
        if stats.known == 0 {
            return Err(FeatureError::AllSkillsUnknown);
        }
        if stats.dropped > 0 {
            log::debug!("candidate {}: dropped {} unknown skills", s.candidate_id, stats.dropped);
        }
        Ok(v)
    }

    pub fn vectorize_job(&self, job: &Job) -> Result<FeatureVector, FeatureError> {
        let (v, stats) = self.vectorize_job_lossy(job);
        if stats.known == 0 {
            return Err(FeatureError::AllSkillsUnknown);
        }
        if stats.dropped > 0 {
            log::debug!("job {}: dropped {} unknown skills", job.id, stats.dropped);
        }
        Ok(v)
    }

    /// Competency-group Jaccard over the known skills of each side; 0 when
    /// either side has no known skill.
    pub fn competency_overlap(&self, a: &[String], b: &[String]) -> f64 {
        let known = |s: &[String]| -> BTreeSet<String> {
            s.iter()
                .filter(|t| self.vocabulary.get(t).is_some())
                .cloned()
                .collect()
        };
        competency_similarity(&known(a), &known(b), &self.vocabulary, &self.groups).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Candidate, Profile};

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

    fn dataset() -> Dataset {
        let cand = |id: &str, skills: &[&str]| Candidate {
            id: id.into(),
            profile: profile(skills, 4.0),
            updated_at: 0,
        };
        let job = |id: &str, skills: &[&str]| Job {
            id: id.into(),
            required_skills: skills.iter().map(|s| s.to_string()).collect(),
            min_experience: 2.0,
            max_experience: 6.0,
            industry: "it".into(),
            title: "developer".into(),
            created_on: 0,
            organization_id: "o2".into(),
            location: None,
        };
        Dataset::new(
            vec![
                cand("C1", &["rust", "go"]),
                cand("C2", &["sql", "excel"]),
                cand("C3", &["rust", "c++"]),
            ],
            vec![job("J1", &["go", "rust", "c++"]), job("J2", &["excel", "sql", "tableau"])],
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn featurizer() -> Featurizer {
        let cfg = FeaturizerConfig {
            embed_dim: 3,
            competency_k: 2,
            ..Default::default()
        };
        Featurizer::build(&dataset(), &cfg).unwrap()
    }

    fn snapshot(skills: &[&str], exp: f64) -> CandidateSnapshot {
        CandidateSnapshot {
            candidate_id: "X".into(),
            as_of: 0,
            profile: profile(skills, exp),
            updated_at: 0,
        }
    }

    #[test]
    fn layout_ranges_tile_the_vector() {
        let l = FeatureLayout {
            embed_dim: 64,
            experience_cap: 40.0,
            hash_width: 16,
        };
        assert_eq!(l.total(), 64 + 1 + 4 * 16);
        assert_eq!(l.range(Segment::Experience), 64..65);
        assert_eq!(l.range(Segment::Organization).end, l.total());
    }

    #[test]
    fn singleton_skill_segment_is_embedding_row() {
        let f = featurizer();
        let v = f.vectorize_candidate(&snapshot(&["rust"], 4.0)).unwrap();
        let row = f.embedding.row(f.vocabulary.get("rust").unwrap());
        assert_eq!(v.segment(&f.layout, Segment::Skills), row);
        assert_eq!(v.len(), f.dim());
    }

    #[test]
    fn experience_scaling() {
        let f = featurizer();
        let at = |e| f.vectorize_candidate(&snapshot(&["rust"], e)).unwrap().segment(&f.layout, Segment::Experience)[0];
        assert_eq!(at(40.0), 1.0);
        assert_eq!(at(55.0), 1.0);
        assert_eq!(at(10.0), 0.25);
    }

    #[test]
    fn unknown_skills_dropped_unless_all_unknown() {
        let f = featurizer();
        let a = f.vectorize_candidate(&snapshot(&["rust", "cobol"], 4.0)).unwrap();
        let b = f.vectorize_candidate(&snapshot(&["rust"], 4.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            f.vectorize_candidate(&snapshot(&["cobol"], 4.0)).unwrap_err(),
            FeatureError::AllSkillsUnknown
        );
    }

    #[test]
    fn hashed_segments_are_one_hot() {
        let f = featurizer();
        let v = f.vectorize_candidate(&snapshot(&["rust"], 4.0)).unwrap();
        for seg in [Segment::Industry, Segment::Title, Segment::Location, Segment::Organization] {
            let s = v.segment(&f.layout, seg);
            assert_eq!(s.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(s.iter().sum::<f64>(), 1.0);
        }
        let job = &dataset().jobs["J1"];
        let jv = f.vectorize_job(job).unwrap();
        assert!(jv.segment(&f.layout, Segment::Location).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vectorize_is_pure() {
        let f = featurizer();
        let s = snapshot(&["rust", "go"], 4.0);
        let a = f.vectorize_candidate(&s).unwrap();
        let b = f.vectorize_candidate(&s.clone()).unwrap();
        assert_eq!(
            a.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let f = featurizer();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("featurizer.json");
        f.save(&path).unwrap();
        assert_eq!(Featurizer::load(&path).unwrap(), f);
    }
}
