#![allow(dead_code)]

use jobrec::compose::{ComposeConfig, ComposeContext, Indices};
use jobrec::domain::{Candidate, Dataset, Interaction, InteractionKind, Job, Profile};
use jobrec::featurize::{Featurizer, FeaturizerConfig};
use jobrec::seqnet::ModelParams;

pub const T0: i64 = 1_500_000_000;
pub const DAY: i64 = 86_400;

pub fn job(id: &str, skills: &[&str], exp: (f64, f64), title: &str, created_on: i64) -> Job {
    Job {
        id: id.into(),
        required_skills: skills.iter().map(|s| s.to_string()).collect(),
        min_experience: exp.0,
        max_experience: exp.1,
        industry: "software".into(),
        title: title.into(),
        created_on,
        organization_id: "acme".into(),
        location: None,
    }
}

pub fn candidate(id: &str, skills: &[&str], experience: f64, title: &str) -> Candidate {
    Candidate {
        id: id.into(),
        profile: Profile {
            skills: skills.iter().map(|s| s.to_string()).collect(),
            experience_years: experience,
            location: "north".into(),
            industry: "software".into(),
            organization_id: "acme".into(),
            job_title: title.into(),
        },
        updated_at: T0 + 1000 * DAY,
    }
}

pub fn event(c: &str, j: &str, kind: InteractionKind, t: i64) -> Interaction {
    Interaction {
        candidate_id: c.into(),
        job_id: j.into(),
        kind,
        timestamp: t,
    }
}

pub fn apply(c: &str, j: &str, t: i64) -> Interaction {
    event(c, j, InteractionKind::CandidateApply, t)
}

pub const BACKEND: [&str; 3] = ["rust", "sql", "docker"];
pub const FRONTEND: [&str; 3] = ["react", "css", "html"];
pub const DATA: [&str; 3] = ["python", "statistics", "spark"];

/// Skill sets that give the featurizer some co-occurrence structure.
pub fn filler_jobs() -> Vec<Job> {
    let mut out = Vec::new();
    for (g, skills) in [BACKEND, FRONTEND, DATA].iter().enumerate() {
        for k in 0..3 {
            let set: Vec<&str> = skills.iter().copied().skip(k % 2).collect();
            out.push(job(&format!("F{g}{k}"), &set, (20.0, 30.0), "filler", T0 - (g * 3 + k) as i64));
        }
    }
    out
}

pub fn featurizer(ds: &Dataset) -> Featurizer {
    Featurizer::build(
        ds,
        &FeaturizerConfig {
            embed_dim: 3,
            competency_k: 3,
            ..FeaturizerConfig::default()
        },
    )
    .unwrap()
}

/// Dataset plus everything composition needs.
pub struct World {
    pub ds: Dataset,
    pub f: Featurizer,
    pub indices: Indices,
    pub config: ComposeConfig,
}

impl World {
    pub fn new(candidates: Vec<Candidate>, jobs: Vec<Job>, interactions: Vec<Interaction>) -> Self {
        let ds = Dataset::new(candidates, jobs, interactions, vec![]).unwrap();
        let f = featurizer(&ds);
        let indices = Indices::build(&ds, &f);
        World {
            ds,
            f,
            indices,
            config: ComposeConfig::default(),
        }
    }

    pub fn ctx<'a>(&'a self, model: Option<&'a ModelParams>) -> ComposeContext<'a> {
        ComposeContext {
            dataset: &self.ds,
            featurizer: &self.f,
            model,
            append_competency: true,
            indices: &self.indices,
            config: &self.config,
        }
    }
}

/// A candidate with no interactions whose twin applied to two backend jobs.
pub fn cold_start_world() -> World {
    let mut jobs = filler_jobs();
    jobs.push(job("J1", &BACKEND, (1.0, 5.0), "backend engineer", T0));
    jobs.push(job("J2", &["rust", "sql"], (2.0, 6.0), "backend engineer", T0 + DAY));
    jobs.push(job("J3", &FRONTEND, (1.0, 5.0), "frontend engineer", T0 + 2 * DAY));
    let cands = vec![
        candidate("new", &BACKEND, 3.0, "backend engineer"),
        candidate("twin", &BACKEND, 3.0, "backend engineer"),
    ];
    let its = vec![apply("twin", "J1", T0 + 10 * DAY), apply("twin", "J2", T0 + 11 * DAY)];
    World::new(cands, jobs, its)
}
