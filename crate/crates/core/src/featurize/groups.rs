use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureError, SkillEmbedding, SkillVocabulary};

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetencyGroups {
    pub k: usize,
    /// Skill index to group id.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

impl CompetencyGroups {
    pub fn group_of(&self, skill: usize) -> usize {
        self.assignment[skill]
    }

    pub fn members(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == group)
            .map(|(i, _)| i)
    }

    /// Within-cluster sum of squared distances.
    pub fn inertia(&self, embedding: &SkillEmbedding) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .map(|(i, &g)| sq_dist(embedding.row(i), &self.centroids[g]))
            .sum()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (g, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = g;
            best_d = d;
        }
    }
    best
}

fn plus_plus_seeds(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![rows[first].clone()];
    let mut dist: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    pick = Some(i);
                    break;
                }
                target -= d;
            }
            // rounding can exhaust the loop; take the last positive-weight point
            pick.or_else(|| dist.iter().rposition(|&d| d > 0.0)).unwrap()
        } else {
            // every remaining point coincides with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.push(rows[pick].clone());
        for (i, r) in rows.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(r, &rows[pick]));
        }
    }
    centroids
}

/// Lloyd's k-means with k-means++ seeding. Stops when no assignment changes
/// or after 100 iterations. Empty clusters keep their previous centroid.
pub fn derive_competency_groups(
    embedding: &SkillEmbedding,
    k: usize,
    seed: u64,
) -> Result<CompetencyGroups, FeatureError> {
    let n = embedding.len();
    if k == 0 || k > n {
        return Err(FeatureError::KTooLarge { k, vocab: n });
    }
    let rows = &embedding.rows;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(rows, k, &mut rng);
    let mut assignment: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids)).collect();

    for _ in 0..MAX_ITERATIONS {
        let dim = embedding.dim;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &g) in rows.iter().zip(&assignment) {
            counts[g] += 1;
            for (s, v) in sums[g].iter_mut().zip(r) {
                *s += v;
            }
        }
        for g in 0..k {
            if counts[g] > 0 {
                centroids[g] = sums[g].iter().map(|s| s / counts[g] as f64).collect();
            }
        }
        let next: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }

    Ok(CompetencyGroups {
        k,
        assignment,
        centroids,
    })
}

fn index_all(skills: &BTreeSet<String>, vocab: &SkillVocabulary) -> Result<Vec<usize>, FeatureError> {
    skills
        .iter()
        .map(|s| vocab.get(s).ok_or_else(|| FeatureError::UnknownSkill(s.clone())))
        .collect()
}

/// Adds, for every input skill, its `m` nearest same-group skills by cosine
/// (ties broken by vocabulary index).
pub fn expand_skills(
    skills: &BTreeSet<String>,
    vocab: &SkillVocabulary,
    groups: &CompetencyGroups,
    embedding: &SkillEmbedding,
    m: usize,
) -> Result<BTreeSet<String>, FeatureError> {
    let ids = index_all(skills, vocab)?;
    let mut out = skills.clone();
    if m == 0 {
        return Ok(out);
    }
    for &s in &ids {
        let mut peers: Vec<(usize, f64)> = groups
            .members(groups.group_of(s))
            .filter(|&p| p != s)
            .map(|p| (p, embedding.cosine(s, p)))
            .collect();
        peers.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.extend(peers.into_iter().take(m).map(|(p, _)| vocab.token(p).to_string()));
    }
    Ok(out)
}

/// Jaccard similarity of the competency groups touched by each side.
///
/// Expansion only ever adds same-group skills, so expanded and raw skill sets
/// touch exactly the same groups; the raw sets are used directly.
pub fn competency_similarity(
    candidate_skills: &BTreeSet<String>,
    job_skills: &BTreeSet<String>,
    vocab: &SkillVocabulary,
    groups: &CompetencyGroups,
) -> Result<f64, FeatureError> {
    if candidate_skills.is_empty() || job_skills.is_empty() {
        return Err(FeatureError::EmptySkillSet);
    }
    let a: BTreeSet<usize> = index_all(candidate_skills, vocab)?
        .into_iter()
        .map(|i| groups.group_of(i))
        .collect();
    let b: BTreeSet<usize> = index_all(job_skills, vocab)?
        .into_iter()
        .map(|i| groups.group_of(i))
        .collect();
    Ok(jaccard(&a, &b))
}

pub(crate) fn jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}
