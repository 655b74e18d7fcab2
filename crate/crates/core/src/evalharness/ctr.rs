//! Offline click-through simulation for two slate arms.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chisq::chi_square_two_proportions;
use super::EvalError;
use crate::compose::RecommendationSlate;
use crate::recommenders::Source;

/// Anything that scores how much a candidate wants a job, in [0, 1].
pub trait PreferenceOracle {
    fn preference(&self, candidate_id: &str, job_id: &str) -> f64;
}

impl<F: Fn(&str, &str) -> f64> PreferenceOracle for F {
    fn preference(&self, candidate_id: &str, job_id: &str) -> f64 {
        self(candidate_id, job_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClickModelConfig {
    /// Click probability with zero preference and no bonus.
    pub base_rate: f64,
    pub preference_scale: f64,
    /// Added for entries whose source differs from the slate's most common source.
    pub serendipity_bonus: f64,
    /// Probability of looking at the next position after the current one.
    pub continue_probability: f64,
    /// Independent browsing sessions per slate.
    pub sessions: usize,
    /// Drive both arms from one random stream so identical slates yield identical outcomes.
    pub common_random_numbers: bool,
}

impl Default for ClickModelConfig {
    fn default() -> Self {
        ClickModelConfig {
            base_rate: 0.02,
            preference_scale: 0.3,
            serendipity_bonus: 0.25,
            continue_probability: 0.8,
            sessions: 4,
            common_random_numbers: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmStats {
    pub impressions: u64,
    pub clicks: u64,
    pub ctr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtrReport {
    pub blended: ArmStats,
    pub ml_only: ArmStats,
    pub relative_increase: Option<f64>,
    pub chi_square: f64,
    pub significant_at_01: bool,
}

/// Most frequent source in a slate; ties go to the earlier tag.
pub fn modal_source(slate: &RecommendationSlate) -> Option<Source> {
    let mut counts: BTreeMap<Source, usize> = BTreeMap::new();
    for e in &slate.entries {
        *counts.entry(e.source).or_default() += 1;
    }
    let max = counts.values().copied().max()?;
    counts.into_iter().find(|(_, n)| *n == max).map(|(s, _)| s)
}

fn run_arm(
    slates: &[RecommendationSlate],
    oracle: &dyn PreferenceOracle,
    cfg: &ClickModelConfig,
    rng: &mut ChaCha8Rng,
) -> ArmStats {
    let mut stats = ArmStats::default();
    for slate in slates {
        let modal = modal_source(slate);
        for _ in 0..cfg.sessions {
            for entry in &slate.entries {
                stats.impressions += 1;
                let mut p = cfg.base_rate
                    + cfg.preference_scale * oracle.preference(&slate.candidate_id, &entry.job_id);
                if Some(entry.source) != modal {
                    p += cfg.serendipity_bonus;
                }
                if rng.gen::<f64>() < p.clamp(0.0, 1.0) {
                    stats.clicks += 1;
                }
                if rng.gen::<f64>() >= cfg.continue_probability {
                    break;
                }
            }
        }
    }
    if stats.impressions > 0 {
        stats.ctr = stats.clicks as f64 / stats.impressions as f64;
    }
    stats
}

/// Simulates position-decayed browsing of both arms and tests whether their
/// click-through rates differ.
pub fn simulate_ctr(
    blended: &[RecommendationSlate],
    ml_only: &[RecommendationSlate],
    oracle: &dyn PreferenceOracle,
    cfg: &ClickModelConfig,
    rng: &mut impl Rng,
) -> Result<CtrReport, EvalError> {
    let seed_a: u64 = rng.gen();
    let seed_b: u64 = if cfg.common_random_numbers { seed_a } else { rng.gen() };
    let b = run_arm(blended, oracle, cfg, &mut ChaCha8Rng::seed_from_u64(seed_a));
    let m = run_arm(ml_only, oracle, cfg, &mut ChaCha8Rng::seed_from_u64(seed_b));
    if b.impressions == 0 || m.impressions == 0 {
        return Err(EvalError::EmptyArm);
    }
    let chi = chi_square_two_proportions(b.clicks, b.impressions, m.clicks, m.impressions)?;
    Ok(CtrReport {
        blended: b,
        ml_only: m,
        relative_increase: (m.ctr > 0.0).then(|| (b.ctr - m.ctr) / m.ctr),
        chi_square: chi.statistic,
        significant_at_01: chi.significant_at_01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::SlateEntry;

    fn slate(c: &str, entries: &[(&str, Source)]) -> RecommendationSlate {
        RecommendationSlate {
            candidate_id: c.into(),
            composed_at: 0,
            entries: entries
                .iter()
                .map(|(j, s)| SlateEntry {
                    job_id: j.to_string(),
                    source: *s,
                })
                .collect(),
        }
    }

    fn population(n: usize, mixed: bool) -> Vec<RecommendationSlate> {
        (0..n)
            .map(|i| {
                let entries: Vec<(String, Source)> = (0..12)
                    .map(|k| {
                        let s = if mixed && k % 3 == 1 {
                            Source::SimilarJobsApplied
                        } else {
                            Source::MachineLearning
                        };
                        (format!("J{k}"), s)
                    })
                    .collect();
                let refs: Vec<(&str, Source)> = entries.iter().map(|(j, s)| (j.as_str(), *s)).collect();
                slate(&format!("C{i}"), &refs)
            })
            .collect()
    }

    fn flat(_: &str, _: &str) -> f64 {
        0.5
    }

    #[test]
    fn identical_arms_with_shared_stream() {
        let slates = population(50, true);
        let cfg = ClickModelConfig {
            common_random_numbers: true,
            ..Default::default()
        };
        let r = simulate_ctr(&slates, &slates, &flat, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(r.relative_increase, Some(0.0));
        assert_eq!(r.chi_square, 0.0);
    }

    #[test]
    fn empty_arm_rejected() {
        let slates = population(3, false);
        let err = simulate_ctr(&slates, &[], &flat, &ClickModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(err.unwrap_err(), EvalError::EmptyArm);
    }

    #[test]
    fn modal_source_ties_prefer_first_tag() {
        let s = slate("c", &[("a", Source::SimilarJobsApplied), ("b", Source::MachineLearning)]);
        assert_eq!(modal_source(&s), Some(Source::MachineLearning));
        assert_eq!(modal_source(&slate("c", &[])), None);
    }

    #[test]
    fn bonus_lifts_mixed_slates() {
        let mixed = population(400, true);
        let plain = population(400, false);
        let r = simulate_ctr(&mixed, &plain, &flat, &ClickModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(r.blended.ctr > r.ml_only.ctr);
        assert!(r.significant_at_01);
    }
}
