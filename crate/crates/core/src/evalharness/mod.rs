//! Reporting and comparison tools: classification metrics, a feedforward
//! baseline, click-through simulation and chi-square tests.

mod baseline;
mod chisq;
mod ctr;
mod metrics;
mod split;

use thiserror::Error;

pub use baseline::{train_feedforward_baseline, FeedforwardParams, BASELINE_MAGIC};
pub use chisq::{chi_square_homogeneity, chi_square_two_proportions, critical_value_01, ChiSquare};
pub use ctr::{modal_source, simulate_ctr, ArmStats, ClickModelConfig, CtrReport, PreferenceOracle};
pub use metrics::{classification_report, format_table, ClassMetrics, ClassificationReport, Confusion};
pub use split::{cap_candidates, majority_baseline, split_candidates, CandidateSplit};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions, {1} labels")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("an arm has zero impressions")]
    ZeroImpressions,
    #[error("clicks exceed impressions")]
    InvalidCounts,
    #[error("category sets differ")]
    CategoryMismatch,
    #[error("test has zero degrees of freedom")]
    DegenerateTest,
    #[error("an arm produced no impressions")]
    EmptyArm,
}
