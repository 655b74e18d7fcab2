//! Job recommendation engine: a bidirectional LSTM with attention learns how
//! candidates progress from one job to the next, and its predictions are
//! blended with similar-job and similar-candidate recommendations.

pub mod cli;
pub mod compose;
pub mod config;
pub mod domain;
pub mod evalharness;
pub mod featurize;
pub mod recommenders;
pub mod seqnet;
pub mod simindex;
pub mod synthgen;
