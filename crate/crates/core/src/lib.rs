//! Synthetic emotion-labelled dialogue generation and evaluation.
//!
//! - [`corpus`]: label sets, dialogue records, splitting, label statistics
//! - [`prompt`]: three-sentence generation prompts
//! - [`gateway`]: chat-completion client and fixture-driven mock endpoint
//! - [`parser`]: tolerant reader for the tagged turn grammar
//! - [`synth`]: natural and balanced generation jobs
//! - [`rankstats`]: exact rank-sum comparison of models across test sets

pub mod corpus;
pub mod gateway;
pub mod parser;
pub mod prompt;
pub mod rankstats;
pub mod synth;

use num_rational::Ratio;

pub type ScoreTableF64 = rankstats::ScoreTable<f64>;
pub type ScoreTableF32 = rankstats::ScoreTable<f32>;
/// Scores held as exact decimals.
pub type ExactScoreTable = rankstats::ScoreTable<Ratio<i64>>;
