//! Unsupervised query-focused extractive multi-document summarization.
//!
//! Sentences are selected by the cross-entropy method against a product of
//! summary-quality predictors. The two-step cascade first optimizes a long,
//! saliency-oriented summary, distills its most frequent terms and average
//! sentence position, then optimizes the final focused summary over the same
//! candidate pool with that feedback as an extra predictor.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`corpus`] | corpus files, analysis chain, candidate pruning |
//! | [`lm`] | term vectors, unigram models, similarity kernels |
//! | [`predictors`] | the seven quality predictors and objective products |
//! | [`cem`] | cross-entropy subset optimizer |
//! | [`cascade`] | single-step baselines and the two-step cascade |
//! | [`rouge`] | ROUGE-1/2/SU4 scoring |
//! | [`synthetic`] | seeded benchmark generator |
//! | [`stats`] | aggregation and trend statistics |

pub mod cascade;
pub mod cem;
pub mod corpus;
pub mod error;
pub mod lm;
pub mod predictors;
pub mod rouge;
pub mod stats;
pub mod synthetic;

pub use cascade::{run_ces_baseline, run_dual_ces, summarize, CascadeConfig, Mode, SummaryResult};
pub use cem::CeParams;
pub use corpus::{load_corpus, DocumentSet, Sentence, Topic};
pub use error::{Error, Result};
