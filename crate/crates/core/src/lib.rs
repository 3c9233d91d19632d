//! Evaluation engine for generated radiology report impressions.
//!
//! The crate scores candidate impressions against reference impressions with
//! dictionary-driven clinical metrics (entity coverage, unsupported entities,
//! format compliance) and the usual text-overlap metrics, then aggregates the
//! per-sample scores into leaderboards, tracer-stratified tables, quartile
//! summaries and correlation matrices.
//!
//! Module map:
//!
//! - [`corpus`]: report records, JSONL loading, split checks, synthetic fixtures
//! - [`lexicon`]: text normalization, term dictionaries, the longest-match trie
//! - [`extraction`]: greedy longest-match entity extraction
//! - [`clinical`]: ECR, UER and the rubric-driven FCR
//! - [`nlg`]: tokenization, BLEU-4, ROUGE-L, METEOR, embedding similarity
//! - [`runner`]: candidate generation against chat-completion endpoints
//! - [`analysis`]: per-sample scoring and aggregate statistics
//! - [`pipeline`]: the batch `evaluate` workflow and its output artifacts

pub mod analysis;
pub mod clinical;
pub mod corpus;
pub mod error;
pub mod extraction;
pub mod lexicon;
pub mod nlg;
pub mod pipeline;
pub mod runner;

pub use error::{Error, Result};
