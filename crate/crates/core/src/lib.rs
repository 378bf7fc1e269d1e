//! Answer-sentence retrieval and novelty-aware re-ranking.
//!
//! The pipeline retrieves contexts with BM25, ranks their sentences, generates
//! questions from each candidate sentence, links the generated questions by
//! question entailment into a graph, and uses the graph's components as
//! nugget surrogates to re-rank answers by how many novel nuggets they add.
//! [`ndns`] scores ranked runs against nugget judgments with the same
//! novelty score.

pub mod bm25;
pub mod corpus;
pub mod eqg;
pub mod error;
pub mod ndns;
pub mod pipeline;
pub mod rerank;
pub mod scalar;
pub mod scoring;

pub use bm25::{IndexConfig, InvertedIndex, ScoredContext};
pub use corpus::{AnswerSpan, Corpus, Sentence};
pub use eqg::{Component, Eqg, EqgConfig, NuggetQuestion};
pub use error::{Error, Result};
pub use ndns::{EvalReport, Judgments, Run};
pub use pipeline::{PipelineConfig, QuestionSet, Scorers};
pub use rerank::{NoveltyCounts, RankedAnswer, RunRecord, Variant};
pub use scalar::{Gain, Scalar};
pub use scoring::{GeneratedQuestion, Question};

/// Index with double-precision scores; what the pipeline and CLI use.
pub type Index = InvertedIndex<f64>;
/// Single-precision index.
pub type Index32 = InvertedIndex<f32>;
pub type IndexConfig64 = IndexConfig<f64>;
/// Exact novelty gains.
pub type ExactGain = num_rational::Rational64;
