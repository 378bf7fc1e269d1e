//! Pluggable scorers: sentence relevance, question generation and question
//! entailment. Each has a deterministic lexical baseline and an HTTP bridge
//! client for neural backends.

mod bridge;
mod lexical;
mod template;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub use bridge::{BridgeClient, BridgeConfig};
pub use lexical::{
    lexical_entailment, lexical_relevance, wh_class, LexicalEntailment, LexicalRelevance, WhClass,
};
pub use template::{template_generate, TemplateGenerator, LOCATION_PREPOSITIONS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub qid: String,
    pub text: String,
}

impl Question {
    pub fn new(qid: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Config("question text must be non-empty".into()));
        }
        Ok(Question {
            qid: qid.into(),
            text,
        })
    }
}

/// A question synthesized from one candidate sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQuestion {
    pub gqid: String,
    pub text: String,
    pub source_sentence: String,
    /// The part of the source sentence that answers this question.
    pub answer_snippet: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub k: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { k: 3 }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Directional: `premise` entails `hypothesis` with `probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentScore {
    pub premise_id: String,
    pub hypothesis_id: String,
    pub probability: f64,
}

pub trait RelevanceScorer: Send + Sync {
    /// One score in [0, 1] per sentence, aligned with the input.
    fn relevance(&self, question: &Question, sentences: &[&str]) -> Result<Vec<f64>>;

    fn relevance_score(&self, question: &Question, sentence: &str) -> Result<f64> {
        Ok(self.relevance(question, &[sentence])?[0])
    }
}

pub trait QuestionGenerator: Send + Sync {
    /// At most `k` questions, each tied to `sentence` with a non-empty snippet.
    fn generate(&self, sentence: &Sentence, k: usize) -> Result<Vec<GeneratedQuestion>>;
}

pub trait EntailmentScorer: Send + Sync {
    /// One probability per (premise, hypothesis) pair, aligned with the input.
    fn entail(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>>;

    fn entailment_probability(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        Ok(self.entail(&[(premise, hypothesis)])?[0])
    }
}

pub fn generate_questions(
    generator: &dyn QuestionGenerator,
    sentence: &Sentence,
    config: &GenerationConfig,
) -> Result<Vec<GeneratedQuestion>> {
    config.validate()?;
    let mut out = generator.generate(sentence, config.k)?;
    out.truncate(config.k);
    Ok(out)
}

/// Sorts candidates by descending score, keeping input order among equal
/// scores, and keeps the first `limit`.
pub fn select_top_sentences<T>(
    candidates: Vec<T>,
    scores: &[f64],
    limit: usize,
) -> Result<Vec<(T, f64)>> {
    if candidates.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: candidates.len(),
            right: scores.len(),
        });
    }
    let mut paired: Vec<(T, f64)> = candidates.into_iter().zip(scores.iter().copied()).collect();
    paired.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    paired.truncate(limit);
    Ok(paired)
}

pub const DEFAULT_TOP_SENTENCES: usize = 1000;
