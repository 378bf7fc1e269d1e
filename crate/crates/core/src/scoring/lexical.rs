//! Lexical baselines for relevance and entailment.
//!
//! Both are idf-weighted overlaps over the index's content tokens (stopwords
//! removed, no stemming), with idf taken from the corpus index:
//!
//! * relevance(q, s) = Σ idf(t ∈ Q ∩ S) / Σ idf(t ∈ Q), clamped to [0, 1]
//! * entailment(p, h) = Σ idf(t ∈ H ∩ P) / Σ idf(t ∈ H), multiplied by 0.5
//!   when the question-word classes of p and h differ
//!
//! where Q, S, P, H are the *sets* of content tokens.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{EntailmentScorer, Question, RelevanceScorer};
use crate::bm25::words;
use crate::error::{Error, Result};
use crate::Index;

/// Question-word class used by the entailment baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WhClass {
    What,
    Where,
    Who,
    When,
    Why,
    How,
}

const WH_PENALTY: f64 = 0.5;

/// Class of the first question word in `text`, if any.
pub fn wh_class(text: &str) -> Option<WhClass> {
    words(text)
        .into_iter()
        .find_map(|(s, e)| match text[s..e].to_lowercase().as_str() {
            "what" | "which" => Some(WhClass::What),
            "where" => Some(WhClass::Where),
            "who" | "whom" | "whose" => Some(WhClass::Who),
            "when" => Some(WhClass::When),
            "why" => Some(WhClass::Why),
            "how" => Some(WhClass::How),
            _ => None,
        })
}

fn term_set(text: &str, index: &Index) -> BTreeSet<String> {
    index.tokenize(text).into_iter().collect()
}

fn covered_fraction(target: &BTreeSet<String>, other: &BTreeSet<String>, index: &Index) -> f64 {
    // fold from +0.0: an empty f64 sum is -0.0
    let total = target.iter().fold(0.0, |acc, t| acc + index.idf(t));
    let shared = target
        .intersection(other)
        .fold(0.0, |acc, t| acc + index.idf(t));
    (shared / total).clamp(0.0, 1.0)
}

pub fn lexical_relevance(question: &str, sentence: &str, index: &Index) -> Result<f64> {
    let q = term_set(question, index);
    if q.is_empty() {
        return Err(Error::EmptyQuery);
    }
    Ok(covered_fraction(&q, &term_set(sentence, index), index))
}

pub fn lexical_entailment(premise: &str, hypothesis: &str, index: &Index) -> Result<f64> {
    let h = term_set(hypothesis, index);
    if h.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let coverage = covered_fraction(&h, &term_set(premise, index), index);
    if wh_class(premise) == wh_class(hypothesis) {
        Ok(coverage)
    } else {
        Ok(coverage * WH_PENALTY)
    }
}

#[derive(Debug, Clone)]
pub struct LexicalRelevance {
    index: Arc<Index>,
}

impl LexicalRelevance {
    pub fn new(index: Arc<Index>) -> Self {
        LexicalRelevance { index }
    }
}

impl RelevanceScorer for LexicalRelevance {
    fn relevance(&self, question: &Question, sentences: &[&str]) -> Result<Vec<f64>> {
        let q = term_set(&question.text, &self.index);
        if q.is_empty() {
            return Err(Error::EmptyQuery);
        }
        Ok(sentences
            .iter()
            .map(|s| covered_fraction(&q, &term_set(s, &self.index), &self.index))
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct LexicalEntailment {
    index: Arc<Index>,
}

impl LexicalEntailment {
    pub fn new(index: Arc<Index>) -> Self {
        LexicalEntailment { index }
    }
}

impl EntailmentScorer for LexicalEntailment {
    fn entail(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        pairs
            .iter()
            .map(|(p, h)| lexical_entailment(p, h, &self.index))
            .collect()
    }
}
