//! Okapi BM25 over contexts.
//!
//! Scoring uses the Lucene-style idf `ln(1 + (N - df + 0.5) / (df + 0.5))`,
//! which never goes negative, and the usual saturating tf component
//! `tf·(k1+1) / (tf + k1·(1 − b + b·len/avglen))`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default English stopwords. Question words are included so that
/// "content tokens" never carry the wh-word itself.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "can", "did", "do", "does",
    "for", "from", "had", "has", "have", "how", "if", "in", "into", "is", "it", "its", "of", "on",
    "or", "that", "the", "their", "there", "these", "they", "this", "those", "to", "was", "were",
    "what", "when", "where", "which", "who", "whom", "whose", "why", "will", "with",
];

pub const INDEX_FORMAT: &str = "equnova-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct IndexConfig<S> {
    pub k1: S,
    pub b: S,
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
}

impl<S: Scalar> Default for IndexConfig<S> {
    fn default() -> Self {
        IndexConfig {
            k1: S::of(1.2),
            b: S::of(0.75),
            lowercase: true,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl<S: Scalar> IndexConfig<S> {
    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= S::zero()) {
            return Err(Error::Config(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(self.b >= S::zero() && self.b <= S::one()) {
            return Err(Error::Config(format!(
                "b must be in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// Raw words of `text`: maximal runs of alphanumeric characters, with their
/// byte ranges. Case is preserved.
pub fn words(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push((s, i));
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

pub fn tokenize<S: Scalar>(text: &str, config: &IndexConfig<S>) -> Vec<String> {
    words(text)
        .into_iter()
        .map(|(s, e)| {
            if config.lowercase {
                text[s..e].to_lowercase()
            } else {
                text[s..e].to_string()
            }
        })
        .filter(|t| !config.stopwords.contains(t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct InvertedIndex<S> {
    pub config: IndexConfig<S>,
    /// term -> (context ordinal, term frequency), ordinals ascending.
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
    pub doc_lengths: Vec<u32>,
    pub avg_doc_length: S,
    pub n_contexts: usize,
    pub context_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredContext<S> {
    pub context_id: String,
    pub ordinal: usize,
    pub score: S,
}

/// A sentence of a retrieved context, in retrieval order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSentence<S> {
    pub sentence_id: String,
    pub context_id: String,
    /// Index of the sentence within its context.
    pub position: usize,
    /// 0-based rank of the parent context.
    pub context_rank: usize,
    pub context_score: S,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct IndexFile<S> {
    format: String,
    version: u32,
    corpus_fingerprint: String,
    corpus_path: Option<String>,
    index: InvertedIndex<S>,
}

/// An index together with the provenance recorded in its file header.
#[derive(Debug, Clone)]
pub struct StoredIndex<S> {
    pub index: InvertedIndex<S>,
    pub corpus_fingerprint: String,
    pub corpus_path: Option<String>,
}

impl<S: Scalar> InvertedIndex<S> {
    pub fn build(corpus: &Corpus, config: IndexConfig<S>) -> Result<Self> {
        config.validate()?;
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(corpus.n_contexts());
        let mut context_ids = Vec::with_capacity(corpus.n_contexts());
        for (ordinal, ctx) in corpus.contexts().enumerate() {
            let tokens = tokenize(&ctx.text, &config);
            doc_lengths.push(tokens.len() as u32);
            context_ids.push(ctx.context_id.clone());
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings
                    .entry(term)
                    .or_default()
                    .push((ordinal as u32, count));
            }
        }
        let n_contexts = doc_lengths.len();
        let avg_doc_length = if n_contexts == 0 {
            S::zero()
        } else {
            let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
            S::of(total as f64) / S::of(n_contexts as f64)
        };
        Ok(InvertedIndex {
            config,
            postings,
            doc_lengths,
            avg_doc_length,
            n_contexts,
            context_ids,
        })
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize(text, &self.config)
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> S {
        idf(self.n_contexts, self.document_frequency(term))
    }

    pub fn term_frequency(&self, term: &str, ordinal: usize) -> u32 {
        self.postings
            .get(term)
            .and_then(|list| {
                list.binary_search_by_key(&(ordinal as u32), |&(o, _)| o)
                    .ok()
                    .map(|i| list[i].1)
            })
            .unwrap_or(0)
    }

    fn term_weight(&self, term: &str, tf: u32, ordinal: usize) -> S {
        term_score(
            self.idf(term),
            tf,
            self.doc_lengths[ordinal],
            self.avg_doc_length,
            self.config.k1,
            self.config.b,
        )
    }

    pub fn bm25_score(&self, query_terms: &[String], ordinal: usize) -> Result<S> {
        if ordinal >= self.n_contexts {
            return Err(Error::OrdinalOutOfRange {
                ordinal,
                n: self.n_contexts,
            });
        }
        let mut score = S::zero();
        for term in query_terms {
            let tf = self.term_frequency(term, ordinal);
            if tf > 0 {
                score = score + self.term_weight(term, tf, ordinal);
            }
        }
        Ok(score)
    }

    /// Contexts with positive score, best first; ties by ascending ordinal.
    pub fn search(&self, question: &str, top_n: usize) -> Vec<ScoredContext<S>> {
        let terms = self.tokenize(question);
        let mut acc = vec![S::zero(); self.n_contexts];
        for term in &terms {
            if let Some(list) = self.postings.get(term) {
                for &(ord, tf) in list {
                    let ord = ord as usize;
                    acc[ord] = acc[ord] + self.term_weight(term, tf, ord);
                }
            }
        }
        let mut hits: Vec<(usize, S)> = acc
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > S::zero())
            .collect();
        hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        hits.truncate(top_n);
        hits.into_iter()
            .map(|(ordinal, score)| ScoredContext {
                context_id: self.context_ids[ordinal].clone(),
                ordinal,
                score,
            })
            .collect()
    }

    pub fn write_to<W: Write>(
        &self,
        mut out: W,
        corpus_fingerprint: &str,
        corpus_path: Option<&str>,
    ) -> Result<()> {
        let file = IndexFile {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_VERSION,
            corpus_fingerprint: corpus_fingerprint.to_string(),
            corpus_path: corpus_path.map(str::to_string),
            index: self.clone(),
        };
        serde_json::to_writer(&mut out, &file)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<StoredIndex<S>> {
        let file: IndexFile<S> = serde_json::from_reader(reader)?;
        if file.format != INDEX_FORMAT {
            return Err(Error::IndexFormat(format!(
                "unexpected format tag {:?}",
                file.format
            )));
        }
        if file.version != INDEX_VERSION {
            return Err(Error::IndexFormat(format!(
                "unsupported version {} (expected {INDEX_VERSION})",
                file.version
            )));
        }
        file.index.config.validate()?;
        if file.index.doc_lengths.len() != file.index.n_contexts
            || file.index.context_ids.len() != file.index.n_contexts
        {
            return Err(Error::IndexFormat("inconsistent context counts".into()));
        }
        Ok(StoredIndex {
            index: file.index,
            corpus_fingerprint: file.corpus_fingerprint,
            corpus_path: file.corpus_path,
        })
    }
}

pub fn idf<S: Scalar>(n_contexts: usize, df: usize) -> S {
    let n = S::of(n_contexts as f64);
    let df = S::of(df as f64);
    let half = S::of(0.5);
    (S::one() + (n - df + half) / (df + half)).ln()
}

pub fn term_score<S: Scalar>(idf: S, tf: u32, len: u32, avg_len: S, k1: S, b: S) -> S {
    let tf = S::of(f64::from(tf));
    let len = S::of(f64::from(len));
    let norm = if avg_len > S::zero() {
        S::one() - b + b * len / avg_len
    } else {
        S::one()
    };
    idf * tf * (k1 + S::one()) / (tf + k1 * norm)
}

/// All sentences of the ranked contexts, context rank first, then sentence order.
pub fn candidate_sentences<S: Scalar>(
    corpus: &Corpus,
    ranked: &[ScoredContext<S>],
) -> Result<Vec<CandidateSentence<S>>> {
    let mut out = Vec::new();
    for (rank, sc) in ranked.iter().enumerate() {
        let ctx = corpus
            .context(&sc.context_id)
            .ok_or_else(|| Error::UnknownContext(sc.context_id.clone()))?;
        for (position, s) in ctx.sentences.iter().enumerate() {
            out.push(CandidateSentence {
                sentence_id: s.sentence_id.clone(),
                context_id: ctx.context_id.clone(),
                position,
                context_rank: rank,
                context_score: sc.score,
            });
        }
    }
    Ok(out)
}
