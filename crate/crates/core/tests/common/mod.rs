// Shared fixtures for the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use equnova::corpus::Sentence;
use equnova::scoring::{
    EntailmentScorer, GeneratedQuestion, Question, QuestionGenerator, RelevanceScorer,
};
use equnova::{Corpus, Index, IndexConfig, PipelineConfig, Result, Scorers};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn fixture_corpus() -> Corpus {
    let text = std::fs::read_to_string(data_dir().join("fixture_corpus.jsonl")).unwrap();
    Corpus::parse_str(&text).unwrap()
}

/// One JSONL document line with sentence offsets computed from `sentences`.
pub fn document_line(document_id: &str, contexts: &[(&str, Vec<String>)]) -> String {
    let contexts: Vec<_> = contexts
        .iter()
        .map(|(cid, sentences)| {
            let mut text = String::new();
            let mut spans = Vec::new();
            for (i, s) in sentences.iter().enumerate() {
                if !text.is_empty() {
                    text.push(' ');
                }
                let start = text.chars().count();
                text.push_str(s);
                spans.push(json!({
                    "sentence_id": format!("{cid}-S{i}"),
                    "start": start,
                    "end": text.chars().count(),
                }));
            }
            json!({"context_id": cid, "text": text, "sentences": spans})
        })
        .collect();
    json!({"document_id": document_id, "contexts": contexts}).to_string()
}

// ---- worked example: five answers, a5 carries three novel nuggets,
// a3 and a4 share the fourth, a1 and a2 carry none.

pub const WORKED_QUESTION: &str = "What is the origin of the virus?";
pub const WORKED_CONTEXT: &str = "WX-C0";

pub fn worked_sentences() -> Vec<String> {
    vec![
        "a1 The virus origin was discussed at a press briefing.".into(),
        "a2 Reporters asked about the virus origin repeatedly.".into(),
        "a3 Bats are a likely reservoir for the virus origin.".into(),
        "a4 A bat reservoir explains the virus origin.".into(),
        "a5 The virus origin traces to Wuhan, a market, and a spillover event.".into(),
    ]
}

pub fn worked_corpus() -> Corpus {
    Corpus::parse_str(&document_line(
        "WX",
        &[(WORKED_CONTEXT, worked_sentences())],
    ))
    .unwrap()
}

pub fn worked_sentence_id(answer: usize) -> String {
    format!("{WORKED_CONTEXT}-S{}", answer - 1)
}

pub struct ScriptedRelevance(pub HashMap<String, f64>);

impl RelevanceScorer for ScriptedRelevance {
    fn relevance(&self, _question: &Question, sentences: &[&str]) -> Result<Vec<f64>> {
        Ok(sentences
            .iter()
            .map(|s| self.0.get(*s).copied().unwrap_or(0.0))
            .collect())
    }
}

/// Questions keyed by sentence id, as (text, answer snippet).
pub struct ScriptedGenerator(pub HashMap<String, Vec<(String, String)>>);

impl QuestionGenerator for ScriptedGenerator {
    fn generate(&self, sentence: &Sentence, k: usize) -> Result<Vec<GeneratedQuestion>> {
        Ok(self
            .0
            .get(&sentence.sentence_id)
            .into_iter()
            .flatten()
            .take(k)
            .enumerate()
            .map(|(i, (text, snippet))| GeneratedQuestion {
                gqid: format!("{}-Q{i}", sentence.sentence_id),
                text: text.clone(),
                source_sentence: sentence.sentence_id.clone(),
                answer_snippet: snippet.clone(),
            })
            .collect())
    }
}

/// Probabilities keyed by (premise, hypothesis); unlisted pairs score 0.
pub struct ScriptedEntailment(pub HashMap<(String, String), f64>);

impl EntailmentScorer for ScriptedEntailment {
    fn entail(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        Ok(pairs
            .iter()
            .map(|(p, h)| {
                self.0
                    .get(&(p.to_string(), h.to_string()))
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect())
    }
}

pub fn worked_scorers() -> Scorers {
    let sentences = worked_sentences();
    let relevance = sentences
        .iter()
        .zip([0.9, 0.8, 0.7, 0.6, 0.5])
        .map(|(s, r)| (s.clone(), r))
        .collect();

    let q = |t: &str, s: &str| (t.to_string(), s.to_string());
    let mut generated = HashMap::new();
    generated.insert(
        worked_sentence_id(1),
        vec![q("Which briefing discussed it?", "press briefing")],
    );
    generated.insert(
        worked_sentence_id(2),
        vec![q("Who asked repeatedly?", "Reporters")],
    );
    generated.insert(
        worked_sentence_id(3),
        vec![q("What animal is the reservoir?", "Bats")],
    );
    generated.insert(
        worked_sentence_id(4),
        vec![q("Which animal is the reservoir?", "bat")],
    );
    generated.insert(
        worked_sentence_id(5),
        vec![
            q("Where did the virus originate?", "Wuhan"),
            q("Which market was involved?", "a market"),
            q("What event started transmission?", "a spillover event"),
        ],
    );

    let mut entail = HashMap::new();
    let mut set = |p: &str, h: &str, v: f64| {
        entail.insert((p.to_string(), h.to_string()), v);
    };
    for h in [
        "Where did the virus originate?",
        "Which market was involved?",
        "What event started transmission?",
        "What animal is the reservoir?",
        "Which animal is the reservoir?",
    ] {
        set(WORKED_QUESTION, h, 0.9);
    }
    set(WORKED_QUESTION, "Which briefing discussed it?", 0.1);
    set(WORKED_QUESTION, "Who asked repeatedly?", 0.1);
    set(
        "What animal is the reservoir?",
        "Which animal is the reservoir?",
        0.95,
    );
    set(
        "Which animal is the reservoir?",
        "What animal is the reservoir?",
        0.9,
    );

    Scorers {
        relevance: Arc::new(ScriptedRelevance(relevance)),
        generator: Arc::new(ScriptedGenerator(generated)),
        entailment: Arc::new(ScriptedEntailment(entail)),
    }
}

pub fn worked_question() -> Question {
    Question::new("WX", WORKED_QUESTION).unwrap()
}

pub fn lexical_index(corpus: &Corpus) -> Index {
    Index::build(corpus, IndexConfig::default()).unwrap()
}

pub fn default_config() -> PipelineConfig {
    PipelineConfig::default()
}

// ---- random corpora over a small stopword-free vocabulary

pub const VOCAB: &[&str] = &[
    "virus", "cell", "protein", "host", "bat", "lung", "fever", "mask", "vaccine", "dose", "trial",
    "market", "spread", "droplet", "surface", "genome", "strain", "immune", "serum", "patient",
];

pub fn random_sentence<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    let words: Vec<&str> = (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect();
    let mut s = words.join(" ");
    if rng.gen_bool(0.3) {
        s = capitalize(&s);
    }
    s.push('.');
    s
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// `n_contexts` contexts of 1..=4 sentences, spread over documents of up to 3 contexts.
pub fn random_corpus<R: Rng>(rng: &mut R, n_contexts: usize) -> Corpus {
    let mut lines = Vec::new();
    let mut made = 0;
    let mut d = 0;
    while made < n_contexts {
        let take = rng.gen_range(1..=3).min(n_contexts - made);
        let contexts: Vec<(String, Vec<String>)> = (0..take)
            .map(|c| {
                let n = rng.gen_range(1..=4);
                (
                    format!("D{d}-C{c}"),
                    (0..n).map(|_| random_sentence(rng, 8)).collect(),
                )
            })
            .collect();
        let borrowed: Vec<(&str, Vec<String>)> = contexts
            .iter()
            .map(|(c, s)| (c.as_str(), s.clone()))
            .collect();
        lines.push(document_line(&format!("D{d}"), &borrowed));
        made += take;
        d += 1;
    }
    Corpus::parse_str(&lines.join("\n")).unwrap()
}

// ---- independent oracles

/// Lowercased alphanumeric runs with the default stopwords removed.
pub fn naive_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .filter(|w| !equnova::bm25::DEFAULT_STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// BM25 computed by counting directly over context texts.
pub fn naive_bm25(corpus: &Corpus, query: &[String], ordinal: usize, k1: f64, b: f64) -> f64 {
    let docs: Vec<Vec<String>> = corpus.contexts().map(|c| naive_tokens(&c.text)).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    let doc = &docs[ordinal];
    let len = doc.len() as f64;
    let mut score = 0.0;
    for term in query {
        let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
        let tf = doc.iter().filter(|t| *t == term).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
    }
    score
}

/// Weak components by repeatedly merging any two groups joined by an edge.
pub fn transitive_merge(n: usize, edges: &[(usize, usize)]) -> BTreeSet<BTreeSet<usize>> {
    let mut groups: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                let joined = edges.iter().any(|&(a, b)| {
                    (groups[i].contains(&a) && groups[j].contains(&b))
                        || (groups[i].contains(&b) && groups[j].contains(&a))
                });
                if joined {
                    let g = groups.remove(j);
                    groups[i].extend(g);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            return groups.into_iter().collect();
        }
    }
}

/// The novelty score written out by hand over exact rationals.
pub fn oracle_ns(
    novel: i64,
    na: i64,
    sn: i64,
    nn: i64,
    variant: equnova::Variant,
) -> num_rational::Rational64 {
    use equnova::Variant::*;
    let sf = match variant {
        Relaxed => na + sn + nn.min(1),
        Partial => na + nn.min(1),
        Exact => na + sn + nn,
    };
    if novel == 0 {
        return num_rational::Rational64::from_integer(0);
    }
    num_rational::Rational64::new(novel * (novel + 1), novel + sf)
}

/// Maximum DCG over every permutation of `answers` (each a list of per-sentence nugget sets).
pub fn brute_force_max_dcg(answers: &[Vec<BTreeSet<usize>>], variant: equnova::Variant) -> f64 {
    let mut idx: Vec<usize> = (0..answers.len()).collect();
    let mut best = f64::NEG_INFINITY;
    permute(&mut idx, 0, &mut |perm| {
        let ordered: Vec<&[BTreeSet<usize>]> =
            perm.iter().map(|&i| answers[i].as_slice()).collect();
        let d = oracle_dcg(&ordered, variant);
        if d > best {
            best = d;
        }
    });
    if answers.is_empty() {
        0.0
    } else {
        best
    }
}

/// DCG with the discount and counts written out directly.
pub fn oracle_dcg(ordered: &[&[BTreeSet<usize>]], variant: equnova::Variant) -> f64 {
    let mut seen = BTreeSet::new();
    let mut total = 0.0;
    for (i, sentences) in ordered.iter().enumerate() {
        let mut novel = BTreeSet::new();
        let (mut na, mut sn, mut nn) = (0, 0, 0);
        for s in sentences.iter() {
            if s.is_empty() {
                na += 1;
            } else if s.iter().any(|x| !seen.contains(x)) {
                nn += 1;
                novel.extend(s.iter().filter(|x| !seen.contains(*x)).copied());
            } else {
                sn += 1;
            }
        }
        let ns = oracle_ns(novel.len() as i64, na, sn, nn, variant);
        total += (*ns.numer() as f64 / *ns.denom() as f64) / ((i + 2) as f64).log2();
        for s in sentences.iter() {
            seen.extend(s.iter().copied());
        }
    }
    total
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}
