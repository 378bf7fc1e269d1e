//! NDNS: NDCG with the novelty score as gain.
//!
//! `DCG = Σ_r NS_r / log2(r + 1)` over the run in rank order, with novelty
//! judged against nugget labels seen at earlier ranks. The normalizer is the
//! DCG of the greedy ideal ranking over the pool formed by the run's answers
//! plus every judged sentence as a single-sentence answer.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerSpan, Corpus};
use crate::error::{Error, Result};
use crate::rerank::{greedy_order, novelty_score, NoveltyCounts, RunRecord, Variant};
use crate::scalar::Scalar;

/// question id → sentence id → nugget labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Judgments {
    pub questions: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
}

impl Judgments {
    /// Whitespace-separated `question_id sentence_id nugget_label` lines;
    /// blank lines and `#` comments are skipped.
    pub fn load<R: BufRead>(reader: R) -> Result<Judgments> {
        let mut j = Judgments::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            let [qid, sid, label] = fields[..] else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!(
                        "expected `question_id sentence_id nugget_label`, got {} fields",
                        fields.len()
                    ),
                });
            };
            j.questions
                .entry(qid.to_string())
                .or_default()
                .entry(sid.to_string())
                .or_default()
                .insert(label.to_string());
        }
        Ok(j)
    }

    pub fn load_str(s: &str) -> Result<Judgments> {
        Judgments::load(s.as_bytes())
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

/// Run records grouped by question, each group sorted by rank.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    pub questions: BTreeMap<String, Vec<RunRecord>>,
}

impl Run {
    pub fn load<R: BufRead>(reader: R) -> Result<Run> {
        let mut run = Run::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let rec: RunRecord = line.parse().map_err(|message| Error::Parse {
                line: i + 1,
                message,
            })?;
            run.questions
                .entry(rec.question_id.clone())
                .or_default()
                .push(rec);
        }
        for records in run.questions.values_mut() {
            records.sort_by_key(|r| r.rank);
        }
        Ok(run)
    }

    pub fn load_str(s: &str) -> Result<Run> {
        Run::load(s.as_bytes())
    }
}

/// An answer as seen by the metric: an id and its per-sentence nugget sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolAnswer<N> {
    pub id: String,
    pub sentences: Vec<BTreeSet<N>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub answer: String,
    pub counts: NoveltyCounts,
    pub ns: f64,
}

fn discount<S: Scalar>(rank: usize) -> S {
    S::of((rank as f64 + 1.0).log2())
}

/// DCG of answers taken in the given order, with the per-answer NS.
pub fn dcg<N, S>(answers: &[&[BTreeSet<N>]], variant: Variant) -> (S, Vec<(NoveltyCounts, S)>)
where
    N: Eq + Hash + Ord + Clone,
    S: Scalar,
{
    let mut seen: HashSet<N> = HashSet::new();
    let mut total = S::zero();
    let mut trace = Vec::with_capacity(answers.len());
    for (i, sentences) in answers.iter().enumerate() {
        let counts = NoveltyCounts::of(sentences, &seen);
        let ns: S = novelty_score(&counts, variant);
        total = total + ns / discount::<S>(i + 1);
        for s in sentences.iter() {
            seen.extend(s.iter().cloned());
        }
        trace.push((counts, ns));
    }
    (total, trace)
}

/// Greedy max-NS ordering of the pool; ties and the zero-NS tail go by
/// ascending answer id. Returns indices into `pool`.
pub fn ideal_ranking<N>(pool: &[PoolAnswer<N>], variant: Variant) -> Vec<usize>
where
    N: Eq + Hash + Ord + Clone,
{
    let mut by_id: Vec<usize> = (0..pool.len()).collect();
    by_id.sort_by(|&a, &b| pool[a].id.cmp(&pool[b].id));
    let sorted: Vec<Vec<BTreeSet<N>>> = by_id.iter().map(|&i| pool[i].sentences.clone()).collect();
    greedy_order::<N, f64>(&sorted, variant)
        .into_iter()
        .map(|(i, _)| by_id[i])
        .collect()
}

pub fn ideal_dcg<N, S>(pool: &[PoolAnswer<N>], variant: Variant) -> S
where
    N: Eq + Hash + Ord + Clone,
    S: Scalar,
{
    let order = ideal_ranking(pool, variant);
    let ordered: Vec<&[BTreeSet<N>]> = order
        .iter()
        .map(|&i| pool[i].sentences.as_slice())
        .collect();
    dcg::<N, S>(&ordered, variant).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionEval {
    pub question_id: String,
    pub variant: Variant,
    pub dcg: f64,
    pub idcg: f64,
    /// DCG / IDCG, clamped to [0, 1]; 0 when IDCG is 0.
    pub ndns: f64,
    /// Set when the run beat the greedy ideal (greedy was not optimal).
    pub exceeds_ideal: bool,
    pub trace: Vec<TraceEntry>,
    pub unresolved: usize,
}

fn sentence_labels(
    judged: &BTreeMap<String, BTreeSet<String>>,
    sentence_id: &str,
) -> BTreeSet<String> {
    judged.get(sentence_id).cloned().unwrap_or_default()
}

/// Scores one question's ranked answers against its judgments.
pub fn evaluate_question<S: Scalar>(
    question_id: &str,
    answers: &[AnswerSpan],
    judged: &BTreeMap<String, BTreeSet<String>>,
    corpus: &Corpus,
    variant: Variant,
) -> QuestionEval {
    let mut unresolved = 0;
    let mut run_answers: Vec<PoolAnswer<String>> = Vec::with_capacity(answers.len());
    for span in answers {
        let sentences = match corpus.span_sentences(span) {
            Ok(ss) => ss
                .iter()
                .map(|s| sentence_labels(judged, &s.sentence_id))
                .collect(),
            Err(_) => {
                unresolved += 1;
                Vec::new()
            }
        };
        run_answers.push(PoolAnswer {
            id: span.to_string(),
            sentences,
        });
    }

    let ordered: Vec<&[BTreeSet<String>]> =
        run_answers.iter().map(|a| a.sentences.as_slice()).collect();
    let (run_dcg, trace) = dcg::<String, S>(&ordered, variant);

    let mut pool: BTreeMap<String, PoolAnswer<String>> = BTreeMap::new();
    for a in &run_answers {
        pool.entry(a.id.clone()).or_insert_with(|| a.clone());
    }
    for (sid, labels) in judged.iter().filter(|(_, l)| !l.is_empty()) {
        let id = corpus
            .span_of(sid)
            .map(|s| s.to_string())
            .unwrap_or_else(|_| sid.clone());
        pool.entry(id.clone()).or_insert_with(|| PoolAnswer {
            id,
            sentences: vec![labels.clone()],
        });
    }
    let pool: Vec<PoolAnswer<String>> = pool.into_values().collect();
    let idcg: S = ideal_dcg(&pool, variant);

    let dcg_f = run_dcg.to_f64_lossy();
    let idcg_f = idcg.to_f64_lossy();
    let raw = if idcg_f > 0.0 { dcg_f / idcg_f } else { 0.0 };
    QuestionEval {
        question_id: question_id.to_string(),
        variant,
        dcg: dcg_f,
        idcg: idcg_f,
        ndns: raw.clamp(0.0, 1.0),
        exceeds_ideal: raw > 1.0 + 1e-12,
        trace: run_answers
            .iter()
            .zip(trace)
            .map(|(a, (counts, ns))| TraceEntry {
                answer: a.id.clone(),
                counts,
                ns: ns.to_f64_lossy(),
            })
            .collect(),
        unresolved,
    }
}

/// Evaluates every judged question; a judged question missing from the run
/// scores 0. Run questions without judgments are not scored.
pub fn evaluate_run<S: Scalar>(
    run: &Run,
    judgments: &Judgments,
    corpus: &Corpus,
    variant: Variant,
) -> Vec<QuestionEval> {
    judgments
        .questions
        .iter()
        .map(|(qid, judged)| {
            let spans: Vec<AnswerSpan> = run
                .questions
                .get(qid)
                .map(|recs| recs.iter().map(|r| r.span.clone()).collect())
                .unwrap_or_default();
            evaluate_question::<S>(qid, &spans, judged, corpus, variant)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub question_id: String,
    pub scores: BTreeMap<Variant, f64>,
    pub traces: BTreeMap<Variant, Vec<TraceEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variants: Vec<Variant>,
    pub questions: Vec<QuestionReport>,
    pub means: BTreeMap<Variant, f64>,
    pub unresolved: usize,
    pub unjudged_questions: Vec<String>,
    pub greedy_gaps: usize,
}

/// Macro-averages per-question results (one inner vector per variant, all
/// covering the same questions in the same order).
pub fn report(per_variant: &[Vec<QuestionEval>], unjudged_questions: Vec<String>) -> EvalReport {
    let variants: Vec<Variant> = per_variant
        .iter()
        .filter_map(|evals| evals.first().map(|e| e.variant))
        .collect();
    let mut questions: BTreeMap<String, QuestionReport> = BTreeMap::new();
    let mut means = BTreeMap::new();
    let mut unresolved = 0;
    let mut greedy_gaps = 0;
    for evals in per_variant {
        let Some(first) = evals.first() else { continue };
        let v = first.variant;
        let mean = evals.iter().map(|e| e.ndns).sum::<f64>() / evals.len() as f64;
        means.insert(v, mean);
        unresolved = unresolved.max(evals.iter().map(|e| e.unresolved).sum());
        greedy_gaps += evals.iter().filter(|e| e.exceeds_ideal).count();
        for e in evals {
            let q = questions
                .entry(e.question_id.clone())
                .or_insert_with(|| QuestionReport {
                    question_id: e.question_id.clone(),
                    scores: BTreeMap::new(),
                    traces: BTreeMap::new(),
                });
            q.scores.insert(v, e.ndns);
            q.traces.insert(v, e.trace.clone());
        }
    }
    EvalReport {
        variants,
        questions: questions.into_values().collect(),
        means,
        unresolved,
        unjudged_questions,
        greedy_gaps,
    }
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let headers: Vec<String> = self
            .variants
            .iter()
            .map(|v| format!("NDNS-{}", capitalize(v.name())))
            .collect();
        let qwidth = self
            .questions
            .iter()
            .map(|q| q.question_id.len())
            .chain(["question".len(), "mean".len()])
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        let _ = write!(out, "{:<qwidth$}", "question");
        for h in &headers {
            let _ = write!(out, "  {h:>12}");
        }
        out.push('\n');
        for q in &self.questions {
            let _ = write!(out, "{:<qwidth$}", q.question_id);
            for v in &self.variants {
                let _ = write!(out, "  {:>12.4}", q.scores.get(v).copied().unwrap_or(0.0));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<qwidth$}", "mean");
        for v in &self.variants {
            let _ = write!(out, "  {:>12.4}", self.means.get(v).copied().unwrap_or(0.0));
        }
        out.push('\n');
        out
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
