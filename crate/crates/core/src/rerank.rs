//! Novelty scoring and greedy novelty re-ranking.
//!
//! The novelty score of an answer given the nuggets already seen is
//!
//! ```text
//! NS = n·(n + 1) / (n + SF)
//! ```
//!
//! with `n` the number of novel nuggets and a sentence factor `SF` that
//! depends on the variant (`na`: sentences without nuggets, `sn`: sentences
//! whose nuggets were all seen, `nn`: sentences with a novel nugget):
//!
//! | variant | SF                        |
//! |---------|---------------------------|
//! | Relaxed | na + sn + min(nn, 1)      |
//! | Partial | na + min(nn, 1)           |
//! | Exact   | na + sn + nn              |
//!
//! The same scoring drives both the re-ranker (with EQG components standing in
//! for nuggets) and the evaluator (with judged nugget labels).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::AnswerSpan;
use crate::eqg::{Component, Eqg, NuggetQuestion};
use crate::error::{Error, Result};
use crate::scalar::Gain;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Relaxed,
    Partial,
    #[default]
    Exact,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Relaxed, Variant::Partial, Variant::Exact];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Relaxed => "relaxed",
            Variant::Partial => "partial",
            Variant::Exact => "exact",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relaxed" => Ok(Variant::Relaxed),
            "partial" => Ok(Variant::Partial),
            "exact" => Ok(Variant::Exact),
            other => Err(format!("unknown variant {other:?} (relaxed|partial|exact)")),
        }
    }
}

/// Inputs of the novelty score for one answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NoveltyCounts {
    /// Nuggets in the answer not seen before.
    pub novel: u32,
    /// Sentences with no nuggets.
    pub no_nugget: u32,
    /// Sentences whose nuggets were all seen before.
    pub seen_only: u32,
    /// Sentences with at least one novel nugget.
    pub with_novel: u32,
}

impl NoveltyCounts {
    pub fn from_signed(
        novel: i64,
        no_nugget: i64,
        seen_only: i64,
        with_novel: i64,
    ) -> Result<Self> {
        let c = |v: i64| u32::try_from(v).map_err(|_| Error::NegativeCount);
        Ok(NoveltyCounts {
            novel: c(novel)?,
            no_nugget: c(no_nugget)?,
            seen_only: c(seen_only)?,
            with_novel: c(with_novel)?,
        })
    }

    /// Counts for an answer given the nuggets of each of its sentences.
    pub fn of<N: Eq + Hash + Ord>(sentences: &[BTreeSet<N>], seen: &HashSet<N>) -> Self {
        let mut novel: BTreeSet<&N> = BTreeSet::new();
        let mut counts = NoveltyCounts::default();
        for nuggets in sentences {
            if nuggets.is_empty() {
                counts.no_nugget += 1;
                continue;
            }
            let mut any_novel = false;
            for n in nuggets.iter().filter(|n| !seen.contains(*n)) {
                any_novel = true;
                novel.insert(n);
            }
            if any_novel {
                counts.with_novel += 1;
            } else {
                counts.seen_only += 1;
            }
        }
        counts.novel = novel.len() as u32;
        counts
    }

    pub fn sentence_factor(&self, variant: Variant) -> u32 {
        match variant {
            Variant::Relaxed => self.no_nugget + self.seen_only + self.with_novel.min(1),
            Variant::Partial => self.no_nugget + self.with_novel.min(1),
            Variant::Exact => self.no_nugget + self.seen_only + self.with_novel,
        }
    }
}

pub fn novelty_score<T: Gain>(counts: &NoveltyCounts, variant: Variant) -> T {
    let n = counts.novel;
    if n == 0 {
        return T::zero();
    }
    let sf = counts.sentence_factor(variant);
    T::from_count(n) * T::from_count(n + 1) / T::from_count(n + sf)
}

/// Greedy max-NS ordering of `answers` (each a list of per-sentence nugget
/// sets). Ties go to the earlier answer; once no answer has positive NS the
/// rest follow in input order with NS 0. Returns `(input index, NS at selection)`.
pub fn greedy_order<N, T>(answers: &[Vec<BTreeSet<N>>], variant: Variant) -> Vec<(usize, T)>
where
    N: Eq + Hash + Ord + Clone,
    T: Gain,
{
    let mut placed = vec![false; answers.len()];
    let mut seen: HashSet<N> = HashSet::new();
    let mut order = Vec::with_capacity(answers.len());
    loop {
        let mut best: Option<(usize, T)> = None;
        for (i, a) in answers.iter().enumerate() {
            if placed[i] {
                continue;
            }
            let ns: T = novelty_score(&NoveltyCounts::of(a, &seen), variant);
            if best.as_ref().is_none_or(|(_, b)| ns > *b) {
                best = Some((i, ns));
            }
        }
        match best {
            Some((i, ns)) if ns > T::zero() => {
                placed[i] = true;
                for sentence in &answers[i] {
                    seen.extend(sentence.iter().cloned());
                }
                order.push((i, ns));
            }
            _ => break,
        }
    }
    order.extend(
        (0..answers.len())
            .filter(|&i| !placed[i])
            .map(|i| (i, T::zero())),
    );
    order
}

/// Which EQG nuggets (component ids) each answer contains.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NuggetAssignment {
    /// Aligned with the answer list.
    pub per_answer: Vec<BTreeSet<usize>>,
    /// nugget id → (answer index, answer snippet) for every supporting question.
    pub provenance: BTreeMap<usize, Vec<(usize, String)>>,
    /// Generated questions whose source sentence is not an answer.
    pub skipped: usize,
}

impl NuggetAssignment {
    pub fn empty(n_answers: usize) -> Self {
        NuggetAssignment {
            per_answer: vec![BTreeSet::new(); n_answers],
            ..Default::default()
        }
    }
}

/// An answer contains nugget `C` when one of the questions generated from it
/// lies in component `C` and `C` produced a nugget-asking question.
/// `answers` holds the source sentence id of each single-sentence answer.
pub fn assign_nuggets(
    answers: &[&str],
    graph: &Eqg,
    components: &[Component],
    nugget_questions: &[NuggetQuestion],
) -> NuggetAssignment {
    let mut assignment = NuggetAssignment::empty(answers.len());
    let answer_of: HashMap<&str, usize> =
        answers.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let live: BTreeSet<usize> = nugget_questions.iter().map(|n| n.component_id).collect();
    for comp in components.iter().filter(|c| live.contains(&c.component_id)) {
        for &m in &comp.members {
            let q = &graph.nodes()[m];
            match answer_of.get(q.source_sentence.as_str()) {
                Some(&a) => {
                    assignment.per_answer[a].insert(comp.component_id);
                    assignment
                        .provenance
                        .entry(comp.component_id)
                        .or_default()
                        .push((a, q.answer_snippet.clone()));
                }
                None => assignment.skipped += 1,
            }
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub span: AnswerSpan,
    /// 1-based rank before re-ranking.
    pub original_rank: usize,
    pub relevance: f64,
    /// 1-based rank after re-ranking.
    pub final_rank: usize,
    /// NS at selection time, or relevance for the zero-novelty tail.
    pub score: f64,
}

/// Reorders answers by greedy nugget novelty. `answers` must be in original
/// rank order and aligned with `assignment.per_answer`.
pub fn greedy_rerank(
    answers: &[RankedAnswer],
    assignment: &NuggetAssignment,
    variant: Variant,
) -> Vec<RankedAnswer> {
    assert_eq!(answers.len(), assignment.per_answer.len());
    let per_sentence: Vec<Vec<BTreeSet<usize>>> = assignment
        .per_answer
        .iter()
        .map(|n| vec![n.clone()])
        .collect();
    greedy_order::<usize, f64>(&per_sentence, variant)
        .into_iter()
        .enumerate()
        .map(|(pos, (i, ns))| {
            let mut a = answers[i].clone();
            a.final_rank = pos + 1;
            a.score = if ns > 0.0 { ns } else { a.relevance };
            a
        })
        .collect()
}

/// One line of a run file: `qid Q0 <context_id>:<first>-<last> rank score tag`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub question_id: String,
    pub span: AnswerSpan,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

impl fmt::Display for RunRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} Q0 {} {} {:.6} {}",
            self.question_id, self.span, self.rank, self.score, self.tag
        )
    }
}

impl FromStr for RunRecord {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _q0, span, rank, score, tag] = fields[..] else {
            return Err(format!("expected 6 fields, got {}", fields.len()));
        };
        Ok(RunRecord {
            question_id: qid.to_string(),
            span: span.parse()?,
            rank: rank.parse().map_err(|_| format!("bad rank {rank:?}"))?,
            score: score.parse().map_err(|_| format!("bad score {score:?}"))?,
            tag: tag.to_string(),
        })
    }
}
