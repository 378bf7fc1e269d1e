//! End-to-end flow for one question: retrieve contexts, rank their
//! sentences, generate questions, build the entailment graph, select nugget
//! questions and re-rank by novelty.

use std::collections::HashSet;
use std::io::BufRead;
use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bm25::{candidate_sentences, CandidateSentence};
use crate::corpus::{AnswerSpan, Corpus};
use crate::eqg::{build_eqg, EqgConfig, EqgDump};
use crate::error::{Error, Result};
use crate::rerank::{assign_nuggets, greedy_rerank, RankedAnswer, RunRecord, Variant};
use crate::scoring::{
    generate_questions, select_top_sentences, BridgeClient, BridgeConfig, EntailmentScorer,
    GeneratedQuestion, GenerationConfig, LexicalEntailment, LexicalRelevance, Question,
    QuestionGenerator, RelevanceScorer, TemplateGenerator,
};
use crate::Index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceBackend {
    Lexical,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorBackend {
    Template,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EntailmentBackend {
    Lexical,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub generation: GenerationConfig,
    pub eqg: EqgConfig,
    pub variant: Variant,
    pub top_contexts: usize,
    pub top_sentences: usize,
    pub max_questions_for_eqg: usize,
    pub relevance: RelevanceBackend,
    pub qgen: GeneratorBackend,
    pub entail: EntailmentBackend,
    pub bridge: BridgeConfig,
    pub rerank: bool,
    pub run_tag: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            generation: GenerationConfig::default(),
            eqg: EqgConfig::default(),
            variant: Variant::Exact,
            top_contexts: 200,
            top_sentences: 1000,
            max_questions_for_eqg: 500,
            relevance: RelevanceBackend::Lexical,
            qgen: GeneratorBackend::Template,
            entail: EntailmentBackend::Lexical,
            bridge: BridgeConfig::default(),
            rerank: true,
            run_tag: "equnova".into(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.generation.validate()?;
        self.eqg.validate()?;
        if self.top_contexts == 0 || self.top_sentences == 0 {
            return Err(Error::Config(
                "top_contexts and top_sentences must be >= 1".into(),
            ));
        }
        if self.run_tag.is_empty() || self.run_tag.chars().any(char::is_whitespace) {
            return Err(Error::Config(
                "run_tag must be non-empty and contain no whitespace".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Expert,
    Consumer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionSet {
    pub questions: Vec<Question>,
    pub task: Option<Task>,
}

impl QuestionSet {
    /// JSONL, one `{"qid": str, "text": str}` per line.
    pub fn load<R: BufRead>(reader: R, task: Option<Task>) -> Result<QuestionSet> {
        let mut questions: Vec<Question> = Vec::new();
        let mut ids = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let q: Question = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            if q.text.trim().is_empty() {
                return Err(parse_err(format!("question {} has empty text", q.qid)));
            }
            if !ids.insert(q.qid.clone()) {
                return Err(Error::DuplicateId(q.qid));
            }
            questions.push(q);
        }
        Ok(QuestionSet { questions, task })
    }
}

/// The three scorer ports the pipeline calls.
#[derive(Clone)]
pub struct Scorers {
    pub relevance: Arc<dyn RelevanceScorer>,
    pub generator: Arc<dyn QuestionGenerator>,
    pub entailment: Arc<dyn EntailmentScorer>,
}

impl Scorers {
    pub fn lexical(index: Arc<Index>) -> Self {
        Scorers {
            relevance: Arc::new(LexicalRelevance::new(index.clone())),
            generator: Arc::new(TemplateGenerator::new(index.clone())),
            entailment: Arc::new(LexicalEntailment::new(index)),
        }
    }

    pub fn from_config(config: &PipelineConfig, index: Arc<Index>) -> Result<Self> {
        let needs_bridge = config.relevance == RelevanceBackend::Bridge
            || config.qgen == GeneratorBackend::Bridge
            || config.entail == EntailmentBackend::Bridge;
        let bridge = if needs_bridge {
            Some(Arc::new(BridgeClient::new(config.bridge.clone())?))
        } else {
            None
        };
        let lexical = Scorers::lexical(index);
        Ok(Scorers {
            relevance: match (config.relevance, &bridge) {
                (RelevanceBackend::Bridge, Some(b)) => b.clone(),
                _ => lexical.relevance,
            },
            generator: match (config.qgen, &bridge) {
                (GeneratorBackend::Bridge, Some(b)) => b.clone(),
                _ => lexical.generator,
            },
            entailment: match (config.entail, &bridge) {
                (EntailmentBackend::Bridge, Some(b)) => b.clone(),
                _ => lexical.entailment,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionRun {
    pub question_id: String,
    pub answers: Vec<RankedAnswer>,
    pub records: Vec<RunRecord>,
    pub eqg: Option<EqgDump>,
}

/// Relevance-ranked top sentences (the context-ranking stage alone).
pub fn rank_sentences(
    question: &Question,
    corpus: &Corpus,
    index: &Index,
    scorers: &Scorers,
    config: &PipelineConfig,
) -> Result<Vec<(CandidateSentence<f64>, f64)>> {
    let ranked = index.search(&question.text, config.top_contexts);
    if ranked.is_empty() {
        return Ok(Vec::new());
    }
    let mut seen = HashSet::new();
    let candidates: Vec<CandidateSentence<f64>> = candidate_sentences(corpus, &ranked)?
        .into_iter()
        .filter(|c| seen.insert(c.sentence_id.clone()))
        .collect();
    let texts: Vec<&str> = candidates
        .iter()
        .map(|c| {
            corpus
                .lookup_sentence(&c.sentence_id)
                .map(|s| s.text.as_str())
        })
        .collect::<Result<_>>()?;
    let scores = scorers.relevance.relevance(question, &texts)?;
    select_top_sentences(candidates, &scores, config.top_sentences)
}

pub fn run_pipeline(
    question: &Question,
    corpus: &Corpus,
    index: &Index,
    scorers: &Scorers,
    config: &PipelineConfig,
    dump_eqg: bool,
) -> Result<QuestionRun> {
    let top = rank_sentences(question, corpus, index, scorers, config)?;
    let answers: Vec<RankedAnswer> = top
        .iter()
        .enumerate()
        .map(|(i, (c, rel))| RankedAnswer {
            span: AnswerSpan::single(c.context_id.clone(), c.position),
            original_rank: i + 1,
            relevance: *rel,
            final_rank: i + 1,
            score: *rel,
        })
        .collect();

    let (answers, eqg) = if config.rerank && !answers.is_empty() {
        let sentence_ids: Vec<&str> = top.iter().map(|(c, _)| c.sentence_id.as_str()).collect();
        let generated: Vec<Vec<GeneratedQuestion>> = sentence_ids
            .par_iter()
            .map(|sid| {
                let sentence = corpus.lookup_sentence(sid)?;
                generate_questions(scorers.generator.as_ref(), sentence, &config.generation)
            })
            .collect::<Result<_>>()?;
        let mut questions: Vec<GeneratedQuestion> = generated.into_iter().flatten().collect();
        let before = questions.len();
        questions.retain(|q| !index.tokenize(&q.text).is_empty());
        if questions.len() < before {
            debug!(
                "{}: dropped {} generated questions without content terms",
                question.qid,
                before - questions.len()
            );
        }
        questions.truncate(config.max_questions_for_eqg);

        let graph = build_eqg(
            questions,
            question,
            scorers.entailment.as_ref(),
            &config.eqg,
        )?;
        let components = graph.connected_components();
        let nuggets = graph.select_nugget_questions(&components, &config.eqg);
        let assignment = assign_nuggets(&sentence_ids, &graph, &components, &nuggets);
        if assignment.skipped > 0 {
            warn!(
                "{}: {} generated questions had no matching answer",
                question.qid, assignment.skipped
            );
        }
        let reranked = greedy_rerank(&answers, &assignment, config.variant);
        let dump = dump_eqg.then(|| graph.dump(&components, &nuggets));
        (reranked, dump)
    } else {
        (answers, None)
    };

    let records = answers
        .iter()
        .map(|a| RunRecord {
            question_id: question.qid.clone(),
            span: a.span.clone(),
            rank: a.final_rank,
            score: a.score,
            tag: config.run_tag.clone(),
        })
        .collect();
    Ok(QuestionRun {
        question_id: question.qid.clone(),
        answers,
        records,
        eqg,
    })
}

#[derive(Debug, Default)]
pub struct BatchOutput {
    pub runs: Vec<QuestionRun>,
    pub failures: Vec<(String, Error)>,
}

impl BatchOutput {
    /// The run file: one record per line, questions in input order.
    pub fn run_file(&self) -> String {
        let mut out = String::new();
        for run in &self.runs {
            for r in &run.records {
                out.push_str(&r.to_string());
                out.push('\n');
            }
        }
        out
    }
}

/// Runs every question; a failing question is recorded and skipped unless
/// `strict`, in which case the first failure (in input order) is returned.
/// Parallelism comes from the ambient rayon pool.
pub fn run_batch(
    questions: &QuestionSet,
    corpus: &Corpus,
    index: &Index,
    scorers: &Scorers,
    config: &PipelineConfig,
    dump_eqg: bool,
    strict: bool,
) -> Result<BatchOutput> {
    config.validate()?;
    let results: Vec<Result<QuestionRun>> = questions
        .questions
        .par_iter()
        .map(|q| run_pipeline(q, corpus, index, scorers, config, dump_eqg))
        .collect();
    let mut out = BatchOutput::default();
    for (q, r) in questions.questions.iter().zip(results) {
        match r {
            Ok(run) => out.runs.push(run),
            Err(e) if strict => return Err(e),
            Err(e) => {
                warn!("question {} failed: {e}", q.qid);
                out.failures.push((q.qid.clone(), e));
            }
        }
    }
    Ok(out)
}
