//! HTTP/JSON client for an external model service.
//!
//! Wire format:
//!
//! | endpoint          | request                                   | response                                   |
//! |-------------------|-------------------------------------------|--------------------------------------------|
//! | `POST /relevance` | `{"question": str, "sentences": [str]}`   | `{"scores": [float]}`                      |
//! | `POST /generate`  | `{"sentence": str, "k": int}`             | `{"questions": [{"text", "answer_snippet"}]}` |
//! | `POST /entail`    | `{"pairs": [[premise, hypothesis]]}`      | `{"probabilities": [float]}`               |
//! | `GET /health`     |                                           | `{"backend": str, "version": str, ...}`    |
//!
//! Batches larger than `max_batch` are split client-side; the number of
//! requests in flight across threads is bounded by `max_in_flight`.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{EntailmentScorer, GeneratedQuestion, Question, QuestionGenerator, RelevanceScorer};
use crate::corpus::Sentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeConfig {
    pub url: String,
    pub max_batch: usize,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            url: "http://127.0.0.1:8765".into(),
            max_batch: 64,
            max_in_flight: 8,
            timeout_secs: 60,
        }
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct BridgeClient {
    config: BridgeConfig,
    agent: ureq::Agent,
    in_flight: Semaphore,
}

impl std::fmt::Debug for BridgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeClient")
            .field("config", &self.config)
            .finish()
    }
}

#[derive(Serialize)]
struct RelevanceRequest<'a> {
    question: &'a str,
    sentences: &'a [&'a str],
}

#[derive(Deserialize)]
struct RelevanceResponse {
    scores: Vec<f64>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    sentence: &'a str,
    k: usize,
}

#[derive(Deserialize)]
struct WireQuestion {
    text: String,
    answer_snippet: String,
}

#[derive(Deserialize)]
struct GenerateResponse {
    questions: Vec<WireQuestion>,
}

#[derive(Serialize)]
struct EntailRequest<'a> {
    pairs: Vec<[&'a str; 2]>,
}

#[derive(Deserialize)]
struct EntailResponse {
    probabilities: Vec<f64>,
}

fn check_unit_interval(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::Protocol(format!("{what} {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn check_aligned(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(Error::Protocol(format!(
            "{what}: expected {want} values, got {got}"
        )));
    }
    Ok(())
}

impl BridgeClient {
    pub fn new(config: BridgeConfig) -> Result<Self> {
        if config.max_batch == 0 {
            return Err(Error::Config("bridge max_batch must be >= 1".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let in_flight = Semaphore::new(config.max_in_flight);
        Ok(BridgeClient {
            config,
            agent,
            in_flight,
        })
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.url.trim_end_matches('/'), path)
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp> {
        let _permit = self.in_flight.acquire();
        let url = self.url(path);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Error::Transport(format!(
                "POST {url}: HTTP {}: {}",
                status.as_u16(),
                text.trim()
            )));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| Error::Protocol(format!("POST {url}: bad response body: {e}")))
    }

    /// `GET /health`: backend identity and protocol version.
    pub fn health(&self) -> Result<serde_json::Value> {
        let url = self.url("/health");
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| Error::Transport(format!("GET {url}: {e}")))?;
        if !resp.status().is_success() {
            return Err(Error::Transport(format!(
                "GET {url}: HTTP {}",
                resp.status().as_u16()
            )));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| Error::Protocol(format!("GET {url}: bad response body: {e}")))
    }
}

impl RelevanceScorer for BridgeClient {
    fn relevance(&self, question: &Question, sentences: &[&str]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(sentences.len());
        for chunk in sentences.chunks(self.config.max_batch) {
            let resp: RelevanceResponse = self.post(
                "/relevance",
                &RelevanceRequest {
                    question: &question.text,
                    sentences: chunk,
                },
            )?;
            check_aligned(resp.scores.len(), chunk.len(), "relevance")?;
            check_unit_interval(&resp.scores, "relevance score")?;
            out.extend(resp.scores);
        }
        Ok(out)
    }
}

impl QuestionGenerator for BridgeClient {
    fn generate(&self, sentence: &Sentence, k: usize) -> Result<Vec<GeneratedQuestion>> {
        let resp: GenerateResponse = self.post(
            "/generate",
            &GenerateRequest {
                sentence: &sentence.text,
                k,
            },
        )?;
        if resp.questions.len() > k {
            return Err(Error::Protocol(format!(
                "generate: asked for at most {k} questions, got {}",
                resp.questions.len()
            )));
        }
        resp.questions
            .into_iter()
            .enumerate()
            .map(|(i, q)| {
                if q.answer_snippet.is_empty() || !sentence.text.contains(&q.answer_snippet) {
                    return Err(Error::Protocol(format!(
                        "generate: snippet {:?} is not part of the sentence",
                        q.answer_snippet
                    )));
                }
                if q.text.trim().is_empty() {
                    return Err(Error::Protocol("generate: empty question text".into()));
                }
                Ok(GeneratedQuestion {
                    gqid: format!("{}-Q{i}", sentence.sentence_id),
                    text: q.text,
                    source_sentence: sentence.sentence_id.clone(),
                    answer_snippet: q.answer_snippet,
                })
            })
            .collect()
    }
}

impl EntailmentScorer for BridgeClient {
    fn entail(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.config.max_batch) {
            let resp: EntailResponse = self.post(
                "/entail",
                &EntailRequest {
                    pairs: chunk.iter().map(|&(p, h)| [p, h]).collect(),
                },
            )?;
            check_aligned(resp.probabilities.len(), chunk.len(), "entail")?;
            check_unit_interval(&resp.probabilities, "entailment probability")?;
            out.extend(resp.probabilities);
        }
        Ok(out)
    }
}
