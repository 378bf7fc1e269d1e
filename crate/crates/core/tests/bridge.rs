mod common;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use equnova::pipeline::{run_pipeline, EntailmentBackend};
use equnova::scoring::{
    BridgeClient, BridgeConfig, EntailmentScorer, Question, QuestionGenerator, RelevanceScorer,
};
use equnova::{Error, PipelineConfig, Scorers, Sentence};
use serde_json::{json, Value};

fn tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn overlap(a: &str, b: &str) -> f64 {
    let (a, b) = (tokens(a), tokens(b));
    if b.is_empty() {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / b.len() as f64
}

/// Echo service. Batches larger than `reject_over` get a 413.
struct Echo {
    url: String,
    requests: Arc<AtomicUsize>,
}

fn spawn_echo(reject_over: usize, malformed: bool) -> Echo {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            counter.fetch_add(1, Ordering::SeqCst);
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let input: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
            let (status, out) = match req.url() {
                "/health" => (200, json!({"backend": "echo", "version": "1"})),
                "/relevance" => {
                    let q = input["question"].as_str().unwrap_or("");
                    let s = input["sentences"].as_array().cloned().unwrap_or_default();
                    if s.len() > reject_over {
                        (413, json!({"error": "batch too large"}))
                    } else {
                        let mut scores: Vec<f64> =
                            s.iter().map(|x| overlap(x.as_str().unwrap(), q)).collect();
                        if malformed {
                            scores.pop();
                        }
                        (200, json!({"scores": scores}))
                    }
                }
                "/entail" => {
                    let pairs = input["pairs"].as_array().cloned().unwrap_or_default();
                    if pairs.len() > reject_over {
                        (413, json!({"error": "batch too large"}))
                    } else {
                        let p: Vec<f64> = pairs
                            .iter()
                            .map(|p| overlap(p[0].as_str().unwrap(), p[1].as_str().unwrap()))
                            .map(|x| if malformed { x + 1.5 } else { x })
                            .collect();
                        (200, json!({"probabilities": p}))
                    }
                }
                "/generate" => {
                    let s = input["sentence"].as_str().unwrap_or("");
                    let k = input["k"].as_u64().unwrap_or(1) as usize;
                    let qs: Vec<Value> = s
                        .split_whitespace()
                        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
                        .filter(|w| w.len() > 3)
                        .take(if malformed { k + 1 } else { k })
                        .map(|w| json!({"text": format!("What about {w}?"), "answer_snippet": w}))
                        .collect();
                    (200, json!({"questions": qs}))
                }
                _ => (404, json!({"error": "not found"})),
            };
            let resp = tiny_http::Response::from_string(out.to_string())
                .with_status_code(status)
                .with_header(
                    "Content-Type: application/json"
                        .parse::<tiny_http::Header>()
                        .unwrap(),
                );
            let _ = req.respond(resp);
        }
    });
    Echo { url, requests }
}

fn client(url: &str, max_batch: usize) -> BridgeClient {
    BridgeClient::new(BridgeConfig {
        url: url.to_string(),
        max_batch,
        timeout_secs: 5,
        ..BridgeConfig::default()
    })
    .unwrap()
}

fn sentence(text: &str) -> Sentence {
    Sentence {
        sentence_id: "S0".into(),
        text: text.into(),
        char_start: 0,
        char_end: text.chars().count(),
    }
}

#[test]
fn health_reports_backend() {
    let echo = spawn_echo(usize::MAX, false);
    let h = client(&echo.url, 64).health().unwrap();
    assert_eq!(h["backend"], "echo");
}

#[test]
fn scores_are_aligned_across_chunks() {
    let echo = spawn_echo(usize::MAX, false);
    let c = client(&echo.url, 3);
    let q = Question::new("Q", "virus origin").unwrap();
    let sentences: Vec<String> = (0..10)
        .map(|i| {
            if i % 2 == 0 {
                format!("virus {i}")
            } else {
                format!("other {i}")
            }
        })
        .collect();
    let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
    let scores = c.relevance(&q, &refs).unwrap();
    assert_eq!(scores.len(), 10);
    for (i, s) in scores.iter().enumerate() {
        assert_eq!(*s, if i % 2 == 0 { 0.5 } else { 0.0 }, "sentence {i}");
    }
    assert_eq!(echo.requests.load(Ordering::SeqCst), 4);

    let pairs: Vec<(&str, &str)> = vec![("a b", "a b"), ("a", "a b"), ("c", "a b")];
    assert_eq!(c.entail(&pairs).unwrap(), vec![1.0, 0.5, 0.0]);
}

#[test]
fn stateless_repeat_calls_agree() {
    let echo = spawn_echo(usize::MAX, false);
    let c = client(&echo.url, 64);
    let a = c
        .entailment_probability("the virus spreads", "virus spreads")
        .unwrap();
    let b = c
        .entailment_probability("the virus spreads", "virus spreads")
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a, 1.0);
}

#[test]
fn generated_questions_respect_contract() {
    let echo = spawn_echo(usize::MAX, false);
    let c = client(&echo.url, 64);
    let s = sentence("The outbreak originated from Wuhan City.");
    let qs = c.generate(&s, 2).unwrap();
    assert!(qs.len() <= 2 && !qs.is_empty());
    for q in &qs {
        assert!(s.text.contains(&q.answer_snippet));
        assert_eq!(q.source_sentence, "S0");
    }
    let ids: BTreeSet<&str> = qs.iter().map(|q| q.gqid.as_str()).collect();
    assert_eq!(ids.len(), qs.len());
}

#[test]
fn oversized_batch_is_a_transport_error() {
    let echo = spawn_echo(2, false);
    let big = client(&echo.url, 10);
    let q = Question::new("Q", "virus").unwrap();
    let err = big.relevance(&q, &["a", "b", "c", "d"]).unwrap_err();
    assert!(
        matches!(err, Error::Transport(ref m) if m.contains("413")),
        "{err}"
    );
    // Client-side chunking keeps requests under the server's limit.
    let small = client(&echo.url, 2);
    assert_eq!(small.relevance(&q, &["a", "b", "c", "d"]).unwrap().len(), 4);
}

#[test]
fn malformed_responses_are_protocol_errors() {
    let echo = spawn_echo(usize::MAX, true);
    let c = client(&echo.url, 64);
    let q = Question::new("Q", "virus").unwrap();
    assert!(matches!(
        c.relevance(&q, &["a", "b"]),
        Err(Error::Protocol(_))
    ));
    assert!(matches!(c.entail(&[("a", "a")]), Err(Error::Protocol(_))));
    assert!(matches!(
        c.generate(&sentence("Several words here please."), 1),
        Err(Error::Protocol(_))
    ));
}

#[test]
fn unreachable_service_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let c = client(&url, 64);
    assert!(matches!(c.health(), Err(Error::Transport(_))));
    assert!(matches!(c.entail(&[("a", "b")]), Err(Error::Transport(_))));
}

#[test]
fn pipeline_runs_with_bridge_entailment() {
    let echo = spawn_echo(usize::MAX, false);
    let corpus = common::fixture_corpus();
    let index = Arc::new(common::lexical_index(&corpus));
    let config = PipelineConfig {
        entail: EntailmentBackend::Bridge,
        bridge: BridgeConfig {
            url: echo.url.clone(),
            ..BridgeConfig::default()
        },
        ..PipelineConfig::default()
    };
    let scorers = Scorers::from_config(&config, index.clone()).unwrap();
    let q = Question::new("Q1", "What is the origin of COVID-19?").unwrap();
    let a = run_pipeline(&q, &corpus, &index, &scorers, &config, true).unwrap();
    let b = run_pipeline(&q, &corpus, &index, &scorers, &config, true).unwrap();
    assert!(!a.records.is_empty());
    assert_eq!(a.records, b.records);
    assert!(echo.requests.load(Ordering::SeqCst) > 0);
}
