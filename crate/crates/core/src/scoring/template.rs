//! Rule-based question generation.
//!
//! Focus spans are found in sentence order:
//!
//! 1. Capitalized runs: maximal runs of words that start with an uppercase
//!    letter and are not stopwords, separated only by whitespace. The first
//!    word of the sentence only qualifies when it is acronym-like (another
//!    uppercase letter after the first) or the run continues past it.
//!    - preceded by a location preposition (see [`LOCATION_PREPOSITIONS`]):
//!      `Where <window before the preposition>?`
//!    - at the start of the sentence: `Who <window after the run>?`
//!    - otherwise: `What <window before the run>?`
//! 2. Numbers: all-digit words not glued to a preceding word by a hyphen
//!    (so the `19` in `COVID-19` is not a number). The snippet extends to the
//!    following word when only whitespace separates them:
//!    `How many <following word> <window before the number>?`
//!
//! A window is the sentence text spanning the (up to) three content words
//! closest to the focus on the given side, from the first of them to the end
//! of the last. Content words are words the index tokenizer keeps.
//!
//! If neither rule fires, one fallback question `What is known about <t>?`
//! is built from the content term `t` with the highest idf (first occurrence
//! wins ties), with the whole trimmed sentence as its snippet.
//!
//! Questions without content tokens and duplicate question texts are
//! dropped; at most `k` are returned. Snippets are always substrings of the
//! source sentence. Question ids are `<sentence_id>-Q<i>`.

use std::sync::Arc;

use super::{GeneratedQuestion, QuestionGenerator};
use crate::bm25::words;
use crate::corpus::Sentence;
use crate::error::Result;
use crate::Index;

pub const LOCATION_PREPOSITIONS: &[&str] = &[
    "in",
    "from",
    "at",
    "near",
    "within",
    "across",
    "throughout",
    "inside",
    "outside",
];

#[derive(Debug, Clone)]
pub struct TemplateGenerator {
    index: Arc<Index>,
}

impl TemplateGenerator {
    pub fn new(index: Arc<Index>) -> Self {
        TemplateGenerator { index }
    }
}

impl QuestionGenerator for TemplateGenerator {
    fn generate(&self, sentence: &Sentence, k: usize) -> Result<Vec<GeneratedQuestion>> {
        Ok(template_generate(sentence, k, &self.index))
    }
}

fn is_capitalized(word: &str, index: &Index) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
        && !index.config.stopwords.contains(&word.to_lowercase())
}

const WINDOW: usize = 3;

fn is_content(word: &str, index: &Index) -> bool {
    !index.config.stopwords.contains(&word.to_lowercase())
}

/// Word indices of the last `WINDOW` content words among `ws[..end]`.
fn window_before(text: &str, ws: &[(usize, usize)], end: usize, index: &Index) -> Vec<usize> {
    let mut picked: Vec<usize> = (0..end)
        .rev()
        .filter(|&i| is_content(&text[ws[i].0..ws[i].1], index))
        .take(WINDOW)
        .collect();
    picked.reverse();
    picked
}

/// Word indices of the first `WINDOW` content words among `ws[start..]`.
fn window_after(text: &str, ws: &[(usize, usize)], start: usize, index: &Index) -> Vec<usize> {
    (start..ws.len())
        .filter(|&i| is_content(&text[ws[i].0..ws[i].1], index))
        .take(WINDOW)
        .collect()
}

/// Sentence text covering a window. A sentence-initial word that is not
/// acronym-like is lowercased.
fn render(text: &str, ws: &[(usize, usize)], window: &[usize]) -> String {
    let (Some(&first), Some(&last)) = (window.first(), window.last()) else {
        return String::new();
    };
    let clause = &text[ws[first].0..ws[last].1];
    if first == 0 && !is_acronym(&text[ws[0].0..ws[0].1]) {
        let mut chars = clause.chars();
        match chars.next() {
            Some(c) => c.to_lowercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        clause.to_string()
    }
}

fn is_acronym(word: &str) -> bool {
    word.chars().skip(1).any(char::is_uppercase)
}

fn question(head: &str, clause: &str) -> String {
    if clause.is_empty() {
        format!("{head}?")
    } else {
        format!("{head} {clause}?")
    }
}

pub fn template_generate(sentence: &Sentence, k: usize, index: &Index) -> Vec<GeneratedQuestion> {
    let text = sentence.text.as_str();
    let ws = words(text);
    let word = |i: usize| &text[ws[i].0..ws[i].1];
    let gap_is_space = |i: usize| text[ws[i].1..ws[i + 1].0].chars().all(char::is_whitespace);
    let continues_run =
        |i: usize| i + 1 < ws.len() && is_capitalized(word(i + 1), index) && gap_is_space(i);

    // (question, snippet byte range)
    let mut drafts: Vec<(String, (usize, usize))> = Vec::new();
    let mut i = 0;
    while i < ws.len() {
        let w = word(i);
        let starts_run = is_capitalized(w, index) && (i > 0 || is_acronym(w) || continues_run(i));
        if starts_run {
            let mut j = i;
            while continues_run(j) {
                j += 1;
            }
            let snippet = (ws[i].0, ws[j].1);
            let prev = (i > 0).then(|| word(i - 1).to_lowercase());
            let q = if prev
                .as_deref()
                .is_some_and(|p| LOCATION_PREPOSITIONS.contains(&p))
            {
                question(
                    "Where",
                    &render(text, &ws, &window_before(text, &ws, i - 1, index)),
                )
            } else if i == 0 {
                question(
                    "Who",
                    &render(text, &ws, &window_after(text, &ws, j + 1, index)),
                )
            } else {
                question(
                    "What",
                    &render(text, &ws, &window_before(text, &ws, i, index)),
                )
            };
            drafts.push((q, snippet));
            i = j + 1;
            continue;
        }
        let glued = ws[i].0 > 0 && {
            let before = &text[..ws[i].0];
            let mut rev = before.chars().rev();
            rev.next() == Some('-') && rev.next().is_some_and(char::is_alphanumeric)
        };
        if !glued && w.chars().all(|c| c.is_ascii_digit()) {
            let (unit, end) = if i + 1 < ws.len() && gap_is_space(i) {
                (word(i + 1), ws[i + 1].1)
            } else {
                ("", ws[i].1)
            };
            let clause = render(text, &ws, &window_before(text, &ws, i, index));
            let head = if unit.is_empty() {
                "How many".to_string()
            } else {
                format!("How many {unit}")
            };
            drafts.push((question(&head, &clause), (ws[i].0, end)));
        }
        i += 1;
    }

    if drafts.is_empty() {
        let mut best: Option<(String, f64)> = None;
        for term in index.tokenize(text) {
            let idf = index.idf(&term);
            if best.as_ref().is_none_or(|(_, b)| idf > *b) {
                best = Some((term, idf));
            }
        }
        if let Some((term, _)) = best {
            let trimmed = text.trim();
            let start = text.find(trimmed).unwrap_or(0);
            drafts.push((
                format!("What is known about {term}?"),
                (start, start + trimmed.len()),
            ));
        }
    }

    let mut out: Vec<GeneratedQuestion> = Vec::new();
    for (q, (s, e)) in drafts {
        if out.len() == k {
            break;
        }
        if index.tokenize(&q).is_empty() || out.iter().any(|g| g.text == q) || s >= e {
            continue;
        }
        out.push(GeneratedQuestion {
            gqid: format!("{}-Q{}", sentence.sentence_id, out.len()),
            text: q,
            source_sentence: sentence.sentence_id.clone(),
            answer_snippet: text[s..e].to_string(),
        });
    }
    out
}
