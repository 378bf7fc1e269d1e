//! Document → context → sentence hierarchy and its JSONL ingestion.
//!
//! One document per line:
//!
//! ```json
//! {"document_id": "D1", "title": "", "contexts": [
//!   {"context_id": "D1-C0", "text": "...", "sentences": [{"sentence_id": "D1-C0-S0", "start": 0, "end": 12}]}
//! ]}
//! ```
//!
//! `start`/`end` count Unicode scalar values (not bytes) into the context text;
//! sentence text is sliced from the context rather than stored twice.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub sentence_id: String,
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub context_id: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub document_id: String,
    pub title: String,
    pub contexts: Vec<Context>,
}

/// Position of a sentence in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SentenceCoord {
    pub document: usize,
    pub context: usize,
    pub sentence: usize,
    /// Global context ordinal (document order, then context order).
    pub ordinal: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    id_index: HashMap<String, SentenceCoord>,
    context_index: HashMap<String, usize>,
    // ordinal -> (document, context)
    ordinals: Vec<(usize, usize)>,
}

/// Consecutive sentences `first..=last` of a single context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub context_id: String,
    pub first_sentence: usize,
    pub last_sentence: usize,
}

impl AnswerSpan {
    pub fn single(context_id: impl Into<String>, sentence: usize) -> Self {
        AnswerSpan {
            context_id: context_id.into(),
            first_sentence: sentence,
            last_sentence: sentence,
        }
    }

    pub fn len(&self) -> usize {
        self.last_sentence.saturating_sub(self.first_sentence) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for AnswerSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}-{}",
            self.context_id, self.first_sentence, self.last_sentence
        )
    }
}

impl FromStr for AnswerSpan {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (context_id, range) = s
            .rsplit_once(':')
            .ok_or_else(|| format!("expected <context_id>:<first>-<last>, got {s:?}"))?;
        let (first, last) = range
            .split_once('-')
            .ok_or_else(|| format!("expected <first>-<last> in {s:?}"))?;
        let first = first
            .parse()
            .map_err(|_| format!("bad first sentence index in {s:?}"))?;
        let last = last
            .parse()
            .map_err(|_| format!("bad last sentence index in {s:?}"))?;
        if context_id.is_empty() {
            return Err(format!("empty context id in {s:?}"));
        }
        Ok(AnswerSpan {
            context_id: context_id.to_string(),
            first_sentence: first,
            last_sentence: last,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RawSentence {
    sentence_id: String,
    start: usize,
    end: usize,
}

#[derive(Serialize, Deserialize)]
struct RawContext {
    context_id: String,
    text: String,
    sentences: Vec<RawSentence>,
}

#[derive(Serialize, Deserialize)]
struct RawDocument {
    document_id: String,
    #[serde(default)]
    title: String,
    contexts: Vec<RawContext>,
}

fn slice_chars(text: &str, start: usize, end: usize) -> Option<&str> {
    let mut byte_start = None;
    let mut byte_end = None;
    for (i, (b, _)) in text.char_indices().enumerate() {
        if i == start {
            byte_start = Some(b);
        }
        if i == end {
            byte_end = Some(b);
            break;
        }
    }
    let n = text.chars().count();
    if end == n {
        byte_end = Some(text.len());
    }
    match (byte_start, byte_end) {
        (Some(s), Some(e)) if s <= e => Some(&text[s..e]),
        _ => None,
    }
}

impl Corpus {
    /// Parses a JSONL stream, one document per non-blank line.
    pub fn parse<R: BufRead>(reader: R) -> Result<Corpus> {
        let mut corpus = Corpus::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            corpus.push_raw(raw)?;
        }
        Ok(corpus)
    }

    pub fn parse_str(s: &str) -> Result<Corpus> {
        Corpus::parse(s.as_bytes())
    }

    fn push_raw(&mut self, raw: RawDocument) -> Result<()> {
        if self
            .documents
            .iter()
            .any(|d| d.document_id == raw.document_id)
        {
            return Err(Error::DuplicateId(raw.document_id));
        }
        let doc_idx = self.documents.len();
        let mut contexts = Vec::with_capacity(raw.contexts.len());
        for (ctx_idx, rc) in raw.contexts.into_iter().enumerate() {
            if self.context_index.contains_key(&rc.context_id) {
                return Err(Error::DuplicateId(rc.context_id));
            }
            if rc.sentences.is_empty() {
                return Err(Error::EmptyContext(rc.context_id));
            }
            let n_chars = rc.text.chars().count();
            let ordinal = self.ordinals.len();
            let mut sentences = Vec::with_capacity(rc.sentences.len());
            let mut prev_end = 0;
            for (s_idx, rs) in rc.sentences.into_iter().enumerate() {
                if rs.start >= rs.end || rs.end > n_chars || rs.start < prev_end {
                    return Err(Error::OffsetOutOfBounds {
                        id: rs.sentence_id,
                        start: rs.start,
                        end: rs.end,
                        len: n_chars,
                    });
                }
                prev_end = rs.end;
                if self.id_index.contains_key(&rs.sentence_id) {
                    return Err(Error::DuplicateId(rs.sentence_id));
                }
                let text = slice_chars(&rc.text, rs.start, rs.end)
                    .expect("offsets validated")
                    .to_string();
                self.id_index.insert(
                    rs.sentence_id.clone(),
                    SentenceCoord {
                        document: doc_idx,
                        context: ctx_idx,
                        sentence: s_idx,
                        ordinal,
                    },
                );
                sentences.push(Sentence {
                    sentence_id: rs.sentence_id,
                    text,
                    char_start: rs.start,
                    char_end: rs.end,
                });
            }
            self.context_index.insert(rc.context_id.clone(), ordinal);
            self.ordinals.push((doc_idx, ctx_idx));
            contexts.push(Context {
                context_id: rc.context_id,
                text: rc.text,
                sentences,
            });
        }
        self.documents.push(Document {
            document_id: raw.document_id,
            title: raw.title,
            contexts,
        });
        Ok(())
    }

    /// Writes the corpus back in the same JSONL schema it was read from.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for doc in &self.documents {
            let raw = RawDocument {
                document_id: doc.document_id.clone(),
                title: doc.title.clone(),
                contexts: doc
                    .contexts
                    .iter()
                    .map(|c| RawContext {
                        context_id: c.context_id.clone(),
                        text: c.text.clone(),
                        sentences: c
                            .sentences
                            .iter()
                            .map(|s| RawSentence {
                                sentence_id: s.sentence_id.clone(),
                                start: s.char_start,
                                end: s.char_end,
                            })
                            .collect(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &raw)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSONL serialization.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        format!("{:x}", Sha256::digest(&buf))
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn n_sentences(&self) -> usize {
        self.id_index.len()
    }

    pub fn n_contexts(&self) -> usize {
        self.ordinals.len()
    }

    /// Contexts in ordinal order.
    pub fn contexts(&self) -> impl Iterator<Item = &Context> + '_ {
        self.ordinals
            .iter()
            .map(move |&(d, c)| &self.documents[d].contexts[c])
    }

    pub fn context_by_ordinal(&self, ordinal: usize) -> Option<&Context> {
        self.ordinals
            .get(ordinal)
            .map(|&(d, c)| &self.documents[d].contexts[c])
    }

    pub fn context(&self, context_id: &str) -> Option<&Context> {
        self.context_index
            .get(context_id)
            .and_then(|&o| self.context_by_ordinal(o))
    }

    pub fn context_ordinal(&self, context_id: &str) -> Option<usize> {
        self.context_index.get(context_id).copied()
    }

    pub fn coord(&self, sentence_id: &str) -> Option<SentenceCoord> {
        self.id_index.get(sentence_id).copied()
    }

    pub fn lookup_sentence(&self, sentence_id: &str) -> Result<&Sentence> {
        let c = self
            .coord(sentence_id)
            .ok_or_else(|| Error::UnknownSentence(sentence_id.to_string()))?;
        Ok(&self.documents[c.document].contexts[c.context].sentences[c.sentence])
    }

    /// The single-sentence span addressing `sentence_id`.
    pub fn span_of(&self, sentence_id: &str) -> Result<AnswerSpan> {
        let c = self
            .coord(sentence_id)
            .ok_or_else(|| Error::UnknownSentence(sentence_id.to_string()))?;
        let ctx = &self.documents[c.document].contexts[c.context];
        Ok(AnswerSpan::single(ctx.context_id.clone(), c.sentence))
    }

    /// Sentences covered by a span, validated against the context.
    pub fn span_sentences(&self, span: &AnswerSpan) -> Result<&[Sentence]> {
        let ctx = self
            .context(&span.context_id)
            .ok_or_else(|| Error::UnknownContext(span.context_id.clone()))?;
        let invalid = |reason| Error::InvalidSpan {
            context_id: span.context_id.clone(),
            first: span.first_sentence,
            last: span.last_sentence,
            reason,
        };
        if span.first_sentence > span.last_sentence {
            return Err(invalid("first sentence after last"));
        }
        if span.last_sentence >= ctx.sentences.len() {
            return Err(invalid("sentence index out of range"));
        }
        Ok(&ctx.sentences[span.first_sentence..=span.last_sentence])
    }

    /// Answer text: the span's sentences joined by a single space.
    pub fn resolve_span(&self, span: &AnswerSpan) -> Result<String> {
        let sentences = self.span_sentences(span)?;
        Ok(sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_DOCS: &str = r#"{"document_id":"D1","title":"t","contexts":[{"context_id":"D1-C0","text":"Alpha one. Beta two.","sentences":[{"sentence_id":"D1-C0-S0","start":0,"end":10},{"sentence_id":"D1-C0-S1","start":11,"end":20}]}]}
{"document_id":"D2","title":"","contexts":[{"context_id":"D2-C0","text":"Gamma über drei.","sentences":[{"sentence_id":"D2-C0-S0","start":0,"end":16}]}]}
"#;

    #[test]
    fn empty_stream() {
        let c = Corpus::parse_str("").unwrap();
        assert_eq!(c.documents().len(), 0);
        assert_eq!(c.n_sentences(), 0);
    }

    #[test]
    fn single_document_index() {
        let first = TWO_DOCS.lines().next().unwrap();
        let c = Corpus::parse_str(first).unwrap();
        assert_eq!(c.n_sentences(), 2);
        assert_eq!(c.lookup_sentence("D1-C0-S0").unwrap().text, "Alpha one.");
        assert_eq!(c.lookup_sentence("D1-C0-S1").unwrap().text, "Beta two.");
    }

    #[test]
    fn cross_document_lookup_and_unicode_offsets() {
        let c = Corpus::parse_str(TWO_DOCS).unwrap();
        let s = c.lookup_sentence("D2-C0-S0").unwrap();
        assert_eq!(s.text, "Gamma über drei.");
        assert_eq!(c.coord("D2-C0-S0").unwrap().ordinal, 1);
        assert!(matches!(
            c.lookup_sentence("nope"),
            Err(Error::UnknownSentence(_))
        ));
    }

    #[test]
    fn duplicate_sentence_id_is_named() {
        let line = r#"{"document_id":"D","title":"","contexts":[{"context_id":"C","text":"ab cd","sentences":[{"sentence_id":"S","start":0,"end":2},{"sentence_id":"S","start":3,"end":5}]}]}"#;
        match Corpus::parse_str(line) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "S"),
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = format!("{}\n{{not json\n", TWO_DOCS.lines().next().unwrap());
        match Corpus::parse_str(&input) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn offsets_out_of_bounds() {
        let line = r#"{"document_id":"D","title":"","contexts":[{"context_id":"C","text":"abc","sentences":[{"sentence_id":"S","start":0,"end":4}]}]}"#;
        assert!(matches!(
            Corpus::parse_str(line),
            Err(Error::OffsetOutOfBounds { .. })
        ));
        let overlapping = r#"{"document_id":"D","title":"","contexts":[{"context_id":"C","text":"abcdef","sentences":[{"sentence_id":"S0","start":0,"end":4},{"sentence_id":"S1","start":3,"end":6}]}]}"#;
        assert!(Corpus::parse_str(overlapping).is_err());
    }

    #[test]
    fn resolve_spans() {
        let c = Corpus::parse_str(TWO_DOCS).unwrap();
        assert_eq!(
            c.resolve_span(&AnswerSpan::single("D1-C0", 1)).unwrap(),
            "Beta two."
        );
        let both = AnswerSpan {
            context_id: "D1-C0".into(),
            first_sentence: 0,
            last_sentence: 1,
        };
        assert_eq!(c.resolve_span(&both).unwrap(), "Alpha one. Beta two.");
        let reversed = AnswerSpan {
            context_id: "D1-C0".into(),
            first_sentence: 1,
            last_sentence: 0,
        };
        assert!(matches!(
            c.resolve_span(&reversed),
            Err(Error::InvalidSpan { .. })
        ));
        assert!(c.resolve_span(&AnswerSpan::single("D1-C0", 2)).is_err());
        assert!(matches!(
            c.resolve_span(&AnswerSpan::single("X", 0)),
            Err(Error::UnknownContext(_))
        ));
    }

    #[test]
    fn span_display_round_trips() {
        let span = AnswerSpan {
            context_id: "doc-1:C-3".into(),
            first_sentence: 2,
            last_sentence: 4,
        };
        assert_eq!(span.to_string(), "doc-1:C-3:2-4");
        assert_eq!(span.to_string().parse::<AnswerSpan>().unwrap(), span);
        assert!("nocolon".parse::<AnswerSpan>().is_err());
    }
}
