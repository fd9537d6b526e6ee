//! Documents, spans and corpus ingestion.
//!
//! Two input formats are supported:
//!
//! * JSONL, one document per line:
//!   `{"doc_key": "...", "sentences": [["tok", ...], ...], "clusters": [[[start, end], ...], ...]}`
//!   where span indices are inclusive positions in the flattened document.
//! * CoNLL-2012 column files with `#begin document` / `#end document`
//!   delimiters, the word in column 4 and the coreference column last.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Inclusive token span `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }

    /// `self` comes strictly before `other` in document order.
    pub fn precedes(&self, other: &Span) -> bool {
        self < other
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(deserializer)?;
        Ok(Span { start, end })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub sentence_index: usize,
    pub doc_index: usize,
}

/// An ordered `(candidate, query)` pair; the candidate always comes first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MentionPair {
    candidate: Span,
    query: Span,
}

impl MentionPair {
    pub fn new(candidate: Span, query: Span) -> Option<Self> {
        candidate
            .precedes(&query)
            .then_some(MentionPair { candidate, query })
    }

    pub fn candidate(&self) -> Span {
        self.candidate
    }

    pub fn query(&self) -> Span {
        self.query
    }
}

/// A tokenized document with its gold coreference clusters.
///
/// Immutable after construction; [`Document::new`] checks every invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    doc_key: String,
    tokens: Vec<Token>,
    sentences: Vec<Range<usize>>,
    gold_clusters: Vec<Vec<Span>>,
}

impl Document {
    pub fn new(
        doc_key: impl Into<String>,
        sentences: Vec<Vec<String>>,
        gold_clusters: Vec<Vec<Span>>,
    ) -> Result<Self> {
        let doc_key = doc_key.into();
        let invalid = |message: String| Error::Validation {
            doc_key: doc_key.clone(),
            message,
        };

        let mut tokens = Vec::new();
        let mut ranges = Vec::with_capacity(sentences.len());
        for (sentence_index, sentence) in sentences.into_iter().enumerate() {
            if sentence.is_empty() {
                return Err(invalid(format!("sentence {sentence_index} is empty")));
            }
            let start = tokens.len();
            for text in sentence {
                if text.is_empty() {
                    return Err(invalid(format!("empty token at position {}", tokens.len())));
                }
                let doc_index = tokens.len();
                tokens.push(Token {
                    text,
                    sentence_index,
                    doc_index,
                });
            }
            ranges.push(start..tokens.len());
        }

        let mut seen = HashSet::new();
        for (i, cluster) in gold_clusters.iter().enumerate() {
            if cluster.is_empty() {
                return Err(invalid(format!("gold cluster {i} is empty")));
            }
            for span in cluster {
                if span.start > span.end || span.end >= tokens.len() {
                    return Err(Error::SpanOutOfBounds {
                        doc_key: doc_key.clone(),
                        span: *span,
                        len: tokens.len(),
                    });
                }
                if !seen.insert(*span) {
                    return Err(invalid(format!("span {span} appears in more than one gold slot")));
                }
            }
        }

        Ok(Document {
            doc_key,
            tokens,
            sentences: ranges,
            gold_clusters,
        })
    }

    pub fn doc_key(&self) -> &str {
        &self.doc_key
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token ranges of each sentence (half-open, in document order).
    pub fn sentences(&self) -> &[Range<usize>] {
        &self.sentences
    }

    pub fn gold_clusters(&self) -> &[Vec<Span>] {
        &self.gold_clusters
    }

    pub fn span_text(&self, span: Span) -> Vec<&str> {
        self.tokens[span.start..=span.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect()
    }

    pub fn sentence_texts(&self) -> Vec<Vec<String>> {
        self.sentences
            .iter()
            .map(|r| self.tokens[r.clone()].iter().map(|t| t.text.clone()).collect())
            .collect()
    }

    /// Gold cluster index of every gold mention.
    pub fn gold_cluster_index(&self) -> BTreeMap<Span, usize> {
        let mut out = BTreeMap::new();
        for (i, cluster) in self.gold_clusters.iter().enumerate() {
            for span in cluster {
                out.insert(*span, i);
            }
        }
        out
    }

    /// Copy of this document with a different cluster set (e.g. predictions).
    pub fn with_clusters(&self, clusters: Vec<Vec<Span>>) -> Result<Self> {
        Document::new(self.doc_key.clone(), self.sentence_texts(), clusters)
    }
}

/// Wire form of one JSONL line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JsonDocument {
    pub doc_key: String,
    pub sentences: Vec<Vec<String>>,
    #[serde(default)]
    pub clusters: Vec<Vec<Span>>,
    /// Present on prediction output when the input carried gold clusters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_clusters: Option<Vec<Vec<Span>>>,
}

impl From<&Document> for JsonDocument {
    fn from(doc: &Document) -> Self {
        JsonDocument {
            doc_key: doc.doc_key.clone(),
            sentences: doc.sentence_texts(),
            clusters: doc.gold_clusters.clone(),
            gold_clusters: None,
        }
    }
}

impl TryFrom<JsonDocument> for Document {
    type Error = Error;

    fn try_from(raw: JsonDocument) -> Result<Self> {
        Document::new(raw.doc_key, raw.sentences, raw.clusters)
    }
}

/// Parses JSONL, one document per non-blank line.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(Document::try_from(raw)?);
    }
    Ok(docs)
}

pub fn write_jsonl<W: Write>(docs: &[Document], mut writer: W) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut writer, &JsonDocument::from(doc))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses CoNLL-2012 coreference column files.
///
/// Each `id)` closes the most recent unclosed `(id`. Speaker, genre and the
/// other annotation columns are ignored.
pub fn parse_conll2012<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut current: Option<ConllDoc> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };

        if let Some(rest) = trimmed.strip_prefix("#begin document") {
            if current.is_some() {
                return Err(parse_err("nested #begin document".into()));
            }
            current = Some(ConllDoc::new(conll_doc_key(rest)));
            continue;
        }
        if trimmed.starts_with("#end document") {
            let doc = current
                .take()
                .ok_or_else(|| parse_err("#end document without #begin".into()))?;
            docs.push(doc.finish(line_no)?);
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }

        let Some(doc) = current.as_mut() else {
            if trimmed.is_empty() {
                continue;
            }
            return Err(parse_err("token line outside of a document".into()));
        };

        if trimmed.is_empty() {
            doc.end_sentence();
            continue;
        }

        let columns: Vec<&str> = trimmed.split_whitespace().collect();
        if columns.len() < 5 {
            return Err(parse_err(format!(
                "expected at least 5 columns, found {}",
                columns.len()
            )));
        }
        let word = columns[3];
        let coref = columns[columns.len() - 1];
        doc.push_token(word, coref).map_err(parse_err)?;
    }

    if current.is_some() {
        return Err(Error::Parse {
            line: 0,
            message: "missing #end document at end of input".into(),
        });
    }
    Ok(docs)
}

fn conll_doc_key(header: &str) -> String {
    // `(bc/cctv/00/cctv_0000); part 000`
    let header = header.trim();
    let (name, part) = match header.split_once(';') {
        Some((name, part)) => (name, part.trim()),
        None => (header, ""),
    };
    let name = name.trim().trim_start_matches('(').trim_end_matches(')');
    match part.strip_prefix("part").map(str::trim) {
        Some(num) => {
            let num = num.trim_start_matches('0');
            format!("{}_{}", name, if num.is_empty() { "0" } else { num })
        }
        None => name.to_string(),
    }
}

struct ConllDoc {
    key: String,
    sentences: Vec<Vec<String>>,
    sentence: Vec<String>,
    n_tokens: usize,
    open: Vec<(u64, usize)>,
    clusters: BTreeMap<u64, Vec<Span>>,
}

impl ConllDoc {
    fn new(key: String) -> Self {
        ConllDoc {
            key,
            sentences: Vec::new(),
            sentence: Vec::new(),
            n_tokens: 0,
            open: Vec::new(),
            clusters: BTreeMap::new(),
        }
    }

    fn end_sentence(&mut self) {
        if !self.sentence.is_empty() {
            self.sentences.push(std::mem::take(&mut self.sentence));
        }
    }

    fn push_token(&mut self, word: &str, coref: &str) -> std::result::Result<(), String> {
        let index = self.n_tokens;
        self.sentence.push(word.to_string());
        self.n_tokens += 1;
        if coref == "-" {
            return Ok(());
        }
        for entry in coref.split('|') {
            let opens = entry.starts_with('(');
            let closes = entry.ends_with(')');
            let id_text = entry.trim_start_matches('(').trim_end_matches(')');
            let id: u64 = id_text
                .parse()
                .map_err(|_| format!("bad coreference entry `{entry}`"))?;
            match (opens, closes) {
                (true, true) => self.clusters.entry(id).or_default().push(Span::new(index, index)),
                (true, false) => self.open.push((id, index)),
                (false, true) => {
                    let pos = self
                        .open
                        .iter()
                        .rposition(|(open_id, _)| *open_id == id)
                        .ok_or_else(|| format!("`{entry}` closes a mention that was never opened"))?;
                    let (_, start) = self.open.remove(pos);
                    self.clusters.entry(id).or_default().push(Span::new(start, index));
                }
                (false, false) => return Err(format!("bad coreference entry `{entry}`")),
            }
        }
        Ok(())
    }

    fn finish(mut self, line: usize) -> Result<Document> {
        if let Some((id, start)) = self.open.first() {
            return Err(Error::Parse {
                line,
                message: format!("unclosed mention `({id}` starting at token {start}"),
            });
        }
        self.end_sentence();
        let clusters = self
            .clusters
            .into_values()
            .map(|mut spans| {
                spans.sort();
                spans
            })
            .collect();
        Document::new(self.key, self.sentences, clusters)
    }
}

/// All spans up to `max_width` tokens that stay inside one sentence, in
/// `(start, end)` order.
pub fn enumerate_spans(doc: &Document, max_width: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    for sentence in doc.sentences() {
        for start in sentence.clone() {
            let last = (start + max_width).min(sentence.end);
            spans.extend((start..last).map(|end| Span::new(start, end)));
        }
    }
    spans
}
