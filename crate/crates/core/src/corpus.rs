//! Corpus data model: labels, character spans, annotated sentences and their
//! integrity checks.
//!
//! All offsets count Unicode code points of the surface text, never bytes.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Name of an entity class such as `Medikation`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(String);

impl Label {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidLabel {
                name,
                reason: "empty",
            });
        }
        if name.chars().any(|c| matches!(c, '<' | '>' | '"' | '\n')) {
            return Err(Error::InvalidLabel {
                name,
                reason: "contains '<', '>', '\"' or a newline",
            });
        }
        Ok(Label(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Label {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Label::new(value)
    }
}

impl From<Label> for String {
    fn from(label: Label) -> Self {
        label.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for Label {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Label {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// Ordered, non-empty set of unique labels. Serialized as `{"labels": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelsFile", into = "LabelsFile")]
pub struct LabelSet {
    labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct LabelsFile {
    labels: Vec<Label>,
}

impl TryFrom<LabelsFile> for LabelSet {
    type Error = Error;

    fn try_from(file: LabelsFile) -> Result<Self> {
        LabelSet::new(file.labels)
    }
}

impl From<LabelSet> for LabelsFile {
    fn from(set: LabelSet) -> Self {
        LabelsFile { labels: set.labels }
    }
}

impl LabelSet {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyLabelSet);
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
        }
        Ok(LabelSet { labels })
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels = names
            .into_iter()
            .map(Label::new)
            .collect::<Result<Vec<_>>>()?;
        LabelSet::new(labels)
    }

    /// The three classes of the German medication corpus.
    pub fn medical() -> Self {
        LabelSet::from_names(["Medikation", "Dosis", "Diagnose"]).expect("static labels are valid")
    }

    pub fn contains(&self, name: &str) -> bool {
        self.labels.iter().any(|l| l.as_str() == name)
    }

    pub fn get(&self, name: &str) -> Option<&Label> {
        self.labels.iter().find(|l| l.as_str() == name)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Label> {
        self.labels.iter()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, |w| {
            serde_json::to_writer(&mut *w, self)?;
            w.write_all(b"\n")
        })
    }
}

impl<'a> IntoIterator for &'a LabelSet {
    type Item = &'a Label;
    type IntoIter = std::slice::Iter<'a, Label>;

    fn into_iter(self) -> Self::IntoIter {
        self.labels.iter()
    }
}

/// Labeled half-open character interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

impl Span {
    pub fn new(start: usize, end: usize, label: Label) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidSpan { start, end });
        }
        Ok(Span { start, end, label })
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Sampling parameters that produced a synthesized sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleProvenance {
    pub sample_index: u64,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub seed: u64,
    pub backend_id: String,
}

impl SampleProvenance {
    pub fn is_valid(&self) -> bool {
        self.temperature > 0.0 && self.top_p > 0.0 && self.top_p <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub text: String,
    pub spans: Vec<Span>,
    pub provenance: Option<SampleProvenance>,
}

impl AnnotatedSentence {
    pub fn new(id: impl Into<String>, text: impl Into<String>, spans: Vec<Span>) -> Self {
        AnnotatedSentence {
            id: id.into(),
            text: text.into(),
            spans,
            provenance: None,
        }
    }

    /// Length of the surface text in code points.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Substring `[start, end)` by code points.
    pub fn slice(&self, start: usize, end: usize) -> String {
        self.text
            .chars()
            .skip(start)
            .take(end.saturating_sub(start))
            .collect()
    }

    pub fn span_text(&self, span: &Span) -> String {
        self.slice(span.start, span.end)
    }
}

/// Default id for synthesized sentences.
pub fn synthesized_id(backend_id: &str, sample_index: u64, ordinal: usize) -> String {
    format!("{backend_id}:{sample_index}:{ordinal}")
}

/// One violated sentence invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptySpan { span: usize },
    OutOfBounds { span: usize, end: usize, len: usize },
    Overlap { first: usize, second: usize },
    Unsorted { span: usize },
    UnknownLabel { span: usize, label: String },
    MarkupResidue { position: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySpan { span } => write!(f, "span {span} is empty"),
            Violation::OutOfBounds { span, end, len } => {
                write!(f, "span {span} ends at {end}, beyond text length {len}")
            }
            Violation::Overlap { first, second } => {
                write!(f, "spans {first} and {second} overlap")
            }
            Violation::Unsorted { span } => write!(f, "span {span} starts before its predecessor"),
            Violation::UnknownLabel { span, label } => {
                write!(f, "span {span} has unknown label {label:?}")
            }
            Violation::MarkupResidue { position } => {
                write!(f, "markup residue at character {position}")
            }
        }
    }
}

const RESIDUE: [&str; 3] = ["<s>", "</s>", "<class="];

/// Collect every invariant the sentence violates against `labels`.
/// An empty result means the sentence is valid.
pub fn validate_sentence(sentence: &AnnotatedSentence, labels: &LabelSet) -> Vec<Violation> {
    let mut out = validate_structure(sentence);
    for (i, span) in sentence.spans.iter().enumerate() {
        if !labels.contains(span.label.as_str()) {
            out.push(Violation::UnknownLabel {
                span: i,
                label: span.label.to_string(),
            });
        }
    }
    out
}

/// Label-independent checks: bounds, ordering, overlap and markup residue.
pub fn validate_structure(sentence: &AnnotatedSentence) -> Vec<Violation> {
    let mut out = Vec::new();
    let len = sentence.char_len();

    for (i, span) in sentence.spans.iter().enumerate() {
        if span.start >= span.end {
            out.push(Violation::EmptySpan { span: i });
        }
        if span.end > len {
            out.push(Violation::OutOfBounds {
                span: i,
                end: span.end,
                len,
            });
        }
        if i > 0 && span.start < sentence.spans[i - 1].start {
            out.push(Violation::Unsorted { span: i });
        }
    }

    // Sweep in start order, remembering the span reaching furthest right.
    let mut order: Vec<usize> = (0..sentence.spans.len()).collect();
    order.sort_by_key(|&i| (sentence.spans[i].start, i));
    let mut reach: Option<usize> = None;
    for &i in &order {
        let span = &sentence.spans[i];
        if let Some(r) = reach {
            if span.start < sentence.spans[r].end && span.start < span.end {
                out.push(Violation::Overlap {
                    first: r.min(i),
                    second: r.max(i),
                });
            }
            if span.end > sentence.spans[r].end {
                reach = Some(i);
            }
        } else {
            reach = Some(i);
        }
    }

    for pattern in RESIDUE {
        if let Some(byte) = sentence.text.find(pattern) {
            out.push(Violation::MarkupResidue {
                position: sentence.text[..byte].chars().count(),
            });
        }
    }
    out
}

/// Ordered collection of sentences sharing one label set.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    sentences: Vec<AnnotatedSentence>,
    labelset: LabelSet,
}

impl Corpus {
    /// Build a corpus, rejecting duplicate ids and any invalid sentence.
    pub fn new(sentences: Vec<AnnotatedSentence>, labelset: LabelSet) -> Result<Self> {
        let mut ids = HashSet::with_capacity(sentences.len());
        for s in &sentences {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
            let violations = validate_sentence(s, &labelset);
            if !violations.is_empty() {
                return Err(Error::InvalidSentence {
                    id: s.id.clone(),
                    violations,
                });
            }
        }
        Ok(Corpus {
            sentences,
            labelset,
        })
    }

    pub fn empty(labelset: LabelSet) -> Self {
        Corpus {
            sentences: Vec::new(),
            labelset,
        }
    }

    pub fn sentences(&self) -> &[AnnotatedSentence] {
        &self.sentences
    }

    pub fn labelset(&self) -> &LabelSet {
        &self.labelset
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn into_parts(self) -> (Vec<AnnotatedSentence>, LabelSet) {
        (self.sentences, self.labelset)
    }

    /// Parse corpus JSONL. Blank lines are skipped; errors carry 1-based line numbers.
    pub fn read_jsonl<R: BufRead>(reader: R, source: &str, labelset: LabelSet) -> Result<Self> {
        let sentences = read_sentences(reader, source, &labelset)?;
        Corpus::new(sentences, labelset)
    }

    pub fn read_jsonl_file(path: &Path, labelset: LabelSet) -> Result<Self> {
        let reader = io::open_buffered(path)?;
        Corpus::read_jsonl(reader, &path.display().to_string(), labelset)
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for s in &self.sentences {
            serde_json::to_writer(&mut writer, s)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_jsonl_file(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, |w| self.write_jsonl(w))
    }
}

fn read_sentences<R: BufRead>(
    reader: R,
    source: &str,
    labelset: &LabelSet,
) -> Result<Vec<AnnotatedSentence>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| Error::Schema {
            path: source.to_string(),
            line: line_no,
            message,
        };
        let sentence: AnnotatedSentence =
            serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if !ids.insert(sentence.id.clone()) {
            return Err(schema(format!("duplicate sentence id {:?}", sentence.id)));
        }
        let violations = validate_sentence(&sentence, labelset);
        if !violations.is_empty() {
            let joined = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(schema(format!("sentence {:?}: {joined}", sentence.id)));
        }
        out.push(sentence);
    }
    Ok(out)
}
