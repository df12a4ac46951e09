//! Inline sentence markup: `<s>…</s>` around each sentence and
//! `<class="label">…</class>` around each entity.
//!
//! The grammar is exact-match and case-sensitive. Any `<` that does not start
//! one of the four recognized tags is a fault, never literal text.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{synthesized_id, validate_structure, AnnotatedSentence, Label, SampleProvenance, Span};
use crate::error::{Error, Result};

pub const SENTENCE_OPEN: &str = "<s>";
pub const SENTENCE_CLOSE: &str = "</s>";
pub const CLASS_CLOSE: &str = "</class>";
const CLASS_OPEN_PREFIX: &str = "<class=\"";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    MissingSentenceClose,
    UnclosedClassTag,
    StrayClose,
    NestedOpen,
    MalformedTag,
    UnknownAttribute,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Where and why a single segment failed to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkupFault {
    pub kind: DiagnosticKind,
    /// Character offset into the segment.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub sample_index: u64,
    pub segment_index: usize,
    pub kind: DiagnosticKind,
    pub position: usize,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sample {} segment {}: {} at character {}",
            self.sample_index, self.segment_index, self.kind, self.position
        )
    }
}

/// One unparsed generation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawSampleRecord", into = "RawSampleRecord")]
pub struct RawSample {
    pub sample_index: u64,
    pub text: String,
    pub provenance: SampleProvenance,
}

// Wire shape of the raw-sample JSONL: the index lives at top level only.
#[derive(Serialize, Deserialize)]
struct RawSampleRecord {
    sample_index: u64,
    text: String,
    provenance: ProvenanceRecord,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceRecord {
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    seed: u64,
    backend_id: String,
}

impl From<RawSampleRecord> for RawSample {
    fn from(r: RawSampleRecord) -> Self {
        RawSample {
            sample_index: r.sample_index,
            text: r.text,
            provenance: SampleProvenance {
                sample_index: r.sample_index,
                temperature: r.provenance.temperature,
                top_p: r.provenance.top_p,
                max_tokens: Some(r.provenance.max_tokens),
                seed: r.provenance.seed,
                backend_id: r.provenance.backend_id,
            },
        }
    }
}

impl From<RawSample> for RawSampleRecord {
    fn from(s: RawSample) -> Self {
        RawSampleRecord {
            sample_index: s.sample_index,
            text: s.text,
            provenance: ProvenanceRecord {
                temperature: s.provenance.temperature,
                top_p: s.provenance.top_p,
                max_tokens: s.provenance.max_tokens.unwrap_or(0),
                seed: s.provenance.seed,
                backend_id: s.provenance.backend_id,
            },
        }
    }
}

impl RawSample {
    /// Wrap free-standing markup (e.g. a prompt body) as sample 0.
    pub fn from_markup(text: impl Into<String>, backend_id: &str) -> Self {
        RawSample {
            sample_index: 0,
            text: text.into(),
            provenance: SampleProvenance {
                sample_index: 0,
                temperature: 1.0,
                top_p: 1.0,
                max_tokens: None,
                seed: 0,
                backend_id: backend_id.to_string(),
            },
        }
    }
}

/// Serialize a sentence into markup.
///
/// Fails when the text contains `<` or `>`, or when the spans are not sorted,
/// in bounds and disjoint.
pub fn encode_sentence(sentence: &AnnotatedSentence) -> Result<String> {
    if let Some((position, ch)) = sentence
        .text
        .chars()
        .enumerate()
        .find(|(_, c)| matches!(c, '<' | '>'))
    {
        return Err(Error::Unencodable {
            id: sentence.id.clone(),
            ch,
            position,
        });
    }
    let violations = validate_structure(sentence);
    if !violations.is_empty() {
        return Err(Error::InvalidSentence {
            id: sentence.id.clone(),
            violations,
        });
    }

    let mut out = String::with_capacity(sentence.text.len() + 32 * sentence.spans.len() + 7);
    out.push_str(SENTENCE_OPEN);
    let mut spans = sentence.spans.iter().peekable();
    let mut open: Option<&Span> = None;
    for (i, ch) in sentence.text.chars().enumerate() {
        if let Some(span) = open {
            if span.end == i {
                out.push_str(CLASS_CLOSE);
                open = None;
            }
        }
        if let Some(span) = spans.next_if(|s| s.start == i) {
            out.push_str(CLASS_OPEN_PREFIX);
            out.push_str(span.label.as_str());
            out.push_str("\">");
            open = Some(span);
        }
        out.push(ch);
    }
    if open.is_some() {
        out.push_str(CLASS_CLOSE);
    }
    out.push_str(SENTENCE_CLOSE);
    Ok(out)
}

/// Text and spans recovered from one well-formed segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMarkup {
    pub text: String,
    pub spans: Vec<Span>,
}

impl ParsedMarkup {
    pub fn into_sentence(self, id: impl Into<String>) -> AnnotatedSentence {
        AnnotatedSentence::new(id, self.text, self.spans)
    }
}

/// Parse one segment starting at `<s>`.
///
/// Labels are recorded as written; whether they belong to the label set is a
/// curation decision. Anything after the closing `</s>` is ignored.
pub fn parse_sentence(markup: &str) -> std::result::Result<ParsedMarkup, MarkupFault> {
    let chars: Vec<char> = markup.chars().collect();
    let fault = |kind, position| Err(MarkupFault { kind, position });

    if !starts_with(&chars, 0, SENTENCE_OPEN) {
        return fault(DiagnosticKind::MalformedTag, 0);
    }
    // A segment lacking its close tag is reported as such whatever else is wrong.
    if !markup.contains(SENTENCE_CLOSE) {
        return fault(DiagnosticKind::MissingSentenceClose, chars.len());
    }

    let mut text = String::new();
    let mut text_len = 0usize;
    let mut spans = Vec::new();
    // (label, start offset in text, tag position in markup)
    let mut open: Option<(Label, usize, usize)> = None;
    let mut i = SENTENCE_OPEN.len();

    loop {
        let Some(&c) = chars.get(i) else {
            return fault(DiagnosticKind::MissingSentenceClose, chars.len());
        };
        if c != '<' {
            text.push(c);
            text_len += 1;
            i += 1;
            continue;
        }

        if starts_with(&chars, i, SENTENCE_CLOSE) {
            if let Some((_, _, tag_pos)) = open {
                return fault(DiagnosticKind::UnclosedClassTag, tag_pos);
            }
            return Ok(ParsedMarkup { text, spans });
        }

        if starts_with(&chars, i, CLASS_CLOSE) {
            match open.take() {
                None => return fault(DiagnosticKind::StrayClose, i),
                Some((_, start, _)) if start == text_len => {
                    return fault(DiagnosticKind::MalformedTag, i);
                }
                Some((label, start, _)) => spans.push(Span {
                    start,
                    end: text_len,
                    label,
                }),
            }
            i += CLASS_CLOSE.len();
            continue;
        }

        if starts_with(&chars, i, CLASS_OPEN_PREFIX) {
            if open.is_some() {
                return fault(DiagnosticKind::NestedOpen, i);
            }
            let (label, next) = read_class_tag(&chars, i)?;
            open = Some((label, text_len, i));
            i = next;
            continue;
        }

        if starts_with(&chars, i, "<class") && chars.get(i + 6).is_some_and(|c| c.is_whitespace()) {
            return fault(DiagnosticKind::UnknownAttribute, i);
        }
        if starts_with(&chars, i, SENTENCE_OPEN) {
            return fault(DiagnosticKind::MissingSentenceClose, i);
        }
        return fault(DiagnosticKind::MalformedTag, i);
    }
}

// `<class="` has already matched at `at`; returns the label and the index after `">`.
fn read_class_tag(chars: &[char], at: usize) -> std::result::Result<(Label, usize), MarkupFault> {
    let malformed = MarkupFault {
        kind: DiagnosticKind::MalformedTag,
        position: at,
    };
    let name_start = at + CLASS_OPEN_PREFIX.len();
    let mut j = name_start;
    while let Some(&c) = chars.get(j) {
        if matches!(c, '"' | '<' | '>' | '\n') {
            break;
        }
        j += 1;
    }
    if chars.get(j) != Some(&'"') {
        return Err(malformed);
    }
    let name: String = chars[name_start..j].iter().collect();
    let label = Label::new(name).map_err(|_| malformed)?;
    match chars.get(j + 1) {
        Some('>') => Ok((label, j + 2)),
        Some(c) if c.is_whitespace() => Err(MarkupFault {
            kind: DiagnosticKind::UnknownAttribute,
            position: at,
        }),
        _ => Err(malformed),
    }
}

fn starts_with(chars: &[char], at: usize, pattern: &str) -> bool {
    pattern.chars().enumerate().all(|(k, p)| chars.get(at + k) == Some(&p))
}

/// One `<s>`-delimited piece of a raw sample and its parse outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub sample_index: u64,
    pub segment_index: usize,
    pub markup: String,
    pub outcome: std::result::Result<AnnotatedSentence, ParseDiagnostic>,
}

impl Segment {
    pub fn has_close(&self) -> bool {
        self.markup.contains(SENTENCE_CLOSE)
    }
}

/// Split a raw sample on `<s>` and parse each piece independently.
/// Text before the first `<s>` belongs to no segment.
pub fn segments(raw: &RawSample) -> Vec<Segment> {
    let starts: Vec<usize> = raw.text.match_indices(SENTENCE_OPEN).map(|(b, _)| b).collect();
    let mut out = Vec::with_capacity(starts.len());
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(raw.text.len());
        let markup = &raw.text[start..end];
        let outcome = match parse_sentence(markup) {
            Ok(parsed) => {
                let id = synthesized_id(&raw.provenance.backend_id, raw.sample_index, k);
                let mut sentence = parsed.into_sentence(id);
                sentence.provenance = Some(raw.provenance.clone());
                Ok(sentence)
            }
            Err(f) => Err(ParseDiagnostic {
                sample_index: raw.sample_index,
                segment_index: k,
                kind: f.kind,
                position: f.position,
            }),
        };
        out.push(Segment {
            sample_index: raw.sample_index,
            segment_index: k,
            markup: markup.to_string(),
            outcome,
        });
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedDocument {
    pub sentences: Vec<AnnotatedSentence>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// Parse every sentence of a raw sample; failures become diagnostics and never
/// affect neighbouring sentences.
pub fn parse_document(raw: &RawSample) -> ParsedDocument {
    let mut doc = ParsedDocument::default();
    for segment in segments(raw) {
        match segment.outcome {
            Ok(s) => doc.sentences.push(s),
            Err(d) => doc.diagnostics.push(d),
        }
    }
    doc
}
