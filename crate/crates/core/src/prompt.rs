//! Few-shot prompt assembly.
//!
//! A prompt is the encoded example sentences, one per line, followed by a
//! lone `<s>` that invites the model to continue with a new sentence.

use std::path::Path;

use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};
use crate::io;
use crate::markup::{encode_sentence, SENTENCE_CLOSE, SENTENCE_OPEN};

pub const LINE_SEPARATOR: &str = "\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    text: String,
    example_count: usize,
}

impl Prompt {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn example_count(&self) -> usize {
        self.example_count
    }

    /// The encoded examples without the trailing `<s>`.
    pub fn body(&self) -> &str {
        &self.text[..self.text.len() - SENTENCE_OPEN.len()]
    }

    pub fn into_text(self) -> String {
        self.text
    }
}

pub fn build_prompt(examples: &[AnnotatedSentence]) -> Result<Prompt> {
    let lines = examples
        .iter()
        .map(encode_sentence)
        .collect::<Result<Vec<_>>>()?;
    assemble_prompt(&lines)
}

/// Join already-encoded example lines verbatim. Used for fixtures whose lines
/// cannot be produced by the encoder, such as a deliberately malformed example.
pub fn assemble_prompt<S: AsRef<str>>(lines: &[S]) -> Result<Prompt> {
    if lines.is_empty() {
        return Err(Error::EmptyPrompt);
    }
    let mut text = String::new();
    for line in lines {
        text.push_str(line.as_ref());
        text.push_str(LINE_SEPARATOR);
    }
    text.push_str(SENTENCE_OPEN);
    Ok(Prompt {
        text,
        example_count: lines.len(),
    })
}

/// Read pre-encoded example lines, one `<s>…</s>` sentence per non-blank line.
/// Lines are kept byte-for-byte; parse errors inside a line are not checked.
pub fn read_markup_lines(content: &str, source: &str) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for (n, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: &str| Error::Schema {
            path: source.to_string(),
            line: n + 1,
            message: message.to_string(),
        };
        if !line.starts_with(SENTENCE_OPEN) {
            return Err(schema("example line must start with <s>"));
        }
        if line.matches(SENTENCE_CLOSE).count() != 1 {
            return Err(schema("example line must contain exactly one </s>"));
        }
        lines.push(line.to_string());
    }
    Ok(lines)
}

/// Load few-shot examples and assemble the prompt. `.jsonl` files hold
/// corpus records and are encoded; anything else is read as markup lines.
pub fn load_prompt(path: &Path) -> Result<Prompt> {
    let source = path.display().to_string();
    if path.extension().is_some_and(|e| e == "jsonl") {
        let examples: Vec<AnnotatedSentence> = io::read_jsonl(io::open_buffered(path)?, &source)?;
        build_prompt(&examples)
    } else {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        assemble_prompt(&read_markup_lines(&content, &source)?)
    }
}
