use std::io::{self, Write};

use super::tokenize::{tokenize, Token};
use crate::corpus::{AnnotatedSentence, Corpus, Label, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tag {
    Outside,
    Begin(Label),
    Inside(Label),
}

impl std::fmt::Display for Tag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(l) => write!(f, "B-{l}"),
            Tag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

fn overlap(t: &Token, s: &Span) -> usize {
    t.end.min(s.end).saturating_sub(t.start.max(s.start))
}

/// Tag each token. A token belongs to the span covering most of its characters,
/// provided that covers at least half the token; the first token of a span is `B`.
pub fn bio_tags(sentence: &AnnotatedSentence, tokens: &[Token]) -> Vec<Tag> {
    let mut previous: Option<usize> = None;
    tokens
        .iter()
        .map(|t| {
            let best = sentence
                .spans
                .iter()
                .enumerate()
                .map(|(i, s)| (i, overlap(t, s)))
                .filter(|&(_, o)| o > 0)
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
            let owner = best.filter(|&(_, o)| 2 * o >= t.end - t.start).map(|(i, _)| i);
            let tag = match owner {
                None => Tag::Outside,
                Some(i) if previous == Some(i) => Tag::Inside(sentence.spans[i].label.clone()),
                Some(i) => Tag::Begin(sentence.spans[i].label.clone()),
            };
            previous = owner;
            tag
        })
        .collect()
}

/// Rebuild spans from token tags. An `I` that does not continue a span of the
/// same label opens a new one.
pub fn decode_bio(tokens: &[Token], tags: &[Tag]) -> Vec<Span> {
    let mut spans: Vec<Span> = Vec::new();
    let mut open = false;
    for (t, tag) in tokens.iter().zip(tags) {
        match tag {
            Tag::Outside => open = false,
            Tag::Inside(l) if open && spans.last().is_some_and(|s| s.label == *l) => {
                spans.last_mut().expect("open span").end = t.end;
            }
            Tag::Begin(l) | Tag::Inside(l) => {
                spans.push(Span {
                    start: t.start,
                    end: t.end,
                    label: l.clone(),
                });
                open = true;
            }
        }
    }
    spans
}

/// One `token<TAB>tag` line per token; every sentence is followed by a blank line.
pub fn write_bio<W: Write>(corpus: &Corpus, mut w: W) -> io::Result<()> {
    for s in corpus.sentences() {
        let chars: Vec<char> = s.text.chars().collect();
        let tokens = tokenize(&s.text);
        for (t, tag) in tokens.iter().zip(bio_tags(s, &tokens)) {
            let surface: String = chars[t.start..t.end].iter().collect();
            writeln!(w, "{surface}\t{tag}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
