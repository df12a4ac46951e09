use serde::{Deserialize, Serialize};

const PUNCTUATION: &str = ".,;:!?()[]{}\"'/\\-";

/// A token as a code-point interval `[start, end)` into the sentence text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub start: usize,
    pub end: usize,
}

fn is_punct(c: char) -> bool {
    PUNCTUATION.contains(c)
}

/// Whitespace split, then punctuation peeled off both ends of each chunk as
/// single-character tokens. Punctuation inside a word (`p.o`, `1-0-0`) stays.
/// A chunk made only of punctuation yields one token per character.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    while lo < end && is_punct(chars[lo]) {
        lo += 1;
    }
    if lo == end {
        out.extend((start..end).map(|p| Token { start: p, end: p + 1 }));
        return;
    }
    let mut hi = end;
    while is_punct(chars[hi - 1]) {
        hi -= 1;
    }
    out.extend((start..lo).map(|p| Token { start: p, end: p + 1 }));
    out.push(Token { start: lo, end: hi });
    out.extend((hi..end).map(|p| Token { start: p, end: p + 1 }));
}

pub fn token_strings(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    tokenize(text)
        .into_iter()
        .map(|t| chars[t.start..t.end].iter().collect())
        .collect()
}
