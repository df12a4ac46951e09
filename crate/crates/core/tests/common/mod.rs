#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use proptest::prelude::*;
use synthner::{AnnotatedSentence, Corpus, Label, LabelSet, Span};

pub const LABELS: [&str; 3] = ["Medikation", "Dosis", "Diagnose"];

pub fn workspace_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn label(name: &str) -> Label {
    Label::new(name).unwrap()
}

pub fn span(start: usize, end: usize, name: &str) -> Span {
    Span::new(start, end, label(name)).unwrap()
}

// Text characters: no '<' or '>', includes multi-byte and whitespace.
const ALPHABET: &[char] = &[
    'a', 'b', 'e', 'k', 'm', 'n', 'r', 's', 'A', 'K', 'P', 'ä', 'ö', 'ü', 'ß', 'Ü', '0', '1', '5',
    ' ', ' ', ' ', '.', ',', '-', '/', '(', ')', '"', '=', '\'', '\t', 'µ', '€',
];

pub fn arb_text(max_len: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(ALPHABET), 1..=max_len).prop_map(|c| c.into_iter().collect())
}

/// Sorted, non-overlapping spans over a text of `len` code points.
pub fn arb_spans(len: usize, labels: &'static [&'static str]) -> impl Strategy<Value = Vec<Span>> {
    prop::collection::vec((0..len, 0..len, prop::sample::select(labels)), 0..6).prop_map(move |raw| {
        let mut cuts: Vec<(usize, usize, &str)> = raw
            .into_iter()
            .map(|(a, b, l)| (a.min(b), a.max(b) + 1, l))
            .collect();
        cuts.sort();
        let mut out: Vec<Span> = Vec::new();
        for (s, e, l) in cuts {
            if out.last().is_none_or(|p| p.end <= s) {
                out.push(span(s, e.min(len), l));
            }
        }
        out
    })
}

pub fn arb_sentence_with(id: String, max_len: usize, labels: &'static [&'static str]) -> impl Strategy<Value = AnnotatedSentence> {
    arb_text(max_len).prop_flat_map(move |text| {
        let len = text.chars().count();
        let id = id.clone();
        arb_spans(len, labels).prop_map(move |spans| AnnotatedSentence::new(id.clone(), text.clone(), spans))
    })
}

pub fn arb_sentence() -> impl Strategy<Value = AnnotatedSentence> {
    arb_sentence_with("s".into(), 40, &LABELS)
}

pub fn arb_corpus(max_sentences: usize) -> impl Strategy<Value = Corpus> {
    prop::collection::vec(arb_sentence(), 1..=max_sentences).prop_map(|sentences| {
        let sentences = sentences
            .into_iter()
            .enumerate()
            .map(|(i, s)| AnnotatedSentence { id: format!("s{i}"), ..s })
            .collect();
        Corpus::new(sentences, LabelSet::medical()).unwrap()
    })
}

pub type Pair = (Corpus, Corpus);

pub fn arb_pair(max_sentences: usize) -> impl Strategy<Value = Pair> {
    let sentence = arb_text(30).prop_flat_map(|text| {
        let len = text.chars().count();
        (Just(text), arb_spans(len, &LABELS), arb_spans(len, &LABELS))
    });
    prop::collection::vec(sentence, 1..=max_sentences).prop_map(|rows| {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for (i, (text, g, p)) in rows.into_iter().enumerate() {
            gold.push(AnnotatedSentence::new(format!("s{i}"), text.clone(), g));
            pred.push(AnnotatedSentence::new(format!("s{i}"), text, p));
        }
        (
            Corpus::new(gold, LabelSet::medical()).unwrap(),
            Corpus::new(pred, LabelSet::medical()).unwrap(),
        )
    })
}

// Brute force: one label slot per character, counted by direct comparison.
pub fn char_oracle(gold: &Corpus, pred: &Corpus) -> HashMap<String, (u64, u64, u64)> {
    let fill = |s: &AnnotatedSentence| {
        let mut slots: Vec<Option<String>> = vec![None; s.text.chars().count()];
        for sp in &s.spans {
            for slot in slots.iter_mut().take(sp.end).skip(sp.start) {
                *slot = Some(sp.label.to_string());
            }
        }
        slots
    };
    let mut counts: HashMap<String, (u64, u64, u64)> = LABELS.iter().map(|l| (l.to_string(), (0, 0, 0))).collect();
    let preds: HashMap<&str, &AnnotatedSentence> = pred.sentences().iter().map(|s| (s.id.as_str(), s)).collect();
    for g in gold.sentences() {
        let (gs, ps) = (fill(g), fill(preds[g.id.as_str()]));
        for label in LABELS {
            let c = counts.get_mut(label).unwrap();
            for (a, b) in gs.iter().zip(&ps) {
                let is_g = a.as_deref() == Some(label);
                let is_p = b.as_deref() == Some(label);
                c.0 += u64::from(is_g && is_p);
                c.1 += u64::from(is_p && !is_g);
                c.2 += u64::from(is_g && !is_p);
            }
        }
    }
    counts
}

pub fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

// Exact minimal-prefix oracle over integer weights: among all index subsets
// with mass >= p (p = p_pct / 100), take the smallest; among those the
// heaviest; among those the lexicographically smallest sorted index list.
pub fn top_p_oracle(weights: &[u64], p_pct: u64) -> Vec<usize> {
    let total: u64 = weights.iter().sum();
    let n = weights.len();
    let mut best: Option<(usize, u64, Vec<usize>)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mass: u64 = idx.iter().map(|&i| weights[i]).sum();
        if mass * 100 < p_pct * total {
            continue;
        }
        let better = match &best {
            None => true,
            Some((k, m, b)) => idx.len() < *k || (idx.len() == *k && (mass > *m || (mass == *m && idx < *b))),
        };
        if better {
            best = Some((idx.len(), mass, idx));
        }
    }
    best.unwrap().2
}
