use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub token_count: usize,
    /// Every label of the label set appears, with zero if unused.
    pub entity_counts: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn entity_total(&self) -> usize {
        self.entity_counts.values().sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("Statistic\tCount\n");
        let _ = writeln!(out, "sentences\t{}", self.sentence_count);
        let _ = writeln!(out, "tokens\t{}", self.token_count);
        for (label, n) in &self.entity_counts {
            let _ = writeln!(out, "{label}\t{n}");
        }
        out
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut entity_counts: BTreeMap<String, usize> = corpus
        .labelset()
        .iter()
        .map(|l| (l.to_string(), 0))
        .collect();
    let mut token_count = 0;
    for s in corpus.sentences() {
        token_count += tokenize(&s.text).len();
        for span in &s.spans {
            *entity_counts.entry(span.label.to_string()).or_default() += 1;
        }
    }
    CorpusStats {
        sentence_count: corpus.len(),
        token_count,
        entity_counts,
    }
}
