//! Character-wise strict NER scoring.
//!
//! Every character carries at most one label. For each label `c`,
//! `TP = #{i: gold=c, pred=c}`, `FP = #{i: pred=c, gold≠c}` and
//! `FN = #{i: gold=c, pred≠c}`, summed over all sentences.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, Corpus, Label, LabelSet, Span};
use crate::error::Error;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("sentence {0:?} is in gold but not in predictions")]
    MissingPrediction(String),
    #[error("sentence {0:?} is in predictions but not in gold")]
    UnexpectedPrediction(String),
    #[error("text of sentence {0:?} differs between gold and predictions")]
    TextMismatch(String),
    #[error("alias target {0:?} is not in the label set")]
    UnknownAliasTarget(String),
}

/// One entry per character; `None` is outside.
pub type CharLabeling = Vec<Option<Label>>;

pub fn char_labels(sentence: &AnnotatedSentence) -> CharLabeling {
    let mut out = vec![None; sentence.char_len()];
    for span in &sentence.spans {
        for slot in &mut out[span.start..span.end] {
            debug_assert!(slot.is_none(), "overlapping spans in {}", sentence.id);
            *slot = Some(span.label.clone());
        }
    }
    out
}

/// External label name to internal label, read from `{"Drug": "Medikation"}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelAliasMap(BTreeMap<String, Label>);

impl LabelAliasMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, from: impl Into<String>, to: Label) {
        self.0.insert(from.into(), to);
    }

    pub fn get(&self, name: &str) -> Option<&Label> {
        self.0.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Label)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Distinct targets in first-seen order.
    pub fn targets(&self) -> Vec<Label> {
        let mut out: Vec<Label> = Vec::new();
        for t in self.0.values() {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    pub fn validate(&self, labels: &LabelSet) -> Result<(), EvalError> {
        match self.0.values().find(|t| !labels.contains(t.as_str())) {
            Some(t) => Err(EvalError::UnknownAliasTarget(t.to_string())),
            None => Ok(()),
        }
    }

    pub fn read_json(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Relabel mapped spans and drop spans whose label is neither mapped nor in
/// `labels`. Returns the rewritten sentences and the number of dropped spans.
pub fn apply_alias(
    sentences: &[AnnotatedSentence],
    alias: &LabelAliasMap,
    labels: &LabelSet,
) -> (Vec<AnnotatedSentence>, usize) {
    let mut dropped = 0;
    let out = sentences
        .iter()
        .map(|s| {
            let spans = s
                .spans
                .iter()
                .filter_map(|sp| {
                    if let Some(target) = alias.get(sp.label.as_str()) {
                        Some(Span {
                            label: target.clone(),
                            ..sp.clone()
                        })
                    } else if labels.contains(sp.label.as_str()) {
                        Some(sp.clone())
                    } else {
                        dropped += 1;
                        None
                    }
                })
                .collect();
            AnnotatedSentence {
                spans,
                ..s.clone()
            }
        })
        .collect();
    (out, dropped)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Gold characters per label.
    #[default]
    Characters,
    /// Gold spans per label.
    Entities,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Character,
    /// Auxiliary: a span counts only on an exact `(start, end, label)` match.
    Entity,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    pub alias: Option<LabelAliasMap>,
    pub weighting: Weighting,
    pub mode: EvalMode,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a denominator was zero and the affected value defaulted to 0.
    pub zero_division: bool,
}

impl Metrics {
    pub fn from_counts(c: Counts) -> Self {
        let (p, pz) = ratio(c.tp, c.tp + c.fp);
        let (r, rz) = ratio(c.tp, c.tp + c.fn_);
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Metrics {
            precision: p,
            recall: r,
            f1,
            zero_division: pz || rz,
        }
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: Label,
    pub counts: Counts,
    pub metrics: Metrics,
    pub gold_chars: u64,
    pub gold_entities: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub mode: EvalMode,
    pub weighting: Weighting,
    pub labels: Vec<LabelScore>,
    pub total: Metrics,
    pub dropped_gold_spans: usize,
    pub dropped_pred_spans: usize,
    /// Column headings such as `Drug = Medikation` when an alias was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias_headings: Option<Vec<String>>,
}

impl ScoreReport {
    pub fn label(&self, name: &str) -> Option<&LabelScore> {
        self.labels.iter().find(|l| l.label == *name)
    }

    /// Rows Pr/Re/F1, one column per label plus Total. With an alias only the
    /// alias targets are shown and the Total column is omitted.
    pub fn to_table(&self) -> String {
        let mut columns: Vec<(String, Metrics)> = match &self.alias_headings {
            Some(h) => h.iter().cloned().zip(self.labels.iter().map(|l| l.metrics)).collect(),
            None => self.labels.iter().map(|l| (l.label.to_string(), l.metrics)).collect(),
        };
        if self.alias_headings.is_none() {
            columns.push(("Total".to_string(), self.total));
        }
        let mut out = String::new();
        for (name, _) in &columns {
            let _ = write!(out, "\t{name}");
        }
        out.push('\n');
        for (row, get) in [
            ("Pr", (|m: &Metrics| m.precision) as fn(&Metrics) -> f64),
            ("Re", |m: &Metrics| m.recall),
            ("F1", |m: &Metrics| m.f1),
        ] {
            out.push_str(row);
            for (_, m) in &columns {
                let _ = write!(out, "\t{:.3}", get(m));
            }
            out.push('\n');
        }
        out
    }
}

/// Score predictions against gold.
///
/// Sentences are aligned by id; both sides must hold the same ids with the
/// same text. Without an alias the scored labels are the gold label set. With
/// an alias it is applied to both sides and only its targets are scored;
/// spans whose label ends up outside the scored set are dropped and counted.
pub fn score(gold: &Corpus, pred: &Corpus, options: &ScoreOptions) -> Result<ScoreReport, EvalError> {
    let empty = LabelAliasMap::new();
    let alias = options.alias.as_ref().unwrap_or(&empty);
    let scored: Vec<Label> = match &options.alias {
        Some(a) => a.targets(),
        None => gold.labelset().iter().cloned().collect(),
    };
    // None only for an empty alias map, which scores nothing.
    let scored_set = LabelSet::new(scored.clone()).ok();

    let normalize = |sentences: &[AnnotatedSentence]| -> (Vec<AnnotatedSentence>, usize) {
        match &scored_set {
            Some(ls) => apply_alias(sentences, alias, ls),
            None => {
                let n = sentences.iter().map(|s| s.spans.len()).sum();
                let stripped = sentences
                    .iter()
                    .map(|s| AnnotatedSentence {
                        spans: Vec::new(),
                        ..s.clone()
                    })
                    .collect();
                (stripped, n)
            }
        }
    };
    let (gold_s, dropped_gold) = normalize(gold.sentences());
    let (pred_s, dropped_pred) = normalize(pred.sentences());
    let pairs = align(&gold_s, &pred_s)?;

    let index: HashMap<&Label, usize> = scored.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let mut counts = vec![Counts::default(); scored.len()];
    let mut gold_chars = vec![0u64; scored.len()];
    let mut gold_entities = vec![0u64; scored.len()];

    for (g, p) in pairs {
        for sp in &g.spans {
            gold_chars[index[&sp.label]] += sp.len() as u64;
            gold_entities[index[&sp.label]] += 1;
        }
        match options.mode {
            EvalMode::Character => count_chars(g, p, &index, &mut counts),
            EvalMode::Entity => count_entities(g, p, &index, &mut counts),
        }
    }

    let labels: Vec<LabelScore> = scored
        .iter()
        .enumerate()
        .map(|(i, l)| LabelScore {
            label: l.clone(),
            counts: counts[i],
            metrics: Metrics::from_counts(counts[i]),
            gold_chars: gold_chars[i],
            gold_entities: gold_entities[i],
        })
        .collect();
    let total = weighted_total(&labels, options.weighting);
    let alias_headings = options.alias.as_ref().map(|a| {
        scored
            .iter()
            .map(|t| {
                let sources: Vec<&str> = a.iter().filter(|(_, v)| *v == t).map(|(k, _)| k).collect();
                format!("{} = {}", sources.join("/"), t)
            })
            .collect()
    });

    Ok(ScoreReport {
        mode: options.mode,
        weighting: options.weighting,
        labels,
        total,
        dropped_gold_spans: dropped_gold,
        dropped_pred_spans: dropped_pred,
        alias_headings,
    })
}

fn align<'a>(
    gold: &'a [AnnotatedSentence],
    pred: &'a [AnnotatedSentence],
) -> Result<Vec<(&'a AnnotatedSentence, &'a AnnotatedSentence)>, EvalError> {
    let by_id: HashMap<&str, &AnnotatedSentence> = pred.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut pairs = Vec::with_capacity(gold.len());
    for g in gold {
        let p = by_id
            .get(g.id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(g.id.clone()))?;
        if p.text != g.text {
            return Err(EvalError::TextMismatch(g.id.clone()));
        }
        pairs.push((g, *p));
    }
    if pairs.len() != pred.len() {
        let gold_ids: std::collections::HashSet<&str> = gold.iter().map(|s| s.id.as_str()).collect();
        let extra = pred.iter().find(|s| !gold_ids.contains(s.id.as_str())).expect("extra prediction");
        return Err(EvalError::UnexpectedPrediction(extra.id.clone()));
    }
    Ok(pairs)
}

fn count_chars(g: &AnnotatedSentence, p: &AnnotatedSentence, index: &HashMap<&Label, usize>, counts: &mut [Counts]) {
    let gold = char_labels(g);
    let pred = char_labels(p);
    for (gl, pl) in gold.iter().zip(&pred) {
        match (gl, pl) {
            (Some(a), Some(b)) if a == b => counts[index[a]].tp += 1,
            _ => {
                if let Some(a) = gl {
                    counts[index[a]].fn_ += 1;
                }
                if let Some(b) = pl {
                    counts[index[b]].fp += 1;
                }
            }
        }
    }
}

fn count_entities(g: &AnnotatedSentence, p: &AnnotatedSentence, index: &HashMap<&Label, usize>, counts: &mut [Counts]) {
    for sp in &p.spans {
        if g.spans.contains(sp) {
            counts[index[&sp.label]].tp += 1;
        } else {
            counts[index[&sp.label]].fp += 1;
        }
    }
    for sp in &g.spans {
        if !p.spans.contains(sp) {
            counts[index[&sp.label]].fn_ += 1;
        }
    }
}

/// Support-weighted average of the per-label metrics. With no gold support at
/// all the total is 0 and flagged.
pub fn weighted_total(labels: &[LabelScore], weighting: Weighting) -> Metrics {
    let weight = |l: &LabelScore| match weighting {
        Weighting::Characters => l.gold_chars,
        Weighting::Entities => l.gold_entities,
    } as f64;
    let total_weight: f64 = labels.iter().map(weight).sum();
    if total_weight == 0.0 {
        return Metrics {
            zero_division: true,
            ..Metrics::default()
        };
    }
    let avg = |f: fn(&Metrics) -> f64| labels.iter().map(|l| weight(l) * f(&l.metrics)).sum::<f64>() / total_weight;
    Metrics {
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
        zero_division: labels.iter().any(|l| weight(l) > 0.0 && l.metrics.zero_division),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(n: &str) -> Label {
        Label::new(n).unwrap()
    }

    fn span(s: usize, e: usize, l: &str) -> Span {
        Span::new(s, e, label(l)).unwrap()
    }

    fn corpus(labels: &[&str], sentences: Vec<AnnotatedSentence>) -> Corpus {
        Corpus::new(sentences, LabelSet::from_names(labels.iter().copied()).unwrap()).unwrap()
    }

    fn one(spans: Vec<Span>, labels: &[&str]) -> Corpus {
        corpus(labels, vec![AnnotatedSentence::new("s", "abcdefghijkl", spans)])
    }

    #[test]
    fn char_labeling() {
        let s = AnnotatedSentence::new("a", "abc", vec![span(0, 2, "X")]);
        assert_eq!(char_labels(&s), vec![Some(label("X")), Some(label("X")), None]);
        let fig = AnnotatedSentence::new(
            "p",
            "Pantoprazol 40 mg p.o.",
            vec![span(0, 11, "Medikation"), span(12, 17, "Dosis")],
        );
        let cl = char_labels(&fig);
        assert_eq!(cl.iter().filter(|l| l.as_ref().is_some_and(|l| *l == "Medikation")).count(), 11);
        assert_eq!(cl.iter().filter(|l| l.as_ref().is_some_and(|l| *l == "Dosis")).count(), 5);
        assert_eq!(cl.iter().filter(|l| l.is_none()).count(), 6);
    }

    #[test]
    fn half_overlap() {
        let r = score(&one(vec![span(0, 10, "X")], &["X"]), &one(vec![span(0, 5, "X")], &["X"]), &ScoreOptions::default()).unwrap();
        let m = r.label("X").unwrap().metrics;
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_label_full_overlap() {
        let gold = one(vec![span(0, 4, "X")], &["X", "Y"]);
        let pred = one(vec![span(0, 4, "Y")], &["X", "Y"]);
        let r = score(&gold, &pred, &ScoreOptions::default()).unwrap();
        for l in ["X", "Y"] {
            let m = r.label(l).unwrap().metrics;
            assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
            assert!(m.zero_division);
        }
    }

    #[test]
    fn alias_maps_and_drops() {
        let mut alias = LabelAliasMap::new();
        alias.insert("Drug", label("Medikation"));
        let pred = vec![AnnotatedSentence::new("a", "Aspirin oral", vec![span(0, 7, "Drug"), span(8, 12, "Route")])];
        let (out, dropped) = apply_alias(&pred, &alias, &LabelSet::medical());
        assert_eq!(out[0].spans, vec![span(0, 7, "Medikation")]);
        assert_eq!(dropped, 1);
        let (same, none) = apply_alias(&out, &LabelAliasMap::new(), &LabelSet::medical());
        assert_eq!((same, none), (out, 0));
    }

    #[test]
    fn alias_report_is_single_column() {
        let mut alias = LabelAliasMap::new();
        alias.insert("Drug", label("Medikation"));
        let gold = one(vec![span(0, 4, "Drug")], &["Drug"]);
        let pred = one(vec![span(0, 4, "Medikation"), span(5, 8, "Dosis")], &["Medikation", "Dosis", "Diagnose"]);
        let r = score(&gold, &pred, &ScoreOptions { alias: Some(alias), ..Default::default() }).unwrap();
        assert_eq!(r.labels.len(), 1);
        assert_eq!(r.dropped_pred_spans, 1);
        assert_eq!(r.to_table(), "\tDrug = Medikation\nPr\t1.000\nRe\t1.000\nF1\t1.000\n");
    }

    #[test]
    fn misalignment_is_fatal() {
        let gold = one(vec![], &["X"]);
        let other = corpus(&["X"], vec![AnnotatedSentence::new("t", "abcdefghijkl", vec![])]);
        assert_eq!(
            score(&gold, &other, &ScoreOptions::default()).unwrap_err(),
            EvalError::MissingPrediction("s".into())
        );
        let changed = corpus(&["X"], vec![AnnotatedSentence::new("s", "abc", vec![])]);
        assert_eq!(
            score(&gold, &changed, &ScoreOptions::default()).unwrap_err(),
            EvalError::TextMismatch("s".into())
        );
    }

    #[test]
    fn entity_mode_requires_exact_match() {
        let gold = one(vec![span(0, 10, "X"), span(11, 12, "X")], &["X"]);
        let pred = one(vec![span(0, 5, "X"), span(11, 12, "X")], &["X"]);
        let opts = ScoreOptions { mode: EvalMode::Entity, ..Default::default() };
        let c = score(&gold, &pred, &opts).unwrap().label("X").unwrap().counts;
        assert_eq!(c, Counts { tp: 1, fp: 1, fn_: 1 });
    }

    #[test]
    fn table_layout() {
        let gold = one(vec![span(0, 2, "X")], &["X"]);
        let r = score(&gold, &gold, &ScoreOptions::default()).unwrap();
        assert_eq!(r.to_table(), "\tX\tTotal\nPr\t1.000\t1.000\nRe\t1.000\t1.000\nF1\t1.000\t1.000\n");
    }
}
