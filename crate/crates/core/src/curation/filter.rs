use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{AnnotatedSentence, Corpus, LabelSet};
use crate::markup::{segments, RawSample, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    MissingClose,
    Duplicates,
    InvalidSyntax,
    InvalidLabels,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::MissingClose => "no </s> tag",
            Stage::Duplicates => "duplicates removal",
            Stage::InvalidSyntax => "invalid syntax removal",
            Stage::InvalidLabels => "invalid or no labels",
        }
    }
}

/// Order in which the four filters run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    /// Close tag, dedup, syntax, labels.
    #[default]
    Table,
    /// Close tag, syntax, labels, dedup.
    Prose,
}

impl StageOrder {
    pub fn stages(self) -> [Stage; 4] {
        match self {
            StageOrder::Table => [
                Stage::MissingClose,
                Stage::Duplicates,
                Stage::InvalidSyntax,
                Stage::InvalidLabels,
            ],
            StageOrder::Prose => [
                Stage::MissingClose,
                Stage::InvalidSyntax,
                Stage::InvalidLabels,
                Stage::Duplicates,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub remaining: usize,
    pub removed: usize,
    pub pct_of_baseline: u64,
    pub impact: u64,
}

/// Why sentences fell at the merged label stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRemovals {
    pub unknown_label: usize,
    pub no_annotation: usize,
}

/// Per-stage removal accounting.
///
/// `pct_of_baseline = round(remaining / baseline * 100)` and
/// `impact = round(removed / total_removed * 100)`, both rounded half away
/// from zero to an integer percent; zero denominators give 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub baseline: usize,
    pub stages: Vec<StageReport>,
    pub final_count: usize,
    pub label_removals: LabelRemovals,
}

/// `round(num / den * 100)` with ties away from zero, in exact integer arithmetic.
pub fn rounded_percent(num: usize, den: usize) -> u64 {
    if den == 0 {
        return 0;
    }
    let (num, den) = (num as u128, den as u128);
    ((200 * num + den) / (2 * den)) as u64
}

impl FilterReport {
    /// Build the report from the count remaining after each named stage.
    pub fn from_counts(baseline: usize, stages: &[(&str, usize)]) -> Self {
        let final_count = stages.last().map_or(baseline, |s| s.1);
        let total_removed = baseline.saturating_sub(final_count);
        let mut previous = baseline;
        let stages = stages
            .iter()
            .map(|&(name, remaining)| {
                let removed = previous.saturating_sub(remaining);
                previous = remaining;
                StageReport {
                    name: name.to_string(),
                    remaining,
                    removed,
                    pct_of_baseline: rounded_percent(remaining, baseline),
                    impact: rounded_percent(removed, total_removed),
                }
            })
            .collect();
        FilterReport {
            baseline,
            stages,
            final_count,
            label_removals: LabelRemovals::default(),
        }
    }

    /// Tab-separated table: Applied Filter / #Sentences / % of Baseline / Impact.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("Applied Filter\t#Sentences\t% of Baseline\tImpact\n");
        let base_pct = if self.baseline == 0 { 0 } else { 100 };
        let _ = writeln!(out, "Baseline\t{}\t{}%\t", self.baseline, base_pct);
        for s in &self.stages {
            let _ = writeln!(
                out,
                "{}\t{}\t{}%\t{}%",
                s.name, s.remaining, s.pct_of_baseline, s.impact
            );
        }
        let _ = writeln!(
            out,
            "Final\t{}\t{}%\t",
            self.final_count,
            rounded_percent(self.final_count, self.baseline)
        );
        out
    }
}

/// Normalized surface text used to detect duplicates: NFC, whitespace runs
/// collapsed to one space, trimmed. Case and annotations are not considered.
pub fn dedup_key(sentence: &AnnotatedSentence) -> String {
    normalize_text(&sentence.text)
}

fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

// Malformed segments have no surface text; their raw markup stands in. Parsed
// text never contains '<', so the two key spaces cannot collide.
fn segment_key(segment: &Segment) -> String {
    match &segment.outcome {
        Ok(s) => dedup_key(s),
        Err(_) => normalize_text(&segment.markup),
    }
}

/// Parse raw samples and run the four cleansing filters.
///
/// Segments are processed in `(sample_index, segment_index)` order, so dedup
/// keeps the earliest occurrence. If several raw samples share an index only
/// the first is used. The baseline is the number of `<s>` segments found.
pub fn apply_filters(raws: &[RawSample], labels: &LabelSet, order: StageOrder) -> (Corpus, FilterReport) {
    let mut sorted: Vec<&RawSample> = raws.iter().collect();
    sorted.sort_by_key(|r| r.sample_index);
    sorted.dedup_by_key(|r| r.sample_index);

    let mut pool: Vec<Segment> = sorted.into_iter().flat_map(segments).collect();
    let baseline = pool.len();
    let mut counts = Vec::with_capacity(4);
    let mut label_removals = LabelRemovals::default();

    for stage in order.stages() {
        match stage {
            Stage::MissingClose => pool.retain(Segment::has_close),
            Stage::Duplicates => {
                let mut seen = HashSet::new();
                pool.retain(|s| seen.insert(segment_key(s)));
            }
            Stage::InvalidSyntax => pool.retain(|s| s.outcome.is_ok()),
            Stage::InvalidLabels => pool.retain(|s| match &s.outcome {
                Ok(sentence) if sentence.spans.is_empty() => {
                    label_removals.no_annotation += 1;
                    false
                }
                Ok(sentence) if sentence.spans.iter().any(|sp| !labels.contains(sp.label.as_str())) => {
                    label_removals.unknown_label += 1;
                    false
                }
                _ => true,
            }),
        }
        counts.push((stage.name(), pool.len()));
    }

    let sentences: Vec<AnnotatedSentence> = pool.into_iter().filter_map(|s| s.outcome.ok()).collect();
    let corpus = Corpus::new(sentences, labels.clone())
        .expect("filtered sentences satisfy the corpus invariants");
    let mut report = FilterReport::from_counts(baseline, &counts);
    report.label_removals = label_removals;
    (corpus, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(rounded_percent(1, 8), 13); // 12.5
        assert_eq!(rounded_percent(1, 3), 33);
        assert_eq!(rounded_percent(2, 3), 67);
        assert_eq!(rounded_percent(0, 0), 0);
        assert_eq!(rounded_percent(5, 5), 100);
    }

    #[test]
    fn dedup_key_normalization() {
        let a = AnnotatedSentence::new("a", "Kein  Befund. ", vec![]);
        let b = AnnotatedSentence::new("b", "Kein Befund.", vec![]);
        let c = AnnotatedSentence::new("c", "kein Befund.", vec![]);
        assert_eq!(dedup_key(&a), dedup_key(&b));
        assert_ne!(dedup_key(&b), dedup_key(&c));
        // Decomposed ä (a + combining diaeresis) matches the precomposed form.
        let d = AnnotatedSentence::new("d", "Bekämpfung", vec![]);
        let e = AnnotatedSentence::new("e", "Beka\u{308}mpfung", vec![]);
        assert_eq!(dedup_key(&d), dedup_key(&e));
    }

    #[test]
    fn empty_input_gives_zero_report() {
        let (corpus, report) = apply_filters(&[], &LabelSet::medical(), StageOrder::Table);
        assert!(corpus.is_empty());
        assert_eq!(report.baseline, 0);
        assert_eq!(report.final_count, 0);
        assert!(report.stages.iter().all(|s| s.remaining == 0 && s.impact == 0 && s.pct_of_baseline == 0));
    }

    #[test]
    fn tsv_layout() {
        let r = FilterReport::from_counts(4, &[("no </s> tag", 3), ("x", 3)]);
        assert_eq!(
            r.to_tsv(),
            "Applied Filter\t#Sentences\t% of Baseline\tImpact\n\
             Baseline\t4\t100%\t\n\
             no </s> tag\t3\t75%\t100%\n\
             x\t3\t75%\t0%\n\
             Final\t3\t75%\t\n"
        );
    }
}
