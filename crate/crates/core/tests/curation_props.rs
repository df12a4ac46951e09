mod common;

use std::collections::BTreeSet;

use common::{arb_corpus, arb_sentence, arb_text, span, workspace_file, LABELS};
use proptest::prelude::*;
use synthner::backend::read_raw_samples;
use synthner::curation::{
    apply_filters, bio_tags, corpus_stats, decode_bio, split, tokenize, FilterReport, SplitSpec, StageOrder,
};
use synthner::markup::{encode_sentence, RawSample};
use synthner::{AnnotatedSentence, Corpus, LabelSet, Span};

fn remaining(report: &FilterReport) -> Vec<usize> {
    report.stages.iter().map(|s| s.remaining).collect()
}

/// Put each sentence of a corpus back into markup, one raw sample per sentence.
fn rewrap(corpus: &Corpus) -> Vec<RawSample> {
    corpus
        .sentences()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut raw = RawSample::from_markup(encode_sentence(s).unwrap(), "again");
            raw.sample_index = i as u64;
            raw.provenance.sample_index = i as u64;
            raw
        })
        .collect()
}

fn defect_fixture() -> Vec<RawSample> {
    read_raw_samples(&workspace_file("fixtures/defect_raw.jsonl")).unwrap()
}

#[test]
fn defect_fixture_stage_counts() {
    let (corpus, report) = apply_filters(&defect_fixture(), &LabelSet::medical(), StageOrder::Table);
    assert_eq!(report.baseline, 10);
    assert_eq!(remaining(&report), [9, 7, 7, 6]);
    assert_eq!(report.final_count, 6);
    assert_eq!(corpus.len(), 6);
    assert_eq!(report.label_removals.unknown_label, 1);
    assert_eq!(report.label_removals.no_annotation, 0);
    // The first Pantoprazol occurrence survives.
    assert_eq!(corpus.sentences()[0].id, "fixture:0:0");
}

#[test]
fn defect_fixture_is_idempotent() {
    let (corpus, _) = apply_filters(&defect_fixture(), &LabelSet::medical(), StageOrder::Table);
    let (again, report) = apply_filters(&rewrap(&corpus), &LabelSet::medical(), StageOrder::Table);
    assert_eq!(remaining(&report), [6, 6, 6, 6]);
    let key = |c: &Corpus| c.sentences().iter().map(|s| (s.text.clone(), s.spans.clone())).collect::<Vec<_>>();
    assert_eq!(key(&again), key(&corpus));
}

#[test]
fn prose_order_gives_same_survivors_here() {
    let (a, _) = apply_filters(&defect_fixture(), &LabelSet::medical(), StageOrder::Table);
    let (b, report) = apply_filters(&defect_fixture(), &LabelSet::medical(), StageOrder::Prose);
    assert_eq!(remaining(&report), [9, 9, 8, 6]);
    assert_eq!(a, b);
}

#[test]
fn same_text_different_annotation_keeps_first() {
    let raw = RawSample::from_markup(
        "<s><class=\"Medikation\">ASS</class> 100</s><s>ASS <class=\"Dosis\">100</class></s>",
        "x",
    );
    let (corpus, report) = apply_filters(&[raw], &LabelSet::medical(), StageOrder::Table);
    assert_eq!(remaining(&report), [2, 1, 1, 1]);
    assert_eq!(corpus.sentences()[0].spans, vec![span(0, 3, "Medikation")]);
}

#[test]
fn published_table_replay() {
    let counts = [17776usize, 16603, 11328, 11326, 9845];
    let names = ["a", "b", "c", "d"];
    let stages: Vec<(&str, usize)> = names.iter().copied().zip(counts[1..].iter().copied()).collect();
    let report = FilterReport::from_counts(counts[0], &stages);
    let pct: Vec<u64> = report.stages.iter().map(|s| s.pct_of_baseline).collect();
    assert_eq!(pct, [93, 64, 64, 55]);
    // Independent float evaluation of round(removed / total * 100).
    let total = (counts[0] - counts[4]) as f64;
    let oracle: Vec<u64> = counts
        .windows(2)
        .map(|w| ((w[0] - w[1]) as f64 / total * 100.0).round() as u64)
        .collect();
    let impact: Vec<u64> = report.stages.iter().map(|s| s.impact).collect();
    assert_eq!(impact, oracle);
}

#[test]
fn published_corpus_size_split() {
    assert_eq!(SplitSpec::default().sizes(9845), (7877, 984, 984));
}

// Raw samples mixing valid sentences, exact duplicates and each defect kind.
fn arb_raws() -> impl Strategy<Value = Vec<RawSample>> {
    let segment = prop_oneof![
        4 => arb_sentence().prop_map(|s| encode_sentence(&s).unwrap()),
        1 => Just("<s><class=\"Medikation\">ASS</class> 100 mg</s>".to_string()),
        1 => arb_text(10).prop_map(|t| format!("<s>{t}")),
        1 => arb_text(10).prop_map(|t| format!("<s>{t}</class></s>")),
        1 => arb_text(10).prop_map(|t| format!("<s><class=\"Symptom\">{t}</class></s>")),
    ];
    prop::collection::vec(prop::collection::vec(segment, 0..6), 0..6).prop_map(|samples| {
        samples
            .into_iter()
            .enumerate()
            .map(|(i, segs)| {
                let mut raw = RawSample::from_markup(segs.join("\n"), "p");
                raw.sample_index = i as u64;
                raw.provenance.sample_index = i as u64;
                raw
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn filters_are_idempotent(raws in arb_raws()) {
        let (corpus, _) = apply_filters(&raws, &LabelSet::medical(), StageOrder::Table);
        let (again, report) = apply_filters(&rewrap(&corpus), &LabelSet::medical(), StageOrder::Table);
        prop_assert_eq!(report.baseline, corpus.len());
        prop_assert_eq!(report.final_count, corpus.len());
        prop_assert_eq!(again.len(), corpus.len());
    }

    #[test]
    fn report_is_consistent(raws in arb_raws()) {
        let (corpus, report) = apply_filters(&raws, &LabelSet::medical(), StageOrder::Table);
        let counts = remaining(&report);
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(counts[0] <= report.baseline);
        prop_assert_eq!(report.final_count, corpus.len());
        let removed: usize = report.stages.iter().map(|s| s.removed).sum();
        prop_assert_eq!(removed, report.baseline - report.final_count);
        if removed == 0 {
            prop_assert!(report.stages.iter().all(|s| s.impact == 0));
        }
    }

    #[test]
    fn report_totals_ignore_sample_order(raws in arb_raws(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = raws.clone();
        shuffled.shuffle(&mut synthner::SplitMix64::new(seed));
        for (i, r) in shuffled.iter_mut().enumerate() {
            r.sample_index = i as u64;
            r.provenance.sample_index = i as u64;
        }
        let (_, a) = apply_filters(&raws, &LabelSet::medical(), StageOrder::Table);
        let (_, b) = apply_filters(&shuffled, &LabelSet::medical(), StageOrder::Table);
        prop_assert_eq!(remaining(&a), remaining(&b));
    }

    #[test]
    fn unique_valid_input_passes_untouched(n in 1usize..30) {
        let lines: Vec<String> = (0..n)
            .map(|i| format!("<s>Satz {i} mit <class=\"Dosis\">{i} mg</class>.</s>"))
            .collect();
        let raw = RawSample::from_markup(lines.join("\n"), "u");
        let (_, report) = apply_filters(&[raw], &LabelSet::medical(), StageOrder::Table);
        prop_assert_eq!(remaining(&report), vec![n; 4]);
        prop_assert!(report.stages.iter().all(|s| s.impact == 0 && s.pct_of_baseline == 100));
    }

    #[test]
    fn jsonl_round_trip(corpus in arb_corpus(20)) {
        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).unwrap();
        let back = Corpus::read_jsonl(&buf[..], "mem", LabelSet::medical()).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn stats_entity_counts_sum_to_spans(corpus in arb_corpus(20)) {
        let st = corpus_stats(&corpus);
        let spans: usize = corpus.sentences().iter().map(|s| s.spans.len()).sum();
        prop_assert_eq!(st.entity_total(), spans);
        prop_assert_eq!(st.sentence_count, corpus.len());
        let tokens: usize = corpus.sentences().iter().map(|s| tokenize(&s.text).len()).sum();
        prop_assert_eq!(st.token_count, tokens);
    }

    #[test]
    fn tokens_are_ordered_and_non_whitespace(text in arb_text(60)) {
        let chars: Vec<char> = text.chars().collect();
        let tokens = tokenize(&text);
        let mut last = 0;
        for t in &tokens {
            prop_assert!(t.start >= last && t.start < t.end && t.end <= chars.len());
            prop_assert!(chars[t.start..t.end].iter().all(|c| !c.is_whitespace()));
            last = t.end;
        }
        let covered: usize = tokens.iter().map(|t| t.end - t.start).sum();
        prop_assert_eq!(covered, chars.iter().filter(|c| !c.is_whitespace()).count());
    }

    #[test]
    fn bio_recovers_token_aligned_spans(
        text in arb_text(60),
        picks in prop::collection::vec((any::<prop::sample::Index>(), 1usize..4, prop::sample::select(&LABELS[..])), 0..5),
    ) {
        let tokens = tokenize(&text);
        prop_assume!(!tokens.is_empty());
        let mut spans: Vec<Span> = Vec::new();
        let mut next_free = 0;
        let mut chosen: Vec<(usize, usize, &str)> = picks
            .into_iter()
            .map(|(i, len, l)| {
                let a = i.index(tokens.len());
                (a, (a + len).min(tokens.len()), l)
            })
            .collect();
        chosen.sort();
        for (a, b, l) in chosen {
            if a >= next_free {
                spans.push(span(tokens[a].start, tokens[b - 1].end, l));
                next_free = b;
            }
        }
        let sentence = AnnotatedSentence::new("b", text, spans.clone());
        prop_assert_eq!(decode_bio(&tokens, &bio_tags(&sentence, &tokens)), spans);
    }

    #[test]
    fn split_is_a_partition(corpus in arb_corpus(60), seed in any::<u64>()) {
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        let parts = split(&corpus, &spec).unwrap();
        let (n_train, n_val, n_test) = spec.sizes(corpus.len());
        prop_assert_eq!((parts.train.len(), parts.validation.len(), parts.test.len()), (n_train, n_val, n_test));
        let mut seen = BTreeSet::new();
        for part in [&parts.train, &parts.validation, &parts.test] {
            for s in part.sentences() {
                prop_assert!(seen.insert(s.id.clone()), "duplicate id {}", s.id);
            }
        }
        let all: BTreeSet<String> = corpus.sentences().iter().map(|s| s.id.clone()).collect();
        prop_assert_eq!(seen, all);
    }
}

#[test]
fn split_same_seed_same_assignment() {
    let sentences = (0..200)
        .map(|i| AnnotatedSentence::new(format!("s{i}"), format!("Satz {i}"), vec![]))
        .collect();
    let corpus = Corpus::new(sentences, LabelSet::medical()).unwrap();
    let ids = |seed| {
        let p = split(&corpus, &SplitSpec { seed, ..Default::default() }).unwrap();
        p.test.sentences().iter().map(|s| s.id.clone()).collect::<Vec<_>>()
    };
    assert_eq!(ids(1), ids(1));
    assert_ne!(ids(1), ids(2));
}
