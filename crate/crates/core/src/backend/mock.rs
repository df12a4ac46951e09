use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionBackend, CompletionRequest};
use crate::markup::{CLASS_CLOSE, SENTENCE_CLOSE, SENTENCE_OPEN};
use crate::sampling::{decode_step, LogitVector, SplitMix64};

/// Test double for a language model: fills sentence templates from per-label
/// lexicons and injects the defects the curation stage has to remove.
///
/// Templates use `{Label}` placeholders. Template choice runs through the real
/// decoding path (temperature, nucleus, inverse CDF) over `template_logits`,
/// so temperature changes how repetitive the output is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockProfile {
    pub missing_close: f64,
    pub invalid_syntax: f64,
    pub unknown_label: f64,
    pub no_annotation: f64,
    pub duplicate: f64,
    pub min_sentences: u32,
    pub max_sentences: u32,
    pub unknown_label_name: String,
    pub templates: Vec<String>,
    /// One score per template; defaults to a gentle linear preference.
    pub template_logits: Option<Vec<f64>>,
    pub lexicon: BTreeMap<String, Vec<String>>,
}

impl MockProfile {
    /// Every defect rate set to zero.
    pub fn clean() -> Self {
        MockProfile {
            missing_close: 0.0,
            invalid_syntax: 0.0,
            unknown_label: 0.0,
            no_annotation: 0.0,
            duplicate: 0.0,
            ..MockProfile::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::Config(m));
        for (name, rate) in [
            ("missing_close", self.missing_close),
            ("invalid_syntax", self.invalid_syntax),
            ("unknown_label", self.unknown_label),
            ("no_annotation", self.no_annotation),
            ("duplicate", self.duplicate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("mock rate {name} = {rate} outside [0, 1]"));
            }
        }
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return bad("mock needs 1 <= min_sentences <= max_sentences".into());
        }
        if self.templates.is_empty() {
            return bad("mock profile has no templates".into());
        }
        if let Some(logits) = &self.template_logits {
            if logits.len() != self.templates.len() {
                return bad("template_logits must have one entry per template".into());
            }
            LogitVector::new(logits.clone()).map_err(|e| BackendError::Config(e.to_string()))?;
        }
        for template in &self.templates {
            for piece in split_template(template) {
                if let Piece::Slot(label) = piece {
                    if self.lexicon.get(label).is_none_or(|v| v.is_empty()) {
                        return bad(format!("no lexicon entries for placeholder {{{label}}}"));
                    }
                }
            }
        }
        for (label, terms) in &self.lexicon {
            if let Some(t) = terms.iter().find(|t| t.contains(['<', '>', '{', '}'])) {
                return bad(format!("lexicon term {t:?} for {label} contains markup characters"));
            }
        }
        Ok(())
    }

    fn logits(&self) -> LogitVector {
        let values = self
            .template_logits
            .clone()
            .unwrap_or_else(|| (0..self.templates.len()).map(|i| -0.25 * i as f64).collect());
        LogitVector::new(values).expect("validated")
    }
}

impl Default for MockProfile {
    fn default() -> Self {
        let templates = [
            "Zur weiteren Bekämpfung des {Diagnose} wird die Einnahme von täglich {Dosis} {Medikation} empfohlen.",
            "{Medikation} {Dosis} p.o.",
            "Der Patient klagt über {Diagnose} und nimmt täglich {Medikation} ein.",
            "Entlassung: {Dosis} {Medikation} wegen {Diagnose}",
            "Die Verschreibung von {Medikation} {Dosis} war unnötig.",
            "Bei bekannter {Diagnose} wurde {Medikation} auf {Dosis} reduziert.",
            "Aufgrund einer {Diagnose} erhielt die Patientin {Dosis} {Medikation} i.v.",
            "{Medikation} {Dosis} 1-0-1",
            "Unter {Medikation} kam es zu einer deutlichen Besserung der {Diagnose}.",
            "Es besteht der Verdacht auf {Diagnose}.",
            "Wir empfehlen die Fortführung der Therapie mit {Medikation} ({Dosis} täglich).",
            "Die Patientin stellte sich mit {Diagnose} und {Diagnose} vor.",
            "Ich nehme {Medikation} seit Tagen. Seitdem ist die {Diagnose} deutlich besser geworden.",
            "Nach Gabe von {Dosis} {Medikation} war der Patient beschwerdefrei.",
        ];
        let lexicon = [
            (
                "Medikation",
                &[
                    "Cortison", "Insulin", "Pantoprazol", "Valsartan", "Lidocain", "Nifedipin",
                    "Metformin", "Ibuprofen", "Ramipril", "Amoxicillin", "Heparin", "Bisoprolol",
                    "Simvastatin", "Torasemid", "Metamizol", "Prednisolon",
                ][..],
            ),
            (
                "Dosis",
                &[
                    "100mg", "40 mg", "12ml", "5 mg", "2,5 mg", "500 mg", "1 g", "20mg",
                    "10 IE", "75 µg", "250 mg", "0,5 mg",
                ][..],
            ),
            (
                "Diagnose",
                &[
                    "Juckreiz", "Sepsis", "Pneumonie", "Kopfschmerzen", "Hypertonie",
                    "Diabetes Typ 2", "Mandelentzündung", "Vorhofflimmern", "Gastritis",
                    "Niereninsuffizienz", "Migräne", "Bronchitis", "Herzinsuffizienz",
                    "Refluxösophagitis",
                ][..],
            ),
        ];
        MockProfile {
            missing_close: 0.07,
            invalid_syntax: 0.002,
            unknown_label: 0.06,
            no_annotation: 0.05,
            duplicate: 0.3,
            min_sentences: 8,
            max_sentences: 16,
            unknown_label_name: "Symptom".to_string(),
            templates: templates.iter().map(|t| t.to_string()).collect(),
            template_logits: None,
            lexicon: lexicon
                .iter()
                .map(|(l, terms)| (l.to_string(), terms.iter().map(|t| t.to_string()).collect()))
                .collect(),
        }
    }
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn split_template(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        if open > 0 {
            out.push(Piece::Text(&rest[..open]));
        }
        out.push(Piece::Slot(&rest[open + 1..open + close]));
        rest = &rest[open + close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    out
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    id: String,
    profile: MockProfile,
}

impl MockBackend {
    pub fn new(id: impl Into<String>, profile: MockProfile) -> Result<Self, BackendError> {
        profile.validate()?;
        Ok(MockBackend {
            id: id.into(),
            profile,
        })
    }

    pub fn profile(&self) -> &MockProfile {
        &self.profile
    }

    fn fresh_sentence(&self, rng: &mut SplitMix64, request: &CompletionRequest<'_>) -> String {
        let p = &self.profile;
        let (template, _) = decode_step(&p.logits(), &request.params, rng.next_u64())
            .expect("validated sampling params");

        // (text, label) pieces; label None means plain text.
        let mut pieces: Vec<(String, Option<String>)> = Vec::new();
        for piece in split_template(&p.templates[template]) {
            match piece {
                Piece::Text(t) => pieces.push((t.to_string(), None)),
                Piece::Slot(label) => {
                    let terms = &p.lexicon[label];
                    let term = &terms[(rng.next_u64() % terms.len() as u64) as usize];
                    pieces.push((term.clone(), Some(label.to_string())));
                }
            }
        }

        let drop_labels = rng.next_f64() < p.no_annotation;
        let relabel = rng.next_f64() < p.unknown_label;
        let break_syntax = rng.next_f64() < p.invalid_syntax;
        let pick = rng.next_u64();

        if drop_labels {
            for piece in &mut pieces {
                piece.1 = None;
            }
        }
        let labeled: Vec<usize> = (0..pieces.len()).filter(|&i| pieces[i].1.is_some()).collect();
        if relabel && !labeled.is_empty() {
            let i = labeled[(pick % labeled.len() as u64) as usize];
            pieces[i].1 = Some(p.unknown_label_name.clone());
        }

        let mut body = String::new();
        for (text, label) in &pieces {
            match label {
                Some(l) => {
                    body.push_str(&format!("<class=\"{l}\">{text}"));
                    body.push_str(CLASS_CLOSE);
                }
                None => body.push_str(text),
            }
        }
        if break_syntax {
            // Reopen instead of closing the first entity, or leave a stray close.
            match labeled.first() {
                Some(&i) => {
                    let label = pieces[i].1.as_deref().unwrap_or_default();
                    body = body.replacen(CLASS_CLOSE, &format!("<class=\"{label}\">"), 1);
                }
                None => body.push_str(CLASS_CLOSE),
            }
        }
        body
    }
}

impl CompletionBackend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    /// The continuation starts right after the prompt's trailing `<s>`, so the
    /// first sentence carries no opening tag of its own. Whole sentences are
    /// emitted until the next one would exceed `max_tokens` whitespace tokens.
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let p = &self.profile;
        let mut rng = SplitMix64::new(request.params.seed ^ request.sample_index);
        let span = u64::from(p.max_sentences - p.min_sentences) + 1;
        let count = p.min_sentences as u64 + rng.next_u64() % span;

        let mut sentences: Vec<String> = Vec::new();
        let mut out = String::new();
        let mut used_tokens = 0usize;
        for n in 0..count {
            let duplicate = rng.next_f64() < p.duplicate;
            let pick = rng.next_u64();
            let sentence = if duplicate && !sentences.is_empty() {
                sentences[(pick % sentences.len() as u64) as usize].clone()
            } else {
                let mut s = self.fresh_sentence(&mut rng, request);
                if rng.next_f64() >= p.missing_close {
                    s.push_str(SENTENCE_CLOSE);
                }
                s
            };
            let tokens = sentence.split_whitespace().count() + 1;
            if used_tokens + tokens > request.params.max_tokens as usize {
                break;
            }
            used_tokens += tokens;
            sentences.push(sentence.clone());
            if n > 0 {
                out.push('\n');
                out.push_str(SENTENCE_OPEN);
            }
            out.push_str(&sentence);
        }
        Ok(out)
    }
}
