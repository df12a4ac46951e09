//! Silver-standard NER corpus synthesis by few-shot prompting.
//!
//! Example sentences are written in an inline markup
//! (`<s>… <class="Dosis">40 mg</class> …</s>`), fed to a completion backend as a
//! prompt, and the continuations are parsed, filtered, split, exported and
//! scored character-wise.

pub mod backend;
pub mod corpus;
pub mod curation;
pub mod error;
pub mod eval;
pub mod io;
pub mod markup;
pub mod prompt;
pub mod sampling;

pub use corpus::{AnnotatedSentence, Corpus, Label, LabelSet, SampleProvenance, Span};
pub use error::{Error, Result};
pub use markup::{encode_sentence, parse_document, parse_sentence, DiagnosticKind, RawSample};
pub use prompt::{build_prompt, Prompt};
pub use sampling::{SamplingParams, SplitMix64};
