//! Cleansing of raw samples into a corpus, plus statistics, splitting and export.

mod bio;
mod filter;
mod split;
mod stats;
mod tokenize;

use std::path::Path;

pub use bio::{bio_tags, decode_bio, write_bio, Tag};
pub use filter::{
    apply_filters, dedup_key, rounded_percent, FilterReport, LabelRemovals, Stage, StageOrder,
    StageReport,
};
pub use split::{split, Split, SplitSpec};
pub use stats::{corpus_stats, CorpusStats};
pub use tokenize::{token_strings, tokenize, Token};

use crate::corpus::Corpus;
use crate::error::Result;
use crate::io::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Jsonl,
    Bio,
}

pub fn export(corpus: &Corpus, format: ExportFormat, path: &Path) -> Result<()> {
    match format {
        ExportFormat::Jsonl => corpus.write_jsonl_file(path),
        ExportFormat::Bio => write_atomic(path, |w| write_bio(corpus, w)),
    }
}
