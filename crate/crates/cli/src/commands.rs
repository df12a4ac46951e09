use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use synthner::backend::{
    read_raw_samples, run_campaign_to_file, BackendKind, CampaignConfig, CampaignError,
    CampaignOptions, CampaignSpec,
};
use synthner::curation::{self, ExportFormat, SplitSpec, StageOrder};
use synthner::eval::{self, EvalMode, LabelAliasMap, ScoreOptions, Weighting};
use synthner::prompt::load_prompt;
use synthner::{io, AnnotatedSentence, Corpus, Error, Label, LabelSet, RawSample};

use crate::{
    BackendChoice, Command, CurateArgs, EvalArgs, ExportArgs, FormatChoice, LabelsArg, SplitArgs,
    StageOrderChoice, StatsArgs, SynthArgs, WeightingChoice,
};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_BACKEND: u8 = 3;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type CmdResult<T = ()> = Result<T, Failure>;

trait Classify<T> {
    fn code(self, code: u8) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn code(self, code: u8) -> CmdResult<T> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

// Library errors split into usage mistakes and bad data.
fn lib<T>(r: synthner::Result<T>) -> CmdResult<T> {
    r.map_err(|e| {
        let code = match e {
            Error::EmptyPrompt | Error::Config(_) | Error::Sampling(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            error: e.into(),
        }
    })
}

pub fn run(command: Command) -> CmdResult {
    match command {
        Command::Prompt { examples } => cmd_prompt(&examples),
        Command::Synth(args) => cmd_synth(args),
        Command::Curate(args) => cmd_curate(args),
        Command::Split(args) => cmd_split(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Export(args) => cmd_export(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn stdout(text: impl Display) -> CmdResult {
    let mut out = std::io::stdout().lock();
    write!(out, "{text}").and_then(|_| out.flush()).code(EXIT_DATA)
}

fn ensure_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .code(EXIT_DATA)
}

fn ensure_parent(path: &Path) -> CmdResult {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CmdResult {
    ensure_parent(path)?;
    lib(io::write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    }))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    ensure_parent(path)?;
    lib(io::write_atomic(path, |w| w.write_all(text.as_bytes())))
}

fn load_labels(arg: &LabelsArg) -> CmdResult<LabelSet> {
    match &arg.labels {
        Some(path) => lib(LabelSet::read_json(path)),
        None => Ok(LabelSet::medical()),
    }
}

fn load_corpus(path: &Path, labels: &LabelsArg) -> CmdResult<Corpus> {
    lib(Corpus::read_jsonl_file(path, load_labels(labels)?))
}

fn cmd_prompt(examples: &Path) -> CmdResult {
    let prompt = lib(load_prompt(examples))?;
    stdout(prompt.text())
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    let mut config = lib(CampaignConfig::load(&args.config))?;
    match args.backend {
        Some(BackendChoice::Mock) => config.backend = BackendKind::Mock,
        Some(BackendChoice::Remote) => config.backend = BackendKind::Remote,
        None => {}
    }
    let out: PathBuf = args
        .out
        .or_else(|| config.output.clone())
        .ok_or_else(|| anyhow!("no output path: pass --out or set `output` in the config"))
        .code(EXIT_USAGE)?;
    let stages = lib(config.stages(args.seed))?;
    let prompt = lib(load_prompt(&config.examples))?;
    let backend = config.build_backend().code(EXIT_BACKEND)?;
    let spec = CampaignSpec {
        stages,
        prompt,
        backend_id: config.backend_id(),
    };
    let options = CampaignOptions::with_concurrency(args.jobs.unwrap_or(config.concurrency));
    ensure_parent(&out)?;

    eprintln!(
        "synth: {} samples from {} with {} worker(s) -> {}",
        spec.total_samples(),
        backend.id(),
        options.concurrency,
        out.display()
    );
    let outcome = run_campaign_to_file(&spec, backend.as_ref(), &options, &out, args.resume).map_err(|e| {
        let code = match e {
            CampaignError::InvalidSpec(_) => EXIT_USAGE,
            CampaignError::Fatal { .. } => EXIT_BACKEND,
            CampaignError::Io(_) => EXIT_DATA,
        };
        Failure {
            code,
            error: e.into(),
        }
    })?;
    for f in &outcome.failures {
        eprintln!("synth: sample {} failed: {}", f.sample_index, f.error);
    }
    for f in &outcome.malformed {
        eprintln!("synth: sample {} kept empty: {}", f.sample_index, f.error);
    }
    eprintln!(
        "synth: requested {}, written {}, failed {}, malformed {}",
        outcome.requested,
        outcome.written,
        outcome.failures.len(),
        outcome.malformed.len()
    );
    Ok(())
}

fn cmd_curate(args: CurateArgs) -> CmdResult {
    let labels = load_labels(&args.labels)?;
    let raws: Vec<RawSample> = match (&args.raw, &args.markup) {
        (Some(raw), _) => lib(read_raw_samples(raw))?,
        (None, Some(markup)) => {
            let text = std::fs::read_to_string(markup)
                .with_context(|| format!("cannot read {}", markup.display()))
                .code(EXIT_DATA)?;
            vec![RawSample::from_markup(text, "markup")]
        }
        (None, None) => unreachable!("clap requires --raw or --markup"),
    };
    let order = match args.stage_order {
        StageOrderChoice::Table => StageOrder::Table,
        StageOrderChoice::Prose => StageOrder::Prose,
    };
    let (corpus, report) = curation::apply_filters(&raws, &labels, order);

    ensure_dir(&args.out_dir)?;
    lib(corpus.write_jsonl_file(&args.out_dir.join("corpus.jsonl")))?;
    write_json(&args.out_dir.join("report.json"), &report)?;
    let table = report.to_tsv();
    write_text(&args.out_dir.join("report.tsv"), &table)?;
    eprintln!(
        "curate: label stage removed {} with unknown labels, {} without annotations",
        report.label_removals.unknown_label, report.label_removals.no_annotation
    );
    stdout(table)
}

fn cmd_split(args: SplitArgs) -> CmdResult {
    let corpus = load_corpus(&args.corpus, &args.labels)?;
    let spec = lib(SplitSpec::new(args.ratios[0], args.ratios[1], args.ratios[2], args.seed))?;
    let parts = lib(curation::split(&corpus, &spec))?;
    ensure_dir(&args.out_dir)?;
    let mut summary = String::new();
    for (name, part) in [("train", &parts.train), ("validation", &parts.validation), ("test", &parts.test)] {
        lib(part.write_jsonl_file(&args.out_dir.join(format!("{name}.jsonl"))))?;
        summary.push_str(&format!("{name}\t{}\n", part.len()));
    }
    stdout(summary)
}

fn cmd_stats(args: StatsArgs) -> CmdResult {
    let corpus = load_corpus(&args.corpus, &args.labels)?;
    let stats = curation::corpus_stats(&corpus);
    if let Some(path) = &args.json {
        write_json(path, &stats)?;
    }
    stdout(stats.to_tsv())
}

fn cmd_export(args: ExportArgs) -> CmdResult {
    let corpus = load_corpus(&args.corpus, &args.labels)?;
    let format = match args.format {
        FormatChoice::Jsonl => ExportFormat::Jsonl,
        FormatChoice::Bio => ExportFormat::Bio,
    };
    ensure_parent(&args.out)?;
    lib(curation::export(&corpus, format, &args.out))
}

/// Corpus whose label set is `base` extended by every label the file uses,
/// so gold or predictions in a foreign scheme can be loaded before aliasing.
fn load_open_corpus(path: &Path, base: &LabelSet) -> CmdResult<Corpus> {
    let reader = lib(io::open_buffered(path))?;
    let sentences: Vec<AnnotatedSentence> = lib(io::read_jsonl(reader, &path.display().to_string()))?;
    let mut labels: Vec<Label> = base.iter().cloned().collect();
    for span in sentences.iter().flat_map(|s| &s.spans) {
        if !labels.contains(&span.label) {
            labels.push(span.label.clone());
        }
    }
    let labelset = lib(LabelSet::new(labels))?;
    lib(Corpus::new(sentences, labelset))
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let base = load_labels(&args.labels)?;
    let gold = load_open_corpus(&args.gold, &base)?;
    let pred = load_open_corpus(&args.pred, &base)?;
    let alias = match &args.alias {
        Some(path) => {
            let map = lib(LabelAliasMap::read_json(path))?;
            map.validate(&base).code(EXIT_DATA)?;
            Some(map)
        }
        None => None,
    };
    let options = ScoreOptions {
        alias,
        weighting: match args.weighting {
            WeightingChoice::Characters => Weighting::Characters,
            WeightingChoice::Entities => Weighting::Entities,
        },
        mode: if args.entity_level {
            EvalMode::Entity
        } else {
            EvalMode::Character
        },
    };
    let report = eval::score(&gold, &pred, &options).code(EXIT_DATA)?;
    if let Some(path) = &args.json {
        write_json(path, &report)?;
    }
    if report.dropped_gold_spans + report.dropped_pred_spans > 0 {
        eprintln!(
            "eval: dropped {} gold and {} predicted span(s) with unscored labels",
            report.dropped_gold_spans, report.dropped_pred_spans
        );
    }
    for l in report.labels.iter().filter(|l| l.metrics.zero_division) {
        eprintln!("eval: {} has a zero denominator; affected values reported as 0", l.label);
    }
    stdout(report.to_table())
}
