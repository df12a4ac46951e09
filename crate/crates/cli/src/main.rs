use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Synthesize, curate, split, export and score silver-standard NER corpora.
#[derive(Parser)]
#[command(name = "synthner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the few-shot prompt built from an examples file.
    Prompt {
        /// Corpus JSONL (`.jsonl`) or one encoded `<s>…</s>` sentence per line.
        examples: PathBuf,
    },
    /// Run a sampling campaign and write raw samples as JSONL.
    Synth(SynthArgs),
    /// Parse raw samples, apply the cleansing filters and report per stage.
    Curate(CurateArgs),
    /// Shuffle a corpus and cut train/validation/test files.
    Split(SplitArgs),
    /// Print sentence, token and entity counts.
    Stats(StatsArgs),
    /// Write a corpus as JSONL or BIO.
    Export(ExportArgs),
    /// Score predictions against gold character-wise.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Campaign TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to `output` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep samples already written by an interrupted run.
    #[arg(long)]
    resume: bool,
    /// Seed for stages that do not set one.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the backend named in the config.
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Maximum concurrent requests; defaults to `concurrency` from the config.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Mock,
    Remote,
}

#[derive(Args)]
struct LabelsArg {
    /// Label set JSON `{"labels": [...]}`; defaults to Medikation, Dosis, Diagnose.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct CurateArgs {
    /// Raw-sample JSONL from `synth`.
    #[arg(long, required_unless_present = "markup", conflicts_with = "markup")]
    raw: Option<PathBuf>,
    /// Plain markup text (for example a prompt), treated as one raw sample.
    #[arg(long)]
    markup: Option<PathBuf>,
    #[command(flatten)]
    labels: LabelsArg,
    /// Receives corpus.jsonl, report.json and report.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = StageOrderChoice::Table)]
    stage_order: StageOrderChoice,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageOrderChoice {
    /// Close tag, dedup, syntax, labels.
    Table,
    /// Close tag, syntax, labels, dedup.
    Prose,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    labels: LabelsArg,
    /// Receives train.jsonl, validation.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
    /// Train, validation and test ratios.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    labels: LabelsArg,
    /// Also write the statistics as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    labels: LabelsArg,
    #[arg(long, value_enum)]
    format: FormatChoice,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatChoice {
    Jsonl,
    Bio,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    labels: LabelsArg,
    /// Alias map JSON such as `{"Drug": "Medikation"}`.
    #[arg(long)]
    alias: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightingChoice::Characters)]
    weighting: WeightingChoice,
    /// Count exact span matches instead of characters.
    #[arg(long)]
    entity_level: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingChoice {
    Characters,
    Entities,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(commands::EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
