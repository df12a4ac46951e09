use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use super::{BackendError, CompletionBackend, CompletionRequest};
use crate::corpus::SampleProvenance;
use crate::error::Error;
use crate::io;
use crate::markup::{RawSample, SENTENCE_OPEN};
use crate::prompt::Prompt;
use crate::sampling::SamplingParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignStage {
    pub n_samples: u64,
    pub params: SamplingParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub stages: Vec<CampaignStage>,
    pub prompt: Prompt,
    pub backend_id: String,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.stages.is_empty() {
            return Err(CampaignError::InvalidSpec("campaign has no stages".into()));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.n_samples == 0 {
                return Err(CampaignError::InvalidSpec(format!("stage {i} has n_samples = 0")));
            }
            stage
                .params
                .validate()
                .map_err(|e| CampaignError::InvalidSpec(format!("stage {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn total_samples(&self) -> u64 {
        self.stages.iter().map(|s| s.n_samples).sum()
    }

    /// `(sample_index, params)` for every sample; indices run on across stages.
    pub fn jobs(&self) -> impl Iterator<Item = (u64, SamplingParams)> + '_ {
        let mut next = 0u64;
        self.stages.iter().flat_map(move |stage| {
            let start = next;
            next += stage.n_samples;
            (start..start + stage.n_samples).map(move |i| (i, stage.params))
        })
    }

    fn provenance(&self, sample_index: u64, params: &SamplingParams) -> SampleProvenance {
        SampleProvenance {
            sample_index,
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: Some(params.max_tokens),
            seed: params.seed,
            backend_id: self.backend_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    /// Maximum completions in flight.
    pub concurrency: usize,
    /// Sample indices already persisted; they are not requested again.
    pub skip: BTreeSet<u64>,
}

impl CampaignOptions {
    pub fn with_concurrency(concurrency: usize) -> Self {
        CampaignOptions {
            concurrency,
            skip: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub sample_index: u64,
    pub error: BackendError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignOutcome {
    pub requested: u64,
    pub written: u64,
    /// Samples lost to transport or rejection errors; left as gaps.
    pub failures: Vec<SampleFailure>,
    /// Samples whose response was malformed; persisted with empty text.
    pub malformed: Vec<SampleFailure>,
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("invalid campaign: {0}")]
    InvalidSpec(String),
    #[error("campaign aborted at sample {sample_index}: {error}")]
    Fatal {
        sample_index: u64,
        error: BackendError,
    },
    #[error(transparent)]
    Io(#[from] Error),
}

/// Issue every completion of `spec` and hand the samples to `sink` in
/// `sample_index` order, whatever order the workers finish in.
///
/// Up to `options.concurrency` requests run at once. Transport failures leave
/// gaps; malformed responses become empty samples; a fatal backend error stops
/// the campaign after the samples committed so far.
pub fn run_campaign<B, F>(
    spec: &CampaignSpec,
    backend: &B,
    options: &CampaignOptions,
    mut sink: F,
) -> Result<CampaignOutcome, CampaignError>
where
    B: CompletionBackend + ?Sized,
    F: FnMut(&RawSample) -> Result<(), Error>,
{
    spec.validate()?;
    let jobs: Vec<(u64, SamplingParams)> = spec
        .jobs()
        .filter(|(i, _)| !options.skip.contains(i))
        .collect();
    let workers = options.concurrency.max(1).min(jobs.len().max(1));
    let next_job = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let prompt = spec.prompt.text();

    let mut outcome = CampaignOutcome {
        requested: jobs.len() as u64,
        ..CampaignOutcome::default()
    };

    std::thread::scope(|scope| -> Result<(), CampaignError> {
        let (tx, rx) = mpsc::channel::<(usize, Result<String, BackendError>)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next_job, abort) = (&jobs, &next_job, &abort);
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let slot = next_job.fetch_add(1, Ordering::Relaxed);
                let Some(&(sample_index, params)) = jobs.get(slot) else { break };
                let request = CompletionRequest {
                    prompt,
                    params,
                    sample_index,
                };
                if tx.send((slot, backend.complete(&request))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Single owner of the sink: commit strictly in job order.
        let mut pending: BTreeMap<usize, Result<String, BackendError>> = BTreeMap::new();
        let mut commit = 0usize;
        let mut result = Ok(());
        for (slot, completion) in rx {
            pending.insert(slot, completion);
            while let Some(completion) = pending.remove(&commit) {
                let (sample_index, params) = jobs[commit];
                commit += 1;
                let text = match completion {
                    Ok(text) => format!("{SENTENCE_OPEN}{text}"),
                    Err(error) if error.is_fatal() => {
                        abort.store(true, Ordering::Relaxed);
                        result = Err(CampaignError::Fatal {
                            sample_index,
                            error,
                        });
                        break;
                    }
                    Err(error @ BackendError::Malformed(_)) => {
                        outcome.malformed.push(SampleFailure {
                            sample_index,
                            error,
                        });
                        String::new()
                    }
                    Err(error) => {
                        outcome.failures.push(SampleFailure {
                            sample_index,
                            error,
                        });
                        continue;
                    }
                };
                let sample = RawSample {
                    sample_index,
                    text,
                    provenance: spec.provenance(sample_index, &params),
                };
                if let Err(e) = sink(&sample) {
                    abort.store(true, Ordering::Relaxed);
                    result = Err(e.into());
                    break;
                }
                outcome.written += 1;
            }
            if result.is_err() {
                break;
            }
        }
        result
    })?;

    Ok(outcome)
}

/// Run a campaign and collect the committed samples in memory.
pub fn run_campaign_to_vec<B: CompletionBackend + ?Sized>(
    spec: &CampaignSpec,
    backend: &B,
    options: &CampaignOptions,
) -> Result<(Vec<RawSample>, CampaignOutcome), CampaignError> {
    let mut samples = Vec::new();
    let outcome = run_campaign(spec, backend, options, |s| {
        samples.push(s.clone());
        Ok(())
    })?;
    Ok((samples, outcome))
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".partial");
    PathBuf::from(name)
}

/// Run a campaign into raw-sample JSONL at `out`.
///
/// Samples are appended to `<out>.partial` as they commit. On success the
/// partial file is sorted by `sample_index` and atomically renamed to `out`.
/// With `resume`, samples already present in the partial file (or in `out`)
/// are kept and not requested again; a torn final line is discarded.
pub fn run_campaign_to_file<B: CompletionBackend + ?Sized>(
    spec: &CampaignSpec,
    backend: &B,
    options: &CampaignOptions,
    out: &Path,
    resume: bool,
) -> Result<CampaignOutcome, CampaignError> {
    let partial = partial_path(out);
    let mut existing = Vec::new();
    if resume {
        let source = if partial.exists() {
            Some(partial.as_path())
        } else if out.exists() {
            Some(out)
        } else {
            None
        };
        if let Some(source) = source {
            existing = read_samples_lenient(source)?;
        }
    }
    let mut seen = BTreeSet::new();
    existing.retain(|s: &RawSample| seen.insert(s.sample_index));

    let file = File::create(&partial).map_err(|e| Error::io(&partial, e))?;
    let mut writer = BufWriter::new(file);
    let write_line = |w: &mut BufWriter<File>, s: &RawSample| -> Result<(), Error> {
        serde_json::to_writer(&mut *w, s)
            .map_err(std::io::Error::from)
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&partial, e))
    };
    for sample in &existing {
        write_line(&mut writer, sample)?;
    }

    let mut options = options.clone();
    options.skip.extend(seen.iter().copied());
    let outcome = run_campaign(spec, backend, &options, |s| write_line(&mut writer, s))?;
    drop(writer);

    let mut all = read_raw_samples(&partial)?;
    all.sort_by_key(|s| s.sample_index);
    io::write_atomic(out, |w| {
        for s in &all {
            serde_json::to_writer(&mut *w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    std::fs::remove_file(&partial).map_err(|e| Error::io(&partial, e))?;
    Ok(outcome)
}

pub fn read_raw_samples(path: &Path) -> Result<Vec<RawSample>, Error> {
    io::read_jsonl(io::open_buffered(path)?, &path.display().to_string())
}

// Like read_raw_samples, but tolerates one unparsable trailing line left by
// an interrupted write.
fn read_samples_lenient(path: &Path) -> Result<Vec<RawSample>, Error> {
    let source = path.display().to_string();
    let lines: Vec<String> = io::open_buffered(path)?
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(sample) => out.push(sample),
            Err(_) if n + 1 == lines.len() => break,
            Err(e) => {
                return Err(Error::Schema {
                    path: source,
                    line: n + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}
