//! Micro-batch scheduling with anomaly guards, retries and quarantine,
//! plus the build and impute drivers.

mod build;
mod dedup;
mod impute;

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputation::ImputeConfig;
use crate::method::{FitConfig, DEFAULT_FIT_THRESHOLD, DEFAULT_MAX_PROPOSALS};

pub use build::{extract_unit, run_build, BuildReport, ExtractedUnit};
pub use dedup::{deredundancy, DedupOutcome};
pub use impute::{collect_gaps, run_impute, ImputeReport};

/// Batch size, retry budgets, proposal budget, fit threshold, segment
/// length and shortlist size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerConfig {
    pub batch_size: usize,
    pub retry_extract: u32,
    pub retry_impute: u32,
    pub max_proposals: usize,
    pub fit_threshold: f64,
    pub m: usize,
    pub top_k: usize,
    pub seed: u64,
    pub dedup: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            batch_size: 16,
            retry_extract: 3,
            retry_impute: 3,
            max_proposals: DEFAULT_MAX_PROPOSALS,
            fit_threshold: DEFAULT_FIT_THRESHOLD,
            m: crate::ais::DEFAULT_SEGMENT_LEN,
            top_k: crate::imputation::DEFAULT_TOP_K,
            seed: 0,
            dedup: true,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if self.max_proposals == 0 {
            return bad("max_proposals");
        }
        if !(self.fit_threshold > 0.0) {
            return bad("fit_threshold");
        }
        if self.m < 2 {
            return Err(Error::Config("m must be at least 2".into()));
        }
        if self.top_k == 0 {
            return bad("top_k");
        }
        Ok(())
    }

    pub fn fit(&self) -> FitConfig {
        FitConfig { threshold: self.fit_threshold, max_proposals: self.max_proposals }
    }

    pub fn impute(&self) -> ImputeConfig {
        ImputeConfig { top_k: self.top_k, seed: self.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Extract,
    Impute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub at: String,
    pub error: String,
}

/// A schedulable unit of work; `payload` indexes the stage's inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub vessel_id: String,
    pub segment_index: usize,
    pub kind: JobKind,
    pub retry_count: u32,
    #[serde(skip)]
    pub payload: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub job: Job,
    pub final_error: String,
    pub attempt_log: Vec<Attempt>,
}

pub fn write_quarantine(path: &Path, records: &[QuarantineRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub scheduled: usize,
    pub committed: usize,
    pub retried: usize,
    pub quarantined: usize,
    pub wall_ms: u64,
    pub kg_nodes: usize,
    pub kg_edges: usize,
    /// Milliseconds per stage.
    pub stage_ms: std::collections::BTreeMap<String, u64>,
    /// Most jobs of one stage seen running at once.
    pub high_water: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub fallbacks: usize,
    #[serde(default)]
    pub oracle_merges: usize,
}

/// Tracks how many jobs run at once.
#[derive(Debug, Default)]
pub struct ConcurrencyProbe {
    current: AtomicUsize,
    max: AtomicUsize,
}

impl ConcurrencyProbe {
    fn enter(&self) {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.max.fetch_max(now, Ordering::SeqCst);
    }

    fn exit(&self) {
        self.current.fetch_sub(1, Ordering::SeqCst);
    }

    pub fn high_water(&self) -> usize {
        self.max.load(Ordering::SeqCst)
    }
}

/// A LIFO stack with batch pops.
#[derive(Debug, Default)]
pub struct Stack<T> {
    items: Mutex<Vec<T>>,
}

impl<T> Stack<T> {
    pub fn new() -> Self {
        Stack { items: Mutex::new(Vec::new()) }
    }

    pub fn push(&self, item: T) {
        self.items.lock().expect("stack lock").push(item);
    }

    /// Up to `n` items from the top, topmost first.
    pub fn pop_batch(&self, n: usize) -> Vec<T> {
        let mut items = self.items.lock().expect("stack lock");
        let keep = items.len().saturating_sub(n);
        let mut out = items.split_off(keep);
        out.reverse();
        out
    }

    pub fn len(&self) -> usize {
        self.items.lock().expect("stack lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) struct StageResult {
    pub quarantine: Vec<QuarantineRecord>,
    pub retried: usize,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Pops batches of at most `batch` jobs, runs each batch concurrently and
/// hands validated results (in completion order) to `on_batch`. Jobs
/// failing with a retryable error are pushed back while their retry count
/// is below `retries`; everything else is quarantined.
pub(crate) fn run_stage<T: Send>(
    jobs: Vec<Job>,
    batch: usize,
    retries: u32,
    probe: &ConcurrencyProbe,
    work: &(dyn Fn(&Job) -> Result<T> + Sync),
    on_batch: &mut dyn FnMut(Vec<(Job, T)>),
) -> StageResult {
    let stack = Stack::new();
    for j in jobs {
        stack.push((j, Vec::<Attempt>::new()));
    }
    let mut out = StageResult { quarantine: Vec::new(), retried: 0 };
    loop {
        let popped = stack.pop_batch(batch);
        if popped.is_empty() {
            break;
        }
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|s| {
            for (job, log) in popped {
                let tx = tx.clone();
                s.spawn(move || {
                    probe.enter();
                    let r = work(&job);
                    probe.exit();
                    let _ = tx.send((job, log, r));
                });
            }
        });
        drop(tx);
        let mut ok = Vec::new();
        for (mut job, mut log, r) in rx {
            match r {
                Ok(v) => ok.push((job, v)),
                Err(e) => {
                    log.push(Attempt { at: now(), error: e.to_string() });
                    if e.is_retryable() && job.retry_count < retries {
                        log::debug!("retrying {}/{}: {e}", job.vessel_id, job.segment_index);
                        job.retry_count += 1;
                        out.retried += 1;
                        stack.push((job, log));
                    } else {
                        log::warn!("quarantined {}/{}: {e}", job.vessel_id, job.segment_index);
                        out.quarantine.push(QuarantineRecord { job, final_error: e.to_string(), attempt_log: log });
                    }
                }
            }
        }
        if !ok.is_empty() {
            on_batch(ok);
        }
    }
    out
}

pub(crate) fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}
