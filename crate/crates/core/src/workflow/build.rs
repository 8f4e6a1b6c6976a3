use std::sync::{Condvar, Mutex, RwLock};
use std::time::Instant;

use super::{
    deredundancy, elapsed_ms, run_stage, ConcurrencyProbe, Job, JobKind, QuarantineRecord, SchedulerConfig, Stats,
};
use crate::ais::{Dataset, MinimalSegment};
use crate::encoder::vocab::VocabKind;
use crate::encoder::{abstract_behavior, encode_static, ContextSource};
use crate::error::{Error, Result};
use crate::method::{describe, known_description, propose, retrieve, validate_and_refine, FitReport};
use crate::oracle::{Oracle, TemplateId};
use crate::sdkg::{KnowledgeUnit, SdKg, UnitFunction};

/// A validated knowledge unit before commit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedUnit {
    pub unit: KnowledgeUnit,
    /// `(kind, token, explanation)` from the behavior abstraction.
    pub descriptions: Vec<(VocabKind, String, String)>,
    /// The function came from the graph rather than the oracle.
    pub reused: bool,
    pub fit: FitReport,
}

fn check_unit(u: &KnowledgeUnit) -> Result<()> {
    if let Some((kind, _)) = u.statics.members().iter().find(|(_, v)| v.trim().is_empty()) {
        return Err(Error::InvalidInput(format!("empty static attribute {}", kind.as_str())));
    }
    if u.behavior.tokens().iter().any(|t| t.trim().is_empty()) {
        return Err(Error::malformed(TemplateId::BehaviorAbstraction, 0, "empty behavior token"));
    }
    if u.function.description.trim().is_empty() {
        return Err(Error::EmptyOracleOutput(TemplateId::Describe));
    }
    Ok(())
}

/// `(v_s, v_b, v_f)` for one complete segment. The graph is only read, and
/// never while waiting on the oracle.
pub fn extract_unit(
    segment: &MinimalSegment,
    kg: &RwLock<SdKg>,
    oracle: &dyn Oracle,
    context: &dyn ContextSource,
    config: &SchedulerConfig,
) -> Result<ExtractedUnit> {
    let fit = config.fit();
    let statics = encode_static(segment, context)?;
    let vocab = kg.read().expect("kg lock").vocab().clone();
    let abstracted = abstract_behavior(segment, &statics.spatial_context, &vocab, oracle)?;
    let behavior = abstracted.behavior.clone();
    let hit = retrieve(segment, &behavior, &kg.read().expect("kg lock"), &fit)?;
    let (spec, description, report, reused) = match hit {
        Some(h) => (h.spec, h.description, h.report, true),
        None => {
            let first = propose(segment, &statics.spatial_context, &behavior, oracle, &fit)?;
            let (spec, report) =
                validate_and_refine(first, segment, &statics.spatial_context, &behavior, oracle, &fit)?;
            let known = known_description(&kg.read().expect("kg lock"), &spec)?;
            let description = match known {
                Some(d) => d,
                None => describe(&spec, &behavior, None, oracle)?,
            };
            (spec, description, report, false)
        }
    };
    let unit = KnowledgeUnit {
        vessel_id: segment.vessel_id.clone(),
        segment_index: segment.index,
        statics,
        behavior,
        function: UnitFunction { spec, description },
    };
    check_unit(&unit)?;
    let descriptions = abstracted.descriptions().map(|(k, t, e)| (k, t.to_string(), e.to_string())).collect();
    Ok(ExtractedUnit { unit, descriptions, reused, fit: report })
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub kg: SdKg,
    /// Committed units in commit order.
    pub units: Vec<KnowledgeUnit>,
    pub quarantine: Vec<QuarantineRecord>,
    pub stats: Stats,
}

/// Batches handed from extraction to commit.
struct Handoff {
    batches: Mutex<(Vec<Vec<ExtractedUnit>>, bool)>,
    ready: Condvar,
}

impl Handoff {
    fn push(&self, batch: Vec<ExtractedUnit>) {
        self.batches.lock().expect("handoff lock").0.push(batch);
        self.ready.notify_one();
    }

    fn close(&self) {
        self.batches.lock().expect("handoff lock").1 = true;
        self.ready.notify_one();
    }

    /// The most recent batch, or `None` once closed and drained.
    fn pop(&self) -> Option<Vec<ExtractedUnit>> {
        let mut g = self.batches.lock().expect("handoff lock");
        loop {
            if let Some(b) = g.0.pop() {
                return Some(b);
            }
            if g.1 {
                return None;
            }
            g = self.ready.wait(g).expect("handoff lock");
        }
    }
}

#[derive(Default)]
struct Committer {
    units: Vec<KnowledgeUnit>,
    quarantine: Vec<QuarantineRecord>,
    dedup_ms: u64,
    commit_ms: u64,
    oracle_merges: usize,
}

fn commit_batches(handoff: &Handoff, kg: &RwLock<SdKg>, oracle: &dyn Oracle, dedup: bool) -> Committer {
    let mut c = Committer::default();
    while let Some(batch) = handoff.pop() {
        // The only writer, so a private copy stays current; extraction keeps
        // reading the old graph until the swap.
        let mut g = kg.read().expect("kg lock").clone();
        let t = Instant::now();
        let mut batch = if dedup {
            let out = deredundancy(batch, &mut g, oracle);
            c.oracle_merges += out.token_merges;
            out.units
        } else {
            batch
        };
        c.dedup_ms += elapsed_ms(t);
        let t = Instant::now();
        batch.sort_by(|a, b| (&a.unit.vessel_id, a.unit.segment_index).cmp(&(&b.unit.vessel_id, b.unit.segment_index)));
        for e in batch {
            match g.upsert_unit(&e.unit) {
                Ok(_) => {
                    for (kind, token, text) in &e.descriptions {
                        let v = g.vocab_mut().get_mut(*kind);
                        let token = v.canonical(token).to_string();
                        v.describe(&token, text);
                    }
                    c.units.push(e.unit);
                }
                Err(err) => c.quarantine.push(QuarantineRecord {
                    job: Job {
                        vessel_id: e.unit.vessel_id.clone(),
                        segment_index: e.unit.segment_index,
                        kind: JobKind::Extract,
                        retry_count: 0,
                        payload: 0,
                    },
                    final_error: err.to_string(),
                    attempt_log: Vec::new(),
                }),
            }
        }
        *kg.write().expect("kg lock") = g;
        c.commit_ms += elapsed_ms(t);
    }
    c
}

/// Distills every complete segment of `dataset` into `kg`. Extraction
/// batches run concurrently; de-redundancy and commits happen on one
/// writer that consumes validated batches as they arrive. A global
/// token and function merge pass closes the build.
pub fn run_build(
    dataset: &Dataset,
    kg: SdKg,
    config: &SchedulerConfig,
    oracle: &dyn Oracle,
    context: &dyn ContextSource,
) -> Result<BuildReport> {
    config.validate()?;
    let started = Instant::now();
    let mut segments: Vec<MinimalSegment> = Vec::new();
    for p in dataset.partition(config.m)? {
        segments.extend(p.segments.into_iter().filter(MinimalSegment::is_complete));
    }
    segments.sort_by(|a, b| {
        (a.first_timestamp(), &a.vessel_id, a.index).cmp(&(b.first_timestamp(), &b.vessel_id, b.index))
    });
    let jobs: Vec<Job> = segments
        .iter()
        .enumerate()
        .map(|(i, s)| Job {
            vessel_id: s.vessel_id.clone(),
            segment_index: s.index,
            kind: JobKind::Extract,
            retry_count: 0,
            payload: i,
        })
        .collect();
    let scheduled = jobs.len();
    let kg = RwLock::new(kg);
    let handoff = Handoff { batches: Mutex::new((Vec::new(), false)), ready: Condvar::new() };
    let probe = ConcurrencyProbe::default();
    let t_extract = Instant::now();
    let (stage, committer, extract_ms) = std::thread::scope(|s| {
        let writer = s.spawn(|| commit_batches(&handoff, &kg, oracle, config.dedup));
        let work = |j: &Job| extract_unit(&segments[j.payload], &kg, oracle, context, config);
        let stage = run_stage(jobs, config.batch_size, config.retry_extract, &probe, &work, &mut |batch| {
            handoff.push(batch.into_iter().map(|(_, u)| u).collect())
        });
        let extract_ms = elapsed_ms(t_extract);
        handoff.close();
        (stage, writer.join().expect("commit thread"), extract_ms)
    });
    let mut kg = kg.into_inner().expect("kg lock");
    let t = Instant::now();
    let mut global_merges = 0;
    if config.dedup {
        global_merges += kg.apply_token_merges()?;
        global_merges += kg.merge_equivalent_functions()?;
    }
    let mut quarantine = stage.quarantine;
    quarantine.extend(committer.quarantine);
    let stats = Stats {
        scheduled,
        committed: committer.units.len(),
        retried: stage.retried,
        quarantined: quarantine.len(),
        wall_ms: elapsed_ms(started),
        kg_nodes: kg.node_count(),
        kg_edges: kg.edge_count(),
        stage_ms: [
            ("extract".to_string(), extract_ms),
            ("dedup".to_string(), committer.dedup_ms),
            ("commit".to_string(), committer.commit_ms),
            ("global_dedup".to_string(), elapsed_ms(t)),
        ]
        .into(),
        high_water: probe.high_water(),
        batch_size: config.batch_size,
        fallbacks: 0,
        oracle_merges: committer.oracle_merges + global_merges,
    };
    Ok(BuildReport { kg, units: committer.units, quarantine, stats })
}
