use std::time::Instant;

use super::{elapsed_ms, run_stage, ConcurrencyProbe, Job, JobKind, QuarantineRecord, SchedulerConfig, Stats};
use crate::ais::{Dataset, ObservationMask};
use crate::error::{Error, Result};
use crate::imputation::{impute_gap, Gap, ImputationOutcome};
use crate::oracle::Oracle;
use crate::sdkg::SdKg;

#[derive(Debug, Clone)]
pub struct ImputeReport {
    /// In completion order.
    pub outcomes: Vec<ImputationOutcome>,
    pub quarantine: Vec<QuarantineRecord>,
    pub stats: Stats,
}

/// One gap per masking target, ordered by time.
pub fn collect_gaps(dataset: &Dataset, masks: &[ObservationMask], m: usize) -> Result<Vec<Gap>> {
    let mut gaps = Vec::new();
    for mask in masks {
        if mask.m != m {
            return Err(Error::Config(format!("mask for {} uses m={}, run uses m={m}", mask.vessel_id, mask.m)));
        }
        let seq = dataset
            .vessel(&mask.vessel_id)
            .ok_or_else(|| Error::InvalidInput(format!("mask names unknown vessel {}", mask.vessel_id)))?;
        for k in &mask.targets {
            gaps.push(Gap::from_sequence(seq, m, *k)?);
        }
    }
    gaps.sort_by(|a, b| {
        (a.timestamps.first(), &a.vessel_id, a.segment_index).cmp(&(
            b.timestamps.first(),
            &b.vessel_id,
            b.segment_index,
        ))
    });
    Ok(gaps)
}

fn guarded(kg: &SdKg, gap: &Gap, oracle: &dyn Oracle, config: &SchedulerConfig) -> Result<ImputationOutcome> {
    let out = impute_gap(kg, gap, oracle, &config.impute())?;
    if out.points.len() != gap.timestamps.len() {
        return Err(Error::Evaluation(format!("{} points for a gap of {}", out.points.len(), gap.timestamps.len())));
    }
    Ok(out)
}

/// Imputes every masking target against a fixed graph. `sink` sees each
/// outcome as its batch completes.
pub fn run_impute(
    dataset: &Dataset,
    masks: &[ObservationMask],
    kg: &SdKg,
    config: &SchedulerConfig,
    oracle: &dyn Oracle,
    sink: &mut dyn FnMut(&ImputationOutcome) -> Result<()>,
) -> Result<ImputeReport> {
    config.validate()?;
    let started = Instant::now();
    let gaps = collect_gaps(dataset, masks, config.m)?;
    let jobs: Vec<Job> = gaps
        .iter()
        .enumerate()
        .map(|(i, g)| Job {
            vessel_id: g.vessel_id.clone(),
            segment_index: g.segment_index,
            kind: JobKind::Impute,
            retry_count: 0,
            payload: i,
        })
        .collect();
    let scheduled = jobs.len();
    let probe = ConcurrencyProbe::default();
    let mut outcomes = Vec::new();
    let mut sink_error = None;
    let work = |j: &Job| guarded(kg, &gaps[j.payload], oracle, config);
    let stage = run_stage(jobs, config.batch_size, config.retry_impute, &probe, &work, &mut |batch| {
        for (_, o) in batch {
            if sink_error.is_none() {
                sink_error = sink(&o).err();
            }
            outcomes.push(o);
        }
    });
    if let Some(e) = sink_error {
        return Err(e);
    }
    let wall_ms = elapsed_ms(started);
    let stats = Stats {
        scheduled,
        committed: outcomes.len(),
        retried: stage.retried,
        quarantined: stage.quarantine.len(),
        wall_ms,
        kg_nodes: kg.node_count(),
        kg_edges: kg.edge_count(),
        stage_ms: [("impute".to_string(), wall_ms)].into(),
        high_water: probe.high_water(),
        batch_size: config.batch_size,
        fallbacks: outcomes.iter().filter(|o| o.fallback_used).count(),
        oracle_merges: 0,
    };
    Ok(ImputeReport { outcomes, quarantine: stage.quarantine, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::{generate_synthetic_track, SyntheticParams, TrackKind};
    use crate::encoder::GeofenceIndex;
    use crate::oracle::{ScriptedOracle, StubOracle, TemplateId};
    use crate::workflow::run_build;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn setup() -> (Dataset, Vec<ObservationMask>, SdKg) {
        let truth = Dataset::new((0..4).map(|i| {
            let p = SyntheticParams {
                vessel_id: format!("2190000{i}"),
                start: (55.0, 10.0 + i as f64),
                ..Default::default()
            };
            generate_synthetic_track(TrackKind::ConstantVelocity, 200, &p).unwrap()
        }));
        let (masked, masks) = truth.mask(20, 0.2, 7).unwrap();
        let kg = run_build(&masked, SdKg::new(), &SchedulerConfig::default(), &StubOracle, &GeofenceIndex::empty())
            .unwrap()
            .kg;
        (masked, masks, kg)
    }

    #[test]
    fn one_outcome_per_gap() {
        let (masked, masks, kg) = setup();
        let gaps: usize = masks.iter().map(|m| m.targets.len()).sum();
        assert!(gaps > 0);
        let mut seen = 0;
        let r = run_impute(&masked, &masks, &kg, &SchedulerConfig::default(), &StubOracle, &mut |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(r.outcomes.len(), gaps);
        assert_eq!(seen, gaps);
        assert!(r.quarantine.is_empty());
    }

    #[test]
    fn bad_id_once_then_valid() {
        let (masked, masks, kg) = setup();
        let first = Arc::new(AtomicUsize::new(0));
        let f = first.clone();
        let oracle = ScriptedOracle::new(move |req, _| {
            if req.template == TemplateId::BehaviorSelect && f.fetch_add(1, Ordering::SeqCst) == 0 {
                return Ok("'''\nSelected Movement ID: Movement_Pattern_999\nGraph Support: x\nContextual Justification: x\n'''".into());
            }
            Ok(StubOracle.answer(req))
        });
        let cfg = SchedulerConfig { batch_size: 1, ..Default::default() };
        let r = run_impute(&masked, &masks, &kg, &cfg, &oracle, &mut |_| Ok(())).unwrap();
        assert_eq!(r.stats.retried, 1);
        assert!(r.quarantine.is_empty());
    }

    #[test]
    fn unexecutable_function_quarantined() {
        let (masked, masks, mut kg) = setup();
        let bad = crate::method::FunctionSpec::parse(
            "custom",
            crate::method::Origin::OracleGenerated,
            "lat = lat0 + u * (lat1 - lat0) + 0.001 * u / (dt_total - 1260)\nlon = lon0 + u * (lon1 - lon0)",
        )
        .unwrap();
        let (_, b) = kg.behavior_nodes().next().map(|(id, b)| (id, b.clone())).unwrap();
        let mut st = crate::sdkg::tests::statics("x", "y");
        st.vessel_id = "2190000".into();
        for i in 0..50 {
            kg.upsert_unit(&crate::sdkg::KnowledgeUnit {
                vessel_id: "other".into(),
                segment_index: i,
                statics: st.clone(),
                behavior: b.clone(),
                function: crate::sdkg::UnitFunction { spec: bad.clone(), description: "broken".into() },
            })
            .unwrap();
        }
        let cfg = SchedulerConfig { retry_impute: 2, ..Default::default() };
        let r = run_impute(&masked, &masks, &kg, &cfg, &StubOracle, &mut |_| Ok(())).unwrap();
        assert!(!r.quarantine.is_empty());
        assert!(r.quarantine.iter().all(|q| q.attempt_log.len() == 3));
        assert_eq!(r.outcomes.len() + r.quarantine.len(), r.stats.scheduled);
    }
}
