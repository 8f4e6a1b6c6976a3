//! Knowledge-driven reconstruction of removed segments.

mod select;

use serde::{Deserialize, Serialize};

use crate::ais::{AisRecord, VesselSequence};
use crate::error::{Error, Result};
use crate::method::{builtin, execute, Boundary, FunctionSpec};
use crate::oracle::parse::Explanation;
use crate::oracle::Oracle;
use crate::sdkg::{BehaviorTuple, CommittedUnit, SdKg};

pub use select::{
    compose_explanation, estimate_behavior, mentions_node_id, select_method, BehaviorChoice, MethodChoice,
    ShortlistEntry, SupportEdge,
};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputeConfig {
    /// Shortlist size for both behaviors and functions.
    pub top_k: usize,
    pub seed: u64,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig { top_k: DEFAULT_TOP_K, seed: 0 }
    }
}

/// Nearest present entries strictly before and after index `k`.
pub fn extract_context<T>(units: &[Option<T>], k: usize) -> (Option<&T>, Option<&T>) {
    let before = units[..k.min(units.len())].iter().rev().find_map(Option::as_ref);
    let after = units.get(k + 1..).and_then(|rest| rest.iter().find_map(Option::as_ref));
    (before, after)
}

/// A known position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fix {
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

impl Fix {
    fn of(r: &AisRecord) -> Option<Fix> {
        Some(Fix { timestamp: r.timestamp, lat: r.lat?, lon: r.lon? })
    }

    fn pos(&self) -> (f64, f64) {
        (self.lat, self.lon)
    }
}

/// One removed segment with what is known around it.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub vessel_id: String,
    pub segment_index: usize,
    pub segment_count: usize,
    pub timestamps: Vec<i64>,
    /// Up to two known fixes before the gap, nearest last.
    pub before: Vec<Fix>,
    /// Up to two known fixes after the gap, nearest first.
    pub after: Vec<Fix>,
    /// Known records of the adjacent segments.
    pub neighbors: Vec<AisRecord>,
}

impl Gap {
    pub fn from_sequence(sequence: &VesselSequence, m: usize, k: usize) -> Result<Gap> {
        let records = sequence.records();
        let segment_count = records.len() / m.max(1);
        if m < 2 || k >= segment_count {
            return Err(Error::InvalidParameter(format!(
                "segment {k} out of range for vessel {} ({segment_count} segments of {m})",
                sequence.vessel_id()
            )));
        }
        let (lo, hi) = (k * m, (k + 1) * m);
        let mut before: Vec<Fix> = records[..lo].iter().rev().filter_map(Fix::of).take(2).collect();
        before.reverse();
        let after: Vec<Fix> = records[hi..].iter().filter_map(Fix::of).take(2).collect();
        let near = |r: &&AisRecord| r.lat.is_some() && r.lon.is_some();
        let neighbors = records[lo.saturating_sub(m)..lo]
            .iter()
            .chain(&records[hi..(hi + m).min(segment_count * m)])
            .filter(near)
            .cloned()
            .collect();
        Ok(Gap {
            vessel_id: sequence.vessel_id().to_string(),
            segment_index: k,
            segment_count,
            timestamps: records[lo..hi].iter().map(|r| r.timestamp).collect(),
            before,
            after,
            neighbors,
        })
    }

    /// Committed units of this vessel by segment index.
    pub fn units<'a>(&self, kg: &'a SdKg) -> Vec<Option<&'a CommittedUnit>> {
        (0..self.segment_count).map(|i| kg.unit(&self.vessel_id, i)).collect()
    }
}

/// How a gap was anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchoring {
    Between,
    ExtrapolatedForward,
    ExtrapolatedBackward,
    Held,
}

/// Runs `func` over the gap's time grid. Two-sided gaps interpolate
/// between the nearest fixes with velocities from the next ones out;
/// one-sided gaps extend the function beyond the two nearest fixes of the
/// known side.
pub fn execute_gap(func: &FunctionSpec, gap: &Gap) -> Result<(Vec<(f64, f64)>, Anchoring)> {
    let velocity = |a: &Fix, b: &Fix| {
        let dt = (b.timestamp - a.timestamp) as f64;
        ((b.lat - a.lat) / dt, (b.lon - a.lon) / dt)
    };
    let (points, how) = match (gap.before.last(), gap.after.first()) {
        (Some(s), Some(e)) => {
            let boundary = Boundary {
                start: s.pos(),
                end: e.pos(),
                v_start: (gap.before.len() == 2).then(|| velocity(&gap.before[0], s)),
                v_end: (gap.after.len() == 2).then(|| velocity(e, &gap.after[1])),
            };
            let mut offsets = vec![0.0];
            offsets.extend(gap.timestamps.iter().map(|t| (t - s.timestamp) as f64));
            offsets.push((e.timestamp - s.timestamp) as f64);
            (execute(func, &boundary, &offsets)?, Anchoring::Between)
        }
        _ => {
            let (pair, how) = match (gap.before.as_slice(), gap.after.as_slice()) {
                ([a, b], _) => ((a, b), Anchoring::ExtrapolatedForward),
                (_, [a, b]) => ((a, b), Anchoring::ExtrapolatedBackward),
                ([p], _) | (_, [p]) => {
                    return Ok((vec![p.pos(); gap.timestamps.len()], Anchoring::Held));
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "vessel {} has no known position to anchor segment {}",
                        gap.vessel_id, gap.segment_index
                    )))
                }
            };
            let (a, b) = pair;
            let span = (b.timestamp - a.timestamp) as f64;
            let us: Vec<f64> = gap.timestamps.iter().map(|t| (t - a.timestamp) as f64 / span).collect();
            (func.evaluate(&Boundary::new(a.pos(), b.pos()), span, &us)?, how)
        }
    };
    if points.len() != gap.timestamps.len() {
        return Err(Error::Evaluation(format!("{} points for {} slots", points.len(), gap.timestamps.len())));
    }
    if let Some(p) = points.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite imputed point {p:?}")));
    }
    Ok((points, how))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRationale {
    pub id: Option<String>,
    pub tokens: Option<BehaviorTuple>,
    pub graph_support: Vec<SupportEdge>,
    pub graph_support_text: String,
    pub contextual_justification: String,
    pub shortlist: Vec<ShortlistEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRationale {
    pub id: Option<String>,
    pub iel: String,
    pub statistical_support: String,
    pub reasoning: String,
    pub shortlist: Vec<ShortlistEntry>,
}

/// `(Ŝ, Ĵ)` for one gap; one JSON line in the outcome stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationOutcome {
    pub vessel_id: String,
    pub segment_index: usize,
    /// `[lat, lon, timestamp]`.
    pub points: Vec<(f64, f64, i64)>,
    pub behavior: BehaviorRationale,
    pub function: FunctionRationale,
    pub explanation: Explanation,
    pub fallback_used: bool,
    pub anchoring: Anchoring,
    pub kg_revision: u64,
}

fn points_of(gap: &Gap, pts: Vec<(f64, f64)>) -> Vec<(f64, f64, i64)> {
    pts.into_iter().zip(&gap.timestamps).map(|((lat, lon), t)| (lat, lon, *t)).collect()
}

/// Linear interpolation between the nearest known fixes, flagged.
pub fn fallback_outcome(kg: &SdKg, gap: &Gap, reason: &str) -> Result<ImputationOutcome> {
    let linear = builtin::linear();
    let (pts, anchoring) = execute_gap(&linear, gap)?;
    let note = format!("fallback: {reason}");
    Ok(ImputationOutcome {
        vessel_id: gap.vessel_id.clone(),
        segment_index: gap.segment_index,
        points: points_of(gap, pts),
        behavior: BehaviorRationale {
            id: None,
            tokens: None,
            graph_support: Vec::new(),
            graph_support_text: note.clone(),
            contextual_justification: note.clone(),
            shortlist: Vec::new(),
        },
        function: FunctionRationale {
            id: None,
            iel: linear.source().to_string(),
            statistical_support: note.clone(),
            reasoning: "linear interpolation between the nearest known positions".into(),
            shortlist: Vec::new(),
        },
        explanation: Explanation {
            regulatory_rule_cue: "Undetermined".into(),
            operational_protocol_rationale: format!(
                "The knowledge graph could not serve this gap ({reason}); positions were linearly interpolated between the nearest known reports."
            ),
        },
        fallback_used: true,
        anchoring,
        kg_revision: kg.revision(),
    })
}

fn is_cold(e: &Error) -> bool {
    matches!(e, Error::NoCandidates | Error::EmptyCandidates)
}

/// Context, behavior, method, execution and explanation for one gap,
/// falling back to linear interpolation when the graph has nothing to
/// offer.
pub fn impute_gap(kg: &SdKg, gap: &Gap, oracle: &dyn Oracle, config: &ImputeConfig) -> Result<ImputationOutcome> {
    let units = gap.units(kg);
    let (before, after) = extract_context(&units, gap.segment_index);
    let (before, after) = (before.copied(), after.copied());
    if before.is_none() && after.is_none() {
        return fallback_outcome(kg, gap, "no complete neighboring segment");
    }
    let b = match estimate_behavior(kg, before, after, oracle, config) {
        Err(e) if is_cold(&e) => return fallback_outcome(kg, gap, "no candidate behavior"),
        r => r?,
    };
    let f = match select_method(kg, &b, &gap.neighbors, oracle, config) {
        Err(e) if is_cold(&e) => return fallback_outcome(kg, gap, "no function linked to the behavior"),
        r => r?,
    };
    let (pts, anchoring) = execute_gap(&f.spec, gap)?;
    let explanation = compose_explanation(kg, &b, &f, before, after, oracle, config)?;
    Ok(ImputationOutcome {
        vessel_id: gap.vessel_id.clone(),
        segment_index: gap.segment_index,
        points: points_of(gap, pts),
        behavior: BehaviorRationale {
            id: Some(b.name.clone()),
            tokens: Some(b.behavior.clone()),
            graph_support: b.graph_support.clone(),
            graph_support_text: b.graph_support_text.clone(),
            contextual_justification: b.contextual_justification.clone(),
            shortlist: b.shortlist.clone(),
        },
        function: FunctionRationale {
            id: Some(f.name.clone()),
            iel: f.spec.source().to_string(),
            statistical_support: f.statistical_support,
            reasoning: f.reasoning,
            shortlist: f.shortlist,
        },
        explanation,
        fallback_used: false,
        anchoring,
        kg_revision: kg.revision(),
    })
}
