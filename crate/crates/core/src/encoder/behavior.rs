use super::duration_token;
use super::vocab::{canonicalize_token, VocabKind, Vocabularies};
use crate::ais::MinimalSegment;
use crate::error::{Error, Result};
use crate::oracle::parse::{parse_behavior_pattern, BehaviorPattern};
use crate::oracle::vars::trajectory_data;
use crate::oracle::{ask, Oracle, OracleRequest, TemplateId};
use crate::sdkg::BehaviorTuple;

/// `v_b` plus the pattern the oracle returned, explanations included.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractedBehavior {
    pub behavior: BehaviorTuple,
    pub pattern: BehaviorPattern,
}

impl AbstractedBehavior {
    /// `(kind, token, explanation)` for recording into the vocabularies.
    pub fn descriptions(&self) -> impl Iterator<Item = (VocabKind, &str, &str)> {
        VocabKind::ALL.into_iter().map(|k| {
            let l = self.pattern.get(k);
            (k, l.token.as_str(), l.explanation.as_str())
        })
    }
}

/// Asks the oracle for the segment's pattern tokens, normalizes them and
/// resolves them through the merge maps. New tokens are not added here; they enter the
/// vocabularies when the unit is committed.
pub fn abstract_behavior(
    segment: &MinimalSegment,
    spatial_context: &str,
    vocabs: &Vocabularies,
    oracle: &dyn Oracle,
) -> Result<AbstractedBehavior> {
    if !segment.is_complete() {
        return Err(Error::IncompleteSegment { vessel_id: segment.vessel_id.clone(), segment_index: segment.index });
    }
    let duration_bin = duration_token(segment)?;
    let request = OracleRequest::new(TemplateId::BehaviorAbstraction)
        .var("trajectory_data", trajectory_data(&segment.records, spatial_context))
        .var("speed_dict", vocabs.speed.render())
        .var("course_dict", vocabs.course.render())
        .var("heading_dict", vocabs.heading.render())
        .var("intent_dict", vocabs.intent.render());
    let pattern = ask(oracle, &request, parse_behavior_pattern)?;
    let tok = |k: VocabKind| vocabs.get(k).canonical(&canonicalize_token(&pattern.get(k).token)).to_string();
    let behavior = BehaviorTuple {
        speed: tok(VocabKind::Speed),
        course: tok(VocabKind::Course),
        heading: tok(VocabKind::Heading),
        intent: tok(VocabKind::Intent),
        duration_bin,
    };
    Ok(AbstractedBehavior { behavior, pattern })
}
