//! Oracle-driven function construction with fit validation.

use serde::{Deserialize, Serialize};

use super::{builtin, fit_report, FitReport, FunctionSpec, Origin, DEFAULT_FIT_THRESHOLD, DEFAULT_MAX_PROPOSALS};
use crate::ais::MinimalSegment;
use crate::error::{Error, Result};
use crate::oracle::parse::{parse_description, parse_function_proposal};
use crate::oracle::vars::{behavior_text, feedback_text, trajectory_data};
use crate::oracle::{ask, Oracle, OracleRequest, TemplateId};
use crate::sdkg::{function_prior, top_k, BehaviorTuple, NodeId, SdKg};

/// Acceptance threshold and proposal budget of the fit loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub threshold: f64,
    pub max_proposals: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { threshold: DEFAULT_FIT_THRESHOLD, max_proposals: DEFAULT_MAX_PROPOSALS }
    }
}

/// An accepted function for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub spec: FunctionSpec,
    pub report: FitReport,
    pub description: String,
    /// Graph node the function was retrieved from, when reused.
    pub reused: Option<NodeId>,
}

/// Turns oracle text into a spec, naming it after its builtin family when
/// it is one.
pub fn spec_from_source(source: &str) -> Result<FunctionSpec> {
    let spec = FunctionSpec::parse("custom", Origin::OracleGenerated, source)?;
    Ok(match builtin::classify(&spec) {
        Some(family) => FunctionSpec::parse(family, Origin::OracleGenerated, spec.source())?,
        None => spec,
    })
}

fn request(
    segment: &MinimalSegment,
    spatial_context: &str,
    behavior: &BehaviorTuple,
    rejected: &[(usize, f64, f64, f64)],
    threshold: f64,
) -> OracleRequest {
    OracleRequest::new(TemplateId::MethodBuilder)
        .var("trajectory_data", trajectory_data(&segment.records, spatial_context))
        .var("pattern", behavior_text(behavior))
        .var("feedback_text_description", feedback_text(rejected, threshold))
}

fn ask_function(oracle: &dyn Oracle, req: &OracleRequest) -> Result<FunctionSpec> {
    let proposal = ask(oracle, req, parse_function_proposal)?;
    spec_from_source(&proposal.source)
}

/// Failures that consume a proposal instead of aborting the loop.
fn is_bad_proposal(e: &Error) -> bool {
    matches!(
        e,
        Error::MalformedOracleOutput { .. }
            | Error::EmptyOracleOutput(_)
            | Error::Syntax { .. }
            | Error::UnsupportedConstruct(_)
            | Error::Evaluation(_)
    )
}

/// The top-prior function linked to `behavior`, when it fits the segment.
pub fn retrieve(
    segment: &MinimalSegment,
    behavior: &BehaviorTuple,
    kg: &SdKg,
    config: &FitConfig,
) -> Result<Option<BuildOutcome>> {
    let Some(b) = kg.behavior_node(behavior) else { return Ok(None) };
    let cands = kg.candidate_functions(b)?;
    if cands.is_empty() {
        return Ok(None);
    }
    let priors = function_prior(kg, b, &cands)?;
    let Some(best) = top_k(&priors, 1).into_iter().next() else { return Ok(None) };
    let (spec, description) = kg.function(best.node)?;
    match fit_report(spec, segment, config.threshold) {
        Ok(report) if report.accepted => Ok(Some(BuildOutcome {
            spec: spec.clone(),
            report,
            description: description.to_string(),
            reused: Some(best.node),
        })),
        _ => Ok(None),
    }
}

/// First oracle proposal for a segment.
pub fn propose(
    segment: &MinimalSegment,
    spatial_context: &str,
    behavior: &BehaviorTuple,
    oracle: &dyn Oracle,
    config: &FitConfig,
) -> Result<FunctionSpec> {
    ask_function(oracle, &request(segment, spatial_context, behavior, &[], config.threshold))
}

/// Validates `first` and re-prompts with error summaries until a proposal
/// fits, using at most `max_proposals` proposals in total (`first`
/// included). On exhaustion the best attempt travels in the error.
pub fn validate_and_refine(
    first: FunctionSpec,
    segment: &MinimalSegment,
    spatial_context: &str,
    behavior: &BehaviorTuple,
    oracle: &dyn Oracle,
    config: &FitConfig,
) -> Result<(FunctionSpec, FitReport)> {
    if config.max_proposals == 0 {
        return Err(Error::InvalidParameter("max_proposals must be positive".into()));
    }
    let mut rejected: Vec<(usize, f64, f64, f64)> = Vec::new();
    let mut best: Option<(FunctionSpec, f64)> = None;
    let mut current: Result<FunctionSpec> = Ok(first);
    for attempt in 1..=config.max_proposals {
        match current.and_then(|spec| fit_report(&spec, segment, config.threshold).map(|r| (spec, r))) {
            Ok((spec, report)) if report.accepted => return Ok((spec, FitReport { attempts: attempt, ..report })),
            Ok((spec, report)) => {
                rejected.push((attempt, report.e_f, report.mae_lat, report.mae_lon));
                if best.as_ref().is_none_or(|(_, e)| report.e_f < *e) {
                    best = Some((spec, report.e_f));
                }
            }
            Err(e) if is_bad_proposal(&e) => {
                log::debug!("proposal {attempt} for {}/{} failed: {e}", segment.vessel_id, segment.index);
                rejected.push((attempt, f64::INFINITY, f64::INFINITY, f64::INFINITY));
            }
            Err(e) => return Err(e),
        }
        if attempt == config.max_proposals {
            break;
        }
        let req = request(segment, spatial_context, behavior, &rejected, config.threshold);
        current = ask_function(oracle, &req);
    }
    let best_error = best.as_ref().map_or(f64::INFINITY, |(_, e)| *e);
    Err(Error::ValidationExhausted { attempts: config.max_proposals, best_error, best: best.map(|(s, _)| Box::new(s)) })
}

/// `d(f)`: reused from an equivalent node in `kg` when present.
pub fn describe(
    spec: &FunctionSpec,
    behavior: &BehaviorTuple,
    kg: Option<&SdKg>,
    oracle: &dyn Oracle,
) -> Result<String> {
    if let Some(d) = kg.map(|kg| known_description(kg, spec)).transpose()?.flatten() {
        return Ok(d);
    }
    let req = OracleRequest::new(TemplateId::Describe)
        .var("function_name", spec.name())
        .var("function_text", spec.source())
        .var("pattern", behavior_text(behavior));
    ask(oracle, &req, parse_description)
}

/// Description of an equivalent function already in `kg`.
pub fn known_description(kg: &SdKg, spec: &FunctionSpec) -> Result<Option<String>> {
    Ok(match kg.find_function(spec)? {
        Some(id) => Some(kg.function(id)?.1.to_string()),
        None => None,
    })
}

/// Retrieval, then proposal, validation and description for one complete segment.
pub fn build_function(
    segment: &MinimalSegment,
    spatial_context: &str,
    behavior: &BehaviorTuple,
    kg: &SdKg,
    oracle: &dyn Oracle,
    config: &FitConfig,
) -> Result<BuildOutcome> {
    if let Some(hit) = retrieve(segment, behavior, kg, config)? {
        return Ok(hit);
    }
    let first = propose(segment, spatial_context, behavior, oracle, config)?;
    let (spec, report) = validate_and_refine(first, segment, spatial_context, behavior, oracle, config)?;
    let description = describe(&spec, behavior, Some(kg), oracle)?;
    Ok(BuildOutcome { spec, report, description, reused: None })
}
