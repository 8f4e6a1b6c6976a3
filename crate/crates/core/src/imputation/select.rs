use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ImputeConfig;
use crate::ais::AisRecord;
use crate::error::{Error, Result};
use crate::method::{builtin, FunctionSpec};
use crate::oracle::parse::{parse_behavior_selection, parse_explanation, parse_method_selection, Explanation};
use crate::oracle::vars::{boundary_text, node_number, trajectory_data};
use crate::oracle::{ask, Oracle, OracleRequest, TemplateId};
use crate::sdkg::{
    behavior_prior, function_prior, node_name, to_dot, top_k, BehaviorTuple, CommittedUnit, Fragment, NodeData, NodeId,
    PriorMap, SdKg,
};

/// One shortlisted candidate with its exact prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortlistEntry {
    pub id: String,
    /// `Π (w + 1)` in decimal.
    pub support: String,
    /// `support / total` in decimal.
    pub total: String,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportEdge {
    pub src: String,
    pub dst: String,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorChoice {
    pub node: NodeId,
    pub name: String,
    pub behavior: BehaviorTuple,
    pub static_nodes: Vec<NodeId>,
    pub shortlist: Vec<ShortlistEntry>,
    pub graph_support: Vec<SupportEdge>,
    pub graph_support_text: String,
    pub contextual_justification: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodChoice {
    pub node: NodeId,
    pub name: String,
    pub spec: FunctionSpec,
    pub description: String,
    pub shortlist: Vec<ShortlistEntry>,
    pub statistical_support: String,
    pub reasoning: String,
}

fn shortlist(kg: &SdKg, priors: &PriorMap, k: usize) -> Result<Vec<(NodeId, ShortlistEntry)>> {
    top_k(priors, k)
        .into_iter()
        .map(|p| {
            let entry = ShortlistEntry {
                id: node_name(p.node, kg.node(p.node)?),
                support: p.support.to_string(),
                total: priors.total.to_string(),
                prior: priors.probability(p.node).unwrap_or(0.0),
            };
            Ok((p.node, entry))
        })
        .collect()
}

/// Resolves an oracle-chosen reference against the shortlist.
fn pick(template: TemplateId, reference: &str, names: &[(NodeId, ShortlistEntry)]) -> Result<NodeId> {
    let n = node_number(reference)
        .ok_or_else(|| Error::malformed(template, 0, format!("unrecognized node reference {reference:?}")))?;
    names
        .iter()
        .find(|(id, _)| id.0 == n)
        .map(|(id, _)| *id)
        .ok_or_else(|| Error::malformed(template, 0, format!("{reference} is not in the shortlist")))
}

fn ident_end(s: &str) -> &str {
    let start = s.rfind(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).map_or(0, |i| i + 1);
    &s[start..]
}

fn ident_start(s: &str) -> &str {
    let end = s.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(s.len());
    &s[..end]
}

/// Edges cited as `a -> b`, optionally followed by `w=N` in the same
/// clause, checked against `fragment`.
fn cited_edges(text: &str, fragment: &Fragment) -> Result<Vec<SupportEdge>> {
    let names: BTreeMap<String, NodeId> =
        fragment.nodes.iter().map(|n| (node_name(n.id, &n.data).to_ascii_lowercase(), n.id)).collect();
    let weights: BTreeMap<(NodeId, NodeId), u64> = fragment.edges.iter().map(|e| ((e.src, e.dst), e.weight)).collect();
    let mut out = Vec::new();
    let parts: Vec<&str> = text.split("->").collect();
    for i in 0..parts.len().saturating_sub(1) {
        let src = ident_end(parts[i].trim_end());
        let rest = parts[i + 1].trim_start();
        let dst = ident_start(rest);
        if src.is_empty() || dst.is_empty() {
            continue;
        }
        let offset = parts[..=i].iter().map(|p| p.len() + 2).sum::<usize>() - 2;
        let bad = |reason: String| Error::malformed(TemplateId::BehaviorSelect, offset, reason);
        let (Some(s), Some(d)) = (names.get(&src.to_ascii_lowercase()), names.get(&dst.to_ascii_lowercase())) else {
            return Err(bad(format!("{src} -> {dst} names a node outside the subgraph")));
        };
        let weight = *weights.get(&(*s, *d)).ok_or_else(|| bad(format!("{src} -> {dst} is not an edge")))?;
        let clause = rest[dst.len()..].split([';', '\n']).next().unwrap_or("");
        let clause = clause.split("->").next().unwrap_or("");
        if let Some(w) = clause.split_once("w=").and_then(|(_, w)| ident_start(w).parse::<u64>().ok()) {
            if w != weight {
                return Err(bad(format!("{src} -> {dst} cited with w={w}, graph has {weight}")));
            }
        }
        let edge = SupportEdge {
            src: node_name(*s, &fragment.nodes.iter().find(|n| n.id == *s).expect("named node").data),
            dst: node_name(*d, &fragment.nodes.iter().find(|n| n.id == *d).expect("named node").data),
            weight,
        };
        if !out.contains(&edge) {
            out.push(edge);
        }
    }
    Ok(out)
}

fn static_lines(kg: &SdKg, nodes: &[NodeId], with_names: bool) -> Result<String> {
    let mut out = String::new();
    for id in nodes {
        if let NodeData::Static { kind, value } = kg.node(*id)? {
            if with_names {
                out.push_str(&format!("Vessel_{id}: {}={value}\n", kind.as_str()));
            } else {
                out.push_str(&format!("{}: {value}\n", kind.as_str()));
            }
        }
    }
    Ok(out)
}

fn behavior_of(kg: &SdKg, unit: Option<&CommittedUnit>) -> Result<Option<BehaviorTuple>> {
    unit.map(|u| kg.behavior(u.behavior).cloned()).transpose()
}

/// `v_b*` and `J^b` for a gap from its context units.
pub fn estimate_behavior(
    kg: &SdKg,
    before: Option<&CommittedUnit>,
    after: Option<&CommittedUnit>,
    oracle: &dyn Oracle,
    config: &ImputeConfig,
) -> Result<BehaviorChoice> {
    let units: Vec<&CommittedUnit> = before.into_iter().chain(after).collect();
    if units.is_empty() {
        return Err(Error::NoCandidates);
    }
    let query = kg.static_query(&units, true);
    let cands = kg.candidate_behaviors(&query)?;
    if cands.is_empty() {
        return Err(Error::NoCandidates);
    }
    let priors = behavior_prior(kg, &query, &cands)?;
    let short = shortlist(kg, &priors, config.top_k)?;
    let mut ids = query.clone();
    ids.extend(short.iter().map(|(id, _)| *id));
    let fragment = kg.induced_subgraph(&ids)?;
    let mut movement = String::new();
    for (id, e) in &short {
        movement.push_str(&format!(
            "{}: {}; prior={}/{} ({:.6}); support={}\n",
            e.id,
            kg.behavior(*id)?,
            e.support,
            e.total,
            e.prior,
            e.support
        ));
    }
    let (vb_before, vb_after) = (behavior_of(kg, before)?, behavior_of(kg, after)?);
    let req = OracleRequest::new(TemplateId::BehaviorSelect)
        .var("top_k", config.top_k.to_string())
        .var("boundary_text", boundary_text(vb_before.as_ref(), vb_after.as_ref()))
        .var("dot_text", to_dot(&fragment))
        .var("movement_text", movement)
        .var("context_vessels", static_lines(kg, &query, true)?)
        .seed(config.seed);
    let sel = ask(oracle, &req, parse_behavior_selection)?;
    let node = pick(TemplateId::BehaviorSelect, &sel.id, &short)?;
    let graph_support = cited_edges(&sel.graph_support, &fragment)?;
    Ok(BehaviorChoice {
        node,
        name: node_name(node, kg.node(node)?),
        behavior: kg.behavior(node)?.clone(),
        static_nodes: query,
        shortlist: short.into_iter().map(|(_, e)| e).collect(),
        graph_support,
        graph_support_text: sel.graph_support,
        contextual_justification: sel.contextual_justification,
    })
}

fn family(spec: &FunctionSpec) -> &str {
    builtin::classify(spec).unwrap_or(spec.name())
}

/// `v_f*` and `J^f` among the functions linked to the chosen behavior.
pub fn select_method(
    kg: &SdKg,
    behavior: &BehaviorChoice,
    neighbors: &[AisRecord],
    oracle: &dyn Oracle,
    config: &ImputeConfig,
) -> Result<MethodChoice> {
    let cands = kg.candidate_functions(behavior.node)?;
    if cands.is_empty() {
        return Err(Error::NoCandidates);
    }
    let priors = function_prior(kg, behavior.node, &cands)?;
    let short = shortlist(kg, &priors, config.top_k)?;
    let mut ids = vec![behavior.node];
    ids.extend(short.iter().map(|(id, _)| *id));
    let fragment = kg.induced_subgraph(&ids)?;
    let mut functions = String::new();
    for (id, e) in &short {
        let (spec, description) = kg.function(*id)?;
        functions.push_str(&format!("{}: family={}; weight={}\n", e.id, family(spec), kg.weight(behavior.node, *id)));
        functions.push_str(&format!("  description: {description}\n"));
        for line in spec.source().lines() {
            functions.push_str(&format!("  | {line}\n"));
        }
    }
    let listed: BTreeSet<NodeId> = short.iter().map(|(id, _)| *id).collect();
    let other: u64 = cands.iter().filter(|c| !listed.contains(c)).map(|c| kg.weight(behavior.node, *c) + 1).sum();
    if other > 0 {
        functions.push_str(&format!("other_support={other}\n"));
    }
    let req = OracleRequest::new(TemplateId::MethodSelect)
        .var("dot_text", to_dot(&fragment))
        .var("functions_text", functions)
        .var("movement_text", behavior.behavior.to_string())
        .var("rows_text", trajectory_data(neighbors, ""))
        .seed(config.seed);
    let sel = ask(oracle, &req, parse_method_selection)?;
    let node = pick(TemplateId::MethodSelect, &sel.id, &short)?;
    if !sel.statistical_support.contains(|c: char| c.is_ascii_digit()) {
        return Err(Error::malformed(TemplateId::MethodSelect, 0, "statistical support states no probability"));
    }
    let (spec, description) = kg.function(node)?;
    Ok(MethodChoice {
        node,
        name: node_name(node, kg.node(node)?),
        spec: spec.clone(),
        description: description.to_string(),
        shortlist: short.into_iter().map(|(_, e)| e).collect(),
        statistical_support: sel.statistical_support,
        reasoning: sel.reasoning,
    })
}

/// Byte offset of the first `Movement_Pattern_N`, `Vessel_N` or
/// `Function_N` in `text`, case-insensitively.
pub fn mentions_node_id(text: &str) -> Option<usize> {
    let lower = text.to_ascii_lowercase();
    ["movement_pattern_", "vessel_", "function_"]
        .iter()
        .filter_map(|p| {
            lower
                .match_indices(p)
                .find(|(i, m)| {
                    let boundary = *i == 0 || !lower.as_bytes()[i - 1].is_ascii_alphanumeric();
                    boundary && lower[i + m.len()..].starts_with(|c: char| c.is_ascii_digit())
                })
                .map(|(i, _)| i)
        })
        .min()
}

/// `J^h` from the evidence subgraph of the two selections.
pub fn compose_explanation(
    kg: &SdKg,
    behavior: &BehaviorChoice,
    method: &MethodChoice,
    before: Option<&CommittedUnit>,
    after: Option<&CommittedUnit>,
    oracle: &dyn Oracle,
    config: &ImputeConfig,
) -> Result<Explanation> {
    let mut ids = behavior.static_nodes.clone();
    ids.extend([behavior.node, method.node]);
    let fragment = kg.induced_subgraph(&ids)?;
    let function_desc = format!(
        "family: {}\ndescription: {}\nexpression:\n{}",
        family(&method.spec),
        method.description,
        method.spec.source()
    );
    let (vb_before, vb_after) = (behavior_of(kg, before)?, behavior_of(kg, after)?);
    let req = OracleRequest::new(TemplateId::Explain)
        .var("dot_text", to_dot(&fragment))
        .var("movement_desc", behavior.behavior.to_string())
        .var("function_desc", function_desc)
        .var("vessels_desc_block", static_lines(kg, &behavior.static_nodes, false)?)
        .var("vessels_behavior_pattern", boundary_text(vb_before.as_ref(), vb_after.as_ref()))
        .seed(config.seed);
    let out = ask(oracle, &req, parse_explanation)?;
    for field in [&out.regulatory_rule_cue, &out.operational_protocol_rationale] {
        if let Some(at) = mentions_node_id(field) {
            return Err(Error::malformed(TemplateId::Explain, at, "explanation mentions a node id"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::builtin;
    use crate::oracle::{ScriptedOracle, StubOracle};
    use crate::sdkg::tests::{behavior, statics, unit};
    use num_bigint::BigUint;
    use num_rational::BigRational;

    fn graph() -> SdKg {
        let mut kg = SdKg::new();
        let s = statics("under way using engine", "cargo");
        for i in 0..3 {
            kg.upsert_unit(&unit(i, s.clone(), behavior("stable", 1100), builtin::linear())).unwrap();
        }
        kg.upsert_unit(&unit(3, s.clone(), behavior("stable", 1100), builtin::cubic_hermite())).unwrap();
        kg.upsert_unit(&unit(4, s, behavior("decreasing", 1100), builtin::decelerate_then_align(0.0001, 0.5))).unwrap();
        kg
    }

    fn choose(kg: &SdKg, oracle: &dyn Oracle) -> Result<BehaviorChoice> {
        let u = kg.unit("219000001", 0);
        estimate_behavior(kg, u, kg.unit("219000001", 2), oracle, &ImputeConfig::default())
    }

    #[test]
    fn stub_picks_argmax_prior() {
        let kg = graph();
        let b = choose(&kg, &StubOracle).unwrap();
        assert_eq!(b.behavior.speed, "stable");
        // Independent recomputation: eight static nodes, weights 4 and 1.
        let p = |w: u64| BigUint::from(w + 1).pow(8);
        let expected = BigRational::new(p(4).into(), (p(4) + p(1)).into());
        let got = BigRational::new(
            b.shortlist[0].support.parse::<BigUint>().unwrap().into(),
            b.shortlist[0].total.parse::<BigUint>().unwrap().into(),
        );
        assert_eq!(got, expected);
        assert!(b.graph_support.iter().all(|e| e.dst == b.name && e.weight == 4));
        assert_eq!(b.graph_support.len(), 8);
    }

    #[test]
    fn method_weights_three_to_one() {
        let kg = graph();
        let b = choose(&kg, &StubOracle).unwrap();
        let f = select_method(&kg, &b, &[], &StubOracle, &ImputeConfig::default()).unwrap();
        assert_eq!(f.spec.name(), builtin::LINEAR);
        assert!(f.statistical_support.contains("(3+1)/((3+1)+(1+1)) = 4/6 = 0.6667"), "{}", f.statistical_support);
        assert!((f.shortlist[0].prior - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_shortlist_is_malformed() {
        let kg = graph();
        let o = ScriptedOracle::always(
            "'''\nSelected Movement ID: Movement_Pattern_999\nGraph Support: none\nContextual Justification: x\n'''",
        );
        let err = choose(&kg, &o).unwrap_err();
        assert!(matches!(err, Error::MalformedOracleOutput { template: TemplateId::BehaviorSelect, .. }));
        assert!(err.is_retryable());
    }

    #[test]
    fn cited_edges_must_exist() {
        let kg = graph();
        let b = choose(&kg, &StubOracle).unwrap();
        let fake = format!(
            "'''\nSelected Movement ID: {}\nGraph Support: Vessel_1 -> {} (w=99)\nContextual Justification: x\n'''",
            b.name, b.name
        );
        let err = choose(&kg, &ScriptedOracle::always(fake)).unwrap_err();
        assert!(matches!(err, Error::MalformedOracleOutput { .. }), "{err:?}");
    }

    #[test]
    fn node_ids_in_explanations() {
        assert_eq!(mentions_node_id("see Movement_Pattern_3 here"), Some(4));
        assert_eq!(mentions_node_id("FUNCTION_12"), Some(0));
        assert_eq!(mentions_node_id("vessel_ type and function_name"), None);
        let kg = graph();
        let b = choose(&kg, &StubOracle).unwrap();
        let f = select_method(&kg, &b, &[], &StubOracle, &ImputeConfig::default()).unwrap();
        let leaky = ScriptedOracle::always(
            "'''\nRegulatory Rule Cue: Undetermined\nOperational Protocol Rationale: as Movement_Pattern_3 shows\n'''",
        );
        let err = compose_explanation(&kg, &b, &f, None, None, &leaky, &ImputeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedOracleOutput { template: TemplateId::Explain, .. }));
        let ok = compose_explanation(&kg, &b, &f, None, None, &StubOracle, &ImputeConfig::default()).unwrap();
        assert!(ok.regulatory_rule_cue.to_lowercase().contains("traffic separation"));
    }

    #[test]
    fn open_water_is_undetermined() {
        let mut kg = SdKg::new();
        let mut s = statics("under way using engine", "cargo");
        s.spatial_context = "open-water".into();
        kg.upsert_unit(&unit(0, s, behavior("stable", 1100), builtin::linear())).unwrap();
        let b = choose(&kg, &StubOracle).unwrap();
        let f = select_method(&kg, &b, &[], &StubOracle, &ImputeConfig::default()).unwrap();
        let e = compose_explanation(&kg, &b, &f, None, None, &StubOracle, &ImputeConfig::default()).unwrap();
        assert_eq!(e.regulatory_rule_cue, "Undetermined");
    }
}
