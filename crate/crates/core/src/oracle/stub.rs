//! Rule-based offline oracle. Output is a pure function of the request and
//! always satisfies the template's grammar.

use std::collections::BTreeMap;

use num_bigint::BigUint;

use super::parse::{
    format_description, BehaviorPattern, BehaviorSelection, DedupResult, Explanation, FunctionProposal, Labeled,
    MergeGroup, MethodSelection,
};
use super::vars::{
    candidate_lines, node_number, parse_attribute_lines, parse_dot_edges, parse_kv, parse_rejected, parse_trajectory,
    TrajectoryRow,
};
use super::{Oracle, OracleRequest, OracleResponse, TemplateId};
use crate::encoder::vocab::{canonicalize_token, VocabKind};
use crate::error::Result;
use crate::method::builtin;

#[derive(Debug, Clone, Copy, Default)]
pub struct StubOracle;

impl StubOracle {
    pub fn new() -> Self {
        StubOracle
    }

    pub fn answer(&self, req: &OracleRequest) -> String {
        match req.template {
            TemplateId::BehaviorAbstraction => behavior_abstraction(req).format(),
            TemplateId::MethodBuilder => method_builder(req).format(),
            TemplateId::BehaviorSelect => behavior_select(req).format(),
            TemplateId::MethodSelect => method_select(req).format(),
            TemplateId::Explain => explain(req).format(),
            TemplateId::Dedup => dedup(req).format(),
            TemplateId::Describe => format_description(&describe(req)),
        }
    }
}

impl Oracle for StubOracle {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse> {
        Ok(OracleResponse { raw: self.answer(request), latency_ms: 0 })
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    mean(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>()).sqrt()
}

/// Difference folded into (-180, 180].
fn wrap_deg(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

fn angle_steps(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|w| wrap_deg(w[1] - w[0])).collect()
}

fn column(rows: &[TrajectoryRow], get: impl Fn(&TrajectoryRow) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter_map(get).collect()
}

pub fn speed_token(sog: &[f64]) -> &'static str {
    let m = mean(sog);
    if m <= 0.0 || std_dev(sog) / m < 0.05 {
        return "stable";
    }
    let third = (sog.len() / 3).max(1);
    let trend = (mean(&sog[sog.len() - third..]) - mean(&sog[..third])) / m;
    if trend > 0.10 {
        "increasing"
    } else if trend < -0.10 {
        "decreasing"
    } else {
        "fluctuating"
    }
}

pub fn course_token(cog: &[f64]) -> &'static str {
    let turned = angle_steps(cog).iter().sum::<f64>().abs();
    if turned < 10.0 {
        "stable"
    } else if turned < 45.0 {
        "gradual"
    } else {
        "sharp"
    }
}

pub fn heading_token(heading: &[f64]) -> &'static str {
    let s = std_dev(&angle_steps(heading));
    if s < 1.0 {
        "stable"
    } else if s < 5.0 {
        "mild fluctuation"
    } else {
        "strong fluctuation"
    }
}

fn intent_token(nav_status: &str, speed: &str, course: &str) -> &'static str {
    if nav_status.contains("moored") {
        "mooring"
    } else if nav_status.contains("anchor") {
        "anchoring"
    } else if speed == "decreasing" {
        "slowing down"
    } else if speed == "increasing" {
        "accelerating"
    } else if course != "stable" {
        "turning"
    } else {
        "navigating"
    }
}

fn explain_token(kind: VocabKind, token: &str) -> String {
    let text = match (kind, token) {
        (VocabKind::Speed, "stable") => {
            "the vessel is maintaining a consistent speed, not accelerating or decelerating"
        }
        (VocabKind::Speed, "increasing") => "speed over ground rises across the segment",
        (VocabKind::Speed, "decreasing") => "speed over ground falls across the segment",
        (VocabKind::Speed, _) => "speed over ground varies without a clear trend",
        (VocabKind::Course, "stable") => "the vessel is maintaining a consistent course over ground",
        (VocabKind::Course, "gradual") => "course over ground turns steadily by a moderate amount",
        (VocabKind::Course, _) => "course over ground turns by a large amount",
        (VocabKind::Heading, "stable") => "the heading does not fluctuate significantly, indicating no sharp maneuvers",
        (VocabKind::Heading, _) => "the heading changes irregularly between reports",
        (VocabKind::Intent, "navigating") => "the vessel is maintaining its course",
        (VocabKind::Intent, "turning") => "the vessel is altering course",
        (VocabKind::Intent, "slowing down") => "the vessel is reducing speed",
        (VocabKind::Intent, "accelerating") => "the vessel is gaining speed",
        (VocabKind::Intent, _) => "the vessel is holding position",
    };
    text.to_string()
}

fn behavior_abstraction(req: &OracleRequest) -> BehaviorPattern {
    let rows = parse_trajectory(req.get("trajectory_data"));
    let speed = speed_token(&column(&rows, |r| r.sog));
    let course = course_token(&column(&rows, |r| r.cog));
    let heading = heading_token(&column(&rows, |r| r.heading));
    let nav = rows.iter().find_map(|r| r.nav_status.clone()).unwrap_or_default().to_lowercase();
    let intent = intent_token(&nav, speed, course);
    let l = |kind, token: &str| Labeled { token: token.to_string(), explanation: explain_token(kind, token) };
    BehaviorPattern {
        speed: l(VocabKind::Speed, speed),
        course: l(VocabKind::Course, course),
        heading: l(VocabKind::Heading, heading),
        intent: l(VocabKind::Intent, intent),
    }
}

/// Nine significant digits, so nearby estimates share one text.
fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return 0.0;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Turn rate in radians per second and final-to-initial speed ratio.
fn kinematics(rows: &[TrajectoryRow]) -> (f64, f64) {
    let timed: Vec<(i64, f64)> = rows.iter().filter_map(|r| Some((r.timestamp, r.cog?))).collect();
    let omega = match (timed.first(), timed.last()) {
        (Some(a), Some(b)) if b.0 > a.0 => {
            let cogs: Vec<f64> = timed.iter().map(|x| x.1).collect();
            angle_steps(&cogs).iter().sum::<f64>().to_radians() / (b.0 - a.0) as f64
        }
        _ => 0.0,
    };
    let sog = column(rows, |r| r.sog);
    let decay = match (sog.first(), sog.last()) {
        (Some(a), Some(b)) if *a > 0.0 => (b / a).clamp(0.05, 20.0),
        _ => 1.0,
    };
    (round_sig(omega), round_sig(decay))
}

fn method_builder(req: &OracleRequest) -> FunctionProposal {
    let rows = parse_trajectory(req.get("trajectory_data"));
    let pattern = parse_kv(req.get("pattern"));
    let (omega, decay) = kinematics(&rows);
    let speed = pattern.get("speed").map(String::as_str).unwrap_or("stable");
    let course = pattern.get("course").map(String::as_str).unwrap_or("stable");
    let turn = (builtin::CONSTANT_TURN, builtin::constant_turn_source(omega));
    let dta = (builtin::DECELERATE_THEN_ALIGN, builtin::decelerate_then_align_source(omega, decay));
    let linear = (builtin::LINEAR, builtin::linear_source().to_string());
    let hermite = (builtin::CUBIC_HERMITE, builtin::cubic_hermite_source().to_string());
    let primary = if speed == "increasing" || speed == "decreasing" {
        dta.clone()
    } else if course == "stable" {
        linear.clone()
    } else {
        turn.clone()
    };
    let mut order = vec![primary];
    for c in [turn, hermite, linear, dta] {
        if !order.iter().any(|o| o.1 == c.1) {
            order.push(c);
        }
    }
    let (family, source) = order.swap_remove(parse_rejected(req.get("feedback_text_description")) % order.len());
    FunctionProposal { source, description: format!("{family} path between the boundary points.") }
}

fn describe(req: &OracleRequest) -> String {
    let name = req.get("function_name");
    let pattern = req.get("pattern");
    let assumption = match name {
        builtin::LINEAR => "the vessel moves along the straight chord at constant speed",
        builtin::CUBIC_HERMITE => "position follows a cubic curve matching the boundary velocities",
        builtin::CONSTANT_TURN => "the vessel turns at a constant rate at constant speed",
        builtin::DECELERATE_THEN_ALIGN => "the vessel turns at a constant rate while its speed changes linearly",
        _ => "the expression captures the motion of the segment it was fitted on",
    };
    let text = req.get("function_text");
    let params: Vec<String> = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .filter(|(_, v)| v.trim().parse::<f64>().is_ok())
        .map(|(k, v)| format!("{} = {}", k.trim(), v.trim()))
        .collect();
    let params = if params.is_empty() { "none beyond the boundary points".to_string() } else { params.join(", ") };
    format!(
        "{name} function intended for segments with behavior pattern {pattern}. Key assumption: {assumption}. \
         Parameters: {params}; u is the normalized time between the boundary points."
    )
}

fn by_support_then_id(a: &(BigUint, u64), b: &(BigUint, u64)) -> std::cmp::Ordering {
    b.0.cmp(&a.0).then(a.1.cmp(&b.1))
}

fn behavior_select(req: &OracleRequest) -> BehaviorSelection {
    let cands = candidate_lines(req.get("movement_text"));
    let ranked = cands
        .iter()
        .filter_map(|(id, kv)| {
            let support: BigUint = kv.get("support")?.parse().ok()?;
            Some(((support, node_number(id)?), id, kv))
        })
        .min_by(|a, b| by_support_then_id(&a.0, &b.0));
    let Some((_, id, kv)) = ranked else {
        return BehaviorSelection {
            id: "none".into(),
            graph_support: "no candidate movements".into(),
            contextual_justification: "no candidate movements".into(),
        };
    };
    let edges: Vec<String> = parse_dot_edges(req.get("dot_text"))
        .into_iter()
        .filter(|(_, dst, _)| dst == id)
        .map(|(src, dst, w)| format!("{src} -> {dst} (w={w})"))
        .collect();
    let graph_support =
        if edges.is_empty() { format!("no weighted edges reach {id}; the prior is uniform") } else { edges.join("; ") };
    let tokens: Vec<String> = ["speed", "course", "heading", "intent"]
        .iter()
        .filter_map(|k| kv.get(*k).map(|v| format!("{k} {v}")))
        .collect();
    let boundary = req.get("boundary_text").lines().map(str::trim).collect::<Vec<_>>().join("; ");
    BehaviorSelection {
        id: id.clone(),
        graph_support,
        contextual_justification: format!(
            "The movement with {} has the largest graph support and is consistent with the boundary patterns ({boundary}).",
            tokens.join(", ")
        ),
    }
}

fn method_select(req: &OracleRequest) -> MethodSelection {
    let text = req.get("functions_text");
    let cands: Vec<(String, u64, String)> = candidate_lines(text)
        .into_iter()
        .filter_map(|(id, kv)| {
            let w = kv.get("weight")?.parse().ok()?;
            Some((id, w, kv.get("family").cloned().unwrap_or_default()))
        })
        .collect();
    let other: u64 = text
        .lines()
        .find_map(|l| l.trim().strip_prefix("other_support="))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0);
    let Some((id, w, family)) =
        cands.iter().min_by(|a, b| b.1.cmp(&a.1).then(node_number(&a.0).cmp(&node_number(&b.0)))).cloned()
    else {
        return MethodSelection {
            id: "none".into(),
            statistical_support: "no candidate functions".into(),
            reasoning: "no candidate functions".into(),
        };
    };
    let mut terms: Vec<String> = cands.iter().map(|c| format!("({}+1)", c.1)).collect();
    let mut total: u64 = cands.iter().map(|c| c.1 + 1).sum();
    if other > 0 {
        terms.push(other.to_string());
        total += other;
    }
    let p = (w + 1) as f64 / total as f64;
    let movement = parse_kv(req.get("movement_text"));
    let course = movement.get("course").cloned().unwrap_or_default();
    let speed = movement.get("speed").cloned().unwrap_or_default();
    MethodSelection {
        id: id.clone(),
        statistical_support: format!(
            "1. P({id}) = ({w}+1)/({}) = {}/{total} = {p:.4}. 2. {family} is the most frequently associated method for this behavior pattern.",
            terms.join("+"),
            w + 1
        ),
        reasoning: format!("The {family} model reproduces a {speed} speed profile with a {course} course between the boundary points."),
    }
}

fn rule_cue(context: &str) -> String {
    match context {
        "traffic-separation-scheme" => "COLREGs Rule 10 (traffic separation schemes): a vessel using a traffic separation scheme proceeds in the appropriate traffic lane in the general direction of traffic flow; applies within the traffic separation scheme around the gap.".into(),
        "shipping-lane" => "COLREGs Rule 9 (narrow channels): a vessel keeps to the starboard side of the fairway; applies within the shipping lane around the gap.".into(),
        "port" => "Port regulations: reduced speed and controlled maneuvering inside the harbour limits; applies within the port area around the gap.".into(),
        "anchorage" => "Anchorage regulations: vessels move slowly and keep clear of anchored ships; applies within the anchorage around the gap.".into(),
        _ => "Undetermined".into(),
    }
}

fn explain(req: &OracleRequest) -> Explanation {
    let attrs = parse_attribute_lines(req.get("vessels_desc_block"));
    let first = |k: &str| attrs.get(k).and_then(|v| v.first()).cloned().unwrap_or_else(|| "unknown".into());
    let context = first("spatial_context");
    let movement = parse_kv(req.get("movement_desc"));
    let token = |k: &str| movement.get(k).cloned().unwrap_or_else(|| "unknown".into());
    let family = parse_attribute_lines(req.get("function_desc"))
        .get("family")
        .and_then(|v| v.first().cloned())
        .unwrap_or_else(|| "selected".into());
    let alternative = if token("course") == "stable" { "a turning path" } else { "a straight-line path" };
    Explanation {
        regulatory_rule_cue: rule_cue(&context),
        operational_protocol_rationale: format!(
            "A {} vessel reported as {} in {context} typically keeps a {} speed and a {} course with {} heading while {}. \
             The {family} model reproduces this motion between the boundary points; {alternative} would contradict the observed course.",
            first("ship_type"),
            first("nav_status"),
            token("speed"),
            token("course"),
            token("heading"),
            token("intent"),
        ),
    }
}

fn synonyms(kind: VocabKind) -> &'static [(&'static str, &'static [&'static str])] {
    match kind {
        VocabKind::Speed => &[
            ("stable", &["steady", "constant", "consistent", "constant speed", "steady speed", "uniform"]),
            ("increasing", &["accelerating", "rising", "speeding up"]),
            ("decreasing", &["decelerating", "slowing", "slowing down", "reducing"]),
            ("fluctuating", &["variable", "irregular", "oscillating"]),
        ],
        VocabKind::Course => &[
            ("stable", &["straight", "steady", "constant", "straight line", "unchanged", "consistent"]),
            ("gradual", &["gradual turn", "slight turn", "gentle turn", "gentle", "slight"]),
            ("sharp", &["sharp turn", "abrupt turn", "abrupt", "hard turn"]),
        ],
        VocabKind::Heading => &[
            ("stable", &["steady", "constant", "consistent", "no fluctuation"]),
            ("mild fluctuation", &["slight fluctuation", "minor fluctuation"]),
            ("strong fluctuation", &["large fluctuation", "erratic"]),
        ],
        VocabKind::Intent => &[
            ("navigating", &["cruising", "transiting", "underway", "maintaining course", "en route"]),
            ("slowing down", &["decelerating", "reducing speed"]),
            ("turning", &["maneuvering", "manoeuvring", "altering course"]),
            ("anchoring", &["at anchor", "anchored"]),
            ("mooring", &["moored", "berthing"]),
        ],
    }
}

fn dedup(req: &OracleRequest) -> DedupResult {
    let mut out = DedupResult::default();
    for (name, lists) in parse_attribute_lines(req.get("vb_data_text")) {
        let Some(kind) = VocabKind::from_label(&name) else { continue };
        let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for token in lists.iter().flat_map(|l| l.split(',')).map(canonicalize_token).filter(|t| !t.is_empty()) {
            match synonyms(kind).iter().find(|(_, syn)| syn.contains(&token.as_str())) {
                Some((primary, _)) => groups.entry(primary).or_default().push(token),
                None => out.keep_unique_behavior.push(token),
            }
        }
        let groups: Vec<MergeGroup> =
            groups.into_iter().map(|(p, r)| MergeGroup { primary: p.to_string(), redundant: r }).collect();
        if !groups.is_empty() {
            out.behavior.insert(kind.as_str().to_string(), groups);
        }
    }
    out.keep_unique_function = candidate_lines(req.get("vf_data_text")).into_iter().map(|(id, _)| id).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::{generate_synthetic_track, SyntheticParams, TrackKind};
    use crate::oracle::parse;
    use crate::oracle::vars::{feedback_text, trajectory_data};

    fn abstraction(kind: TrackKind, params: SyntheticParams) -> BehaviorPattern {
        let seq = generate_synthetic_track(kind, 20, &params).unwrap();
        let req = OracleRequest::new(TemplateId::BehaviorAbstraction)
            .var("trajectory_data", trajectory_data(seq.records(), "open-water"));
        parse::parse_behavior_pattern(&StubOracle.answer(&req)).unwrap()
    }

    #[test]
    fn constant_velocity_is_all_stable() {
        let p = abstraction(TrackKind::ConstantVelocity, SyntheticParams::default());
        let toks: Vec<&str> = VocabKind::ALL.iter().map(|k| p.get(*k).token.as_str()).collect();
        assert_eq!(toks, ["stable", "stable", "stable", "navigating"]);
    }

    #[test]
    fn constant_turn_is_gradual() {
        let p = abstraction(TrackKind::ConstantTurn, SyntheticParams { turn_rate: 0.01, ..Default::default() });
        assert_eq!(p.course.token, "gradual");
        assert_eq!(p.speed.token, "stable");
        assert_eq!(p.heading.token, "stable");
        assert_eq!(p.intent.token, "turning");
    }

    #[test]
    fn speed_thresholds_follow_cv() {
        // Independent CV: population std / mean.
        let cv = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt() / m
        };
        let calm = [10.0, 10.2, 9.9, 10.1, 10.0, 9.8];
        assert!(cv(&calm) < 0.05);
        assert_eq!(speed_token(&calm), "stable");
        let slowing: Vec<f64> = (0..20).map(|i| 12.0 - 0.3 * i as f64).collect();
        assert!(cv(&slowing) >= 0.05);
        assert_eq!(speed_token(&slowing), "decreasing");
        assert_eq!(speed_token(&slowing.iter().rev().copied().collect::<Vec<_>>()), "increasing");
        assert_eq!(speed_token(&[10.0, 14.0, 10.0, 14.0, 10.0, 14.0]), "fluctuating");
    }

    #[test]
    fn course_thresholds() {
        assert_eq!(course_token(&[350.0, 353.0, 357.0]), "stable");
        assert_eq!(course_token(&[358.0, 2.0, 5.0]), "stable");
        assert_eq!(course_token(&[350.0, 10.0, 20.0]), "gradual");
        assert_eq!(course_token(&[0.0, 30.0, 60.0]), "sharp");
    }

    #[test]
    fn builder_rotates_through_families_on_feedback() {
        let seq = generate_synthetic_track(TrackKind::ConstantVelocity, 20, &SyntheticParams::default()).unwrap();
        let req = |rejected: usize| {
            let fb: Vec<(usize, f64, f64, f64)> = (1..=rejected).map(|i| (i, 1.0, 1.0, 1.0)).collect();
            OracleRequest::new(TemplateId::MethodBuilder)
                .var("trajectory_data", trajectory_data(seq.records(), "open-water"))
                .var("pattern", "speed=stable; course=stable")
                .var("feedback_text_description", feedback_text(&fb, 3e-3))
        };
        let first = parse::parse_function_proposal(&StubOracle.answer(&req(0))).unwrap();
        assert_eq!(first.source, builtin::linear().source());
        let second = parse::parse_function_proposal(&StubOracle.answer(&req(1))).unwrap();
        assert_ne!(second.source, first.source);
    }

    #[test]
    fn method_select_reports_derivation() {
        let req = OracleRequest::new(TemplateId::MethodSelect)
            .var("functions_text", "Function_5: family=linear; weight=3\nFunction_6: family=cubic-hermite; weight=1\n")
            .var("movement_text", "speed=stable; course=stable");
        let s = parse::parse_method_selection(&StubOracle.answer(&req)).unwrap();
        assert_eq!(s.id, "Function_5");
        assert!(s.statistical_support.contains("(3+1)/((3+1)+(1+1)) = 4/6 = 0.6667"), "{}", s.statistical_support);
    }

    #[test]
    fn behavior_select_ties_go_to_lower_id() {
        let req = OracleRequest::new(TemplateId::BehaviorSelect)
            .var("movement_text", "Movement_Pattern_9: speed=stable; support=4\nMovement_Pattern_4: speed=gradual; support=4\nMovement_Pattern_2: speed=x; support=3\n")
            .var("dot_text", "digraph sdkg {\n  Vessel_1 -> Movement_Pattern_4 [label=\"w=3\"];\n}\n");
        let s = parse::parse_behavior_selection(&StubOracle.answer(&req)).unwrap();
        assert_eq!(s.id, "Movement_Pattern_4");
        assert_eq!(s.graph_support, "Vessel_1 -> Movement_Pattern_4 (w=3)");
    }

    #[test]
    fn explanation_by_context() {
        let req = |ctx: &str| {
            OracleRequest::new(TemplateId::Explain)
                .var("vessels_desc_block", format!("spatial_context: {ctx}\nship_type: cargo"))
                .var("movement_desc", "speed=stable; course=stable")
        };
        let e = parse::parse_explanation(&StubOracle.answer(&req("traffic-separation-scheme"))).unwrap();
        assert!(e.regulatory_rule_cue.contains("traffic separation"));
        let e = parse::parse_explanation(&StubOracle.answer(&req("open-water"))).unwrap();
        assert_eq!(e.regulatory_rule_cue, "Undetermined");
    }

    #[test]
    fn dedup_groups_synonyms() {
        let req = OracleRequest::new(TemplateId::Dedup)
            .var("vb_data_text", "speed: stable, steady, constant, increasing\ncourse: gentle turn, stable")
            .var("vf_data_text", "Function_3: lat = lat0\nFunction_4: lat = lat1");
        let d = parse::parse_dedup(&StubOracle.answer(&req)).unwrap();
        assert_eq!(
            d.behavior["speed"],
            vec![MergeGroup { primary: "stable".into(), redundant: vec!["steady".into(), "constant".into()] }]
        );
        assert_eq!(d.behavior["course"][0].primary, "gradual");
        assert_eq!(d.keep_unique_function, vec!["Function_3", "Function_4"]);
    }

    #[test]
    fn deterministic() {
        let req = OracleRequest::new(TemplateId::Describe)
            .var("function_name", "linear")
            .var("function_text", builtin::linear_source())
            .var("pattern", "speed=stable; course=stable");
        let a = StubOracle.call(&req).unwrap();
        assert_eq!(a, StubOracle.call(&req).unwrap());
        let d = parse::parse_description(&a.raw).unwrap();
        assert!(d.contains("linear") && d.contains("stable"));
    }
}
