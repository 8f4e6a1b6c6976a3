//! Response grammars. Every parser reports the byte offset of the first
//! problem; every structure has a `format` that its parser reads back.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::TemplateId;
use crate::encoder::vocab::{canonicalize_token, VocabKind};
use crate::error::{Error, Result};

const FENCES: [&str; 3] = ["'''", "\"\"\"", "```"];

/// Offset and contents of the first triple-quoted block.
pub fn quoted_block(template: TemplateId, raw: &str) -> Result<(usize, &str)> {
    let (pos, fence) = FENCES
        .iter()
        .filter_map(|f| raw.find(f).map(|p| (p, *f)))
        .min_by_key(|(p, _)| *p)
        .ok_or_else(|| Error::malformed(template, 0, "missing triple-quoted block"))?;
    let mut start = pos + fence.len();
    if fence == "```" {
        // Skip a language tag such as ```text.
        let line_end = raw[start..].find('\n').map_or(raw.len(), |i| start + i);
        if raw[start..line_end].chars().all(|c| c.is_ascii_alphanumeric()) {
            start = (line_end + 1).min(raw.len());
        }
    }
    let len =
        raw[start..].find(fence).ok_or_else(|| Error::malformed(template, pos, "unterminated triple-quoted block"))?;
    Ok((start, &raw[start..start + len]))
}

/// Lines with their byte offsets relative to `base`.
fn lines(base: usize, text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = base;
    text.split_inclusive('\n').map(move |l| {
        let at = offset;
        offset += l.len();
        (at, l.trim_end_matches(['\n', '\r']))
    })
}

fn strip_bullet(line: &str) -> &str {
    line.trim_start().trim_start_matches(['-', '*', '•']).trim_start()
}

/// `label:` at the start of `line`, ignoring case and markdown emphasis.
fn after_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let l = strip_bullet(line).trim_start_matches('*');
    let head = l.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    l[label.len()..].trim_start_matches('*').strip_prefix(':')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeled {
    pub token: String,
    pub explanation: String,
}

impl Labeled {
    fn format(&self) -> String {
        if self.explanation.is_empty() {
            self.token.clone()
        } else {
            format!("{} ({})", self.token, self.explanation)
        }
    }
}

/// `(p^s, p^θ, p^ψ, p^i)` with the explanations that came with them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorPattern {
    pub speed: Labeled,
    pub course: Labeled,
    pub heading: Labeled,
    pub intent: Labeled,
}

const PATTERN_KEYS: [(&str, VocabKind); 4] = [
    ("speed_pattern", VocabKind::Speed),
    ("course_pattern", VocabKind::Course),
    ("heading_pattern", VocabKind::Heading),
    ("intent", VocabKind::Intent),
];

impl BehaviorPattern {
    pub fn get(&self, kind: VocabKind) -> &Labeled {
        match kind {
            VocabKind::Speed => &self.speed,
            VocabKind::Course => &self.course,
            VocabKind::Heading => &self.heading,
            VocabKind::Intent => &self.intent,
        }
    }

    pub fn format(&self) -> String {
        let mut out = String::from("'''\nPattern:\n");
        for (key, kind) in PATTERN_KEYS {
            let _ = writeln!(out, "- {key}: {}", self.get(kind).format());
        }
        out.push_str("'''\n");
        out
    }
}

pub fn parse_behavior_pattern(raw: &str) -> Result<BehaviorPattern> {
    let t = TemplateId::BehaviorAbstraction;
    let (start, block) = quoted_block(t, raw)?;
    let mut found: [Option<Labeled>; 4] = Default::default();
    for (at, line) in lines(start, block) {
        for (i, (key, _)) in PATTERN_KEYS.iter().enumerate() {
            let Some(value) = after_label(line, key) else { continue };
            if found[i].is_some() {
                return Err(Error::malformed(t, at, format!("duplicate {key} line")));
            }
            let (token, explanation) = match value.split_once('(') {
                Some((tok, rest)) => (tok, rest.rfind(')').map_or(rest, |j| &rest[..j])),
                None => (value, ""),
            };
            let token = canonicalize_token(token);
            if token.is_empty() {
                return Err(Error::malformed(t, at, format!("empty {key} token")));
            }
            found[i] = Some(Labeled { token, explanation: explanation.trim().to_string() });
        }
    }
    let end = start + block.len();
    let [speed, course, heading, intent] = found;
    let take = |v: Option<Labeled>, i: usize| {
        v.ok_or_else(|| Error::malformed(t, end, format!("missing {} line", PATTERN_KEYS[i].0)))
    };
    Ok(BehaviorPattern {
        speed: take(speed, 0)?,
        course: take(course, 1)?,
        heading: take(heading, 2)?,
        intent: take(intent, 3)?,
    })
}

/// IEL text of a proposed function and its optional description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionProposal {
    pub source: String,
    pub description: String,
}

impl FunctionProposal {
    pub fn format(&self) -> String {
        let mut out = format!("Function:\n'''\n{}\n'''\n", self.source);
        if !self.description.is_empty() {
            let _ = writeln!(out, "Description: {}", self.description);
        }
        out
    }
}

/// Text from the first `Description:` label to the end.
fn description_after(base: usize, text: &str) -> Option<(usize, String)> {
    let mut rel = 0;
    for line in text.split_inclusive('\n') {
        if let Some(v) = after_label(line.trim_end_matches(['\n', '\r']), "Description") {
            let tail = &text[rel + line.len()..];
            return Some((base + rel, format!("{v}\n{tail}").trim().to_string()));
        }
        rel += line.len();
    }
    None
}

pub fn parse_function_proposal(raw: &str) -> Result<FunctionProposal> {
    let t = TemplateId::MethodBuilder;
    let (start, block) = quoted_block(t, raw)?;
    let source = block.trim();
    if source.is_empty() {
        return Err(Error::malformed(t, start, "empty function block"));
    }
    let after = (start + block.len() + 3).min(raw.len());
    let description = description_after(after, &raw[after..]).map(|(_, d)| d).unwrap_or_default();
    Ok(FunctionProposal { source: source.to_string(), description })
}

/// Values of `labels` inside the quoted block, in label order. A value runs
/// until the next label line.
fn labeled_fields(t: TemplateId, raw: &str, labels: &[&str]) -> Result<Vec<String>> {
    let (start, block) = quoted_block(t, raw)?;
    let mut values: Vec<Option<(usize, String)>> = vec![None; labels.len()];
    let mut current: Option<usize> = None;
    for (at, line) in lines(start, block) {
        match labels.iter().enumerate().find_map(|(i, l)| after_label(line, l).map(|v| (i, v))) {
            Some((i, v)) => {
                if values[i].is_some() {
                    return Err(Error::malformed(t, at, format!("duplicate {:?}", labels[i])));
                }
                values[i] = Some((at, v.to_string()));
                current = Some(i);
            }
            None => {
                if let Some((_, v)) = current.and_then(|i| values[i].as_mut()) {
                    v.push('\n');
                    v.push_str(line);
                }
            }
        }
    }
    let end = start + block.len();
    values
        .into_iter()
        .zip(labels)
        .map(|(v, l)| match v {
            None => Err(Error::malformed(t, end, format!("missing {l:?}"))),
            Some((at, v)) if v.trim().is_empty() => Err(Error::malformed(t, at, format!("empty {l:?}"))),
            Some((_, v)) => Ok(v.trim().to_string()),
        })
        .collect()
}

fn format_fields(pairs: &[(&str, &str)]) -> String {
    let mut out = String::from("'''\n");
    for (l, v) in pairs {
        let _ = writeln!(out, "{l}: {v}");
    }
    out.push_str("'''\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorSelection {
    pub id: String,
    pub graph_support: String,
    pub contextual_justification: String,
}

const BEHAVIOR_LABELS: [&str; 3] = ["Selected Movement ID", "Graph Support", "Contextual Justification"];

impl BehaviorSelection {
    pub fn format(&self) -> String {
        format_fields(&[
            (BEHAVIOR_LABELS[0], &self.id),
            (BEHAVIOR_LABELS[1], &self.graph_support),
            (BEHAVIOR_LABELS[2], &self.contextual_justification),
        ])
    }
}

pub fn parse_behavior_selection(raw: &str) -> Result<BehaviorSelection> {
    let [id, graph_support, contextual_justification]: [String; 3] =
        labeled_fields(TemplateId::BehaviorSelect, raw, &BEHAVIOR_LABELS)?.try_into().expect("three labels");
    Ok(BehaviorSelection { id, graph_support, contextual_justification })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSelection {
    pub id: String,
    pub statistical_support: String,
    pub reasoning: String,
}

const METHOD_LABELS: [&str; 3] = ["Selected Function ID", "Statistical Support", "Reasoning"];

impl MethodSelection {
    pub fn format(&self) -> String {
        format_fields(&[
            (METHOD_LABELS[0], &self.id),
            (METHOD_LABELS[1], &self.statistical_support),
            (METHOD_LABELS[2], &self.reasoning),
        ])
    }
}

pub fn parse_method_selection(raw: &str) -> Result<MethodSelection> {
    let [id, statistical_support, reasoning]: [String; 3] =
        labeled_fields(TemplateId::MethodSelect, raw, &METHOD_LABELS)?.try_into().expect("three labels");
    Ok(MethodSelection { id, statistical_support, reasoning })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub regulatory_rule_cue: String,
    pub operational_protocol_rationale: String,
}

const EXPLAIN_LABELS: [&str; 2] = ["Regulatory Rule Cue", "Operational Protocol Rationale"];

impl Explanation {
    pub fn format(&self) -> String {
        format_fields(&[
            (EXPLAIN_LABELS[0], &self.regulatory_rule_cue),
            (EXPLAIN_LABELS[1], &self.operational_protocol_rationale),
        ])
    }
}

pub fn parse_explanation(raw: &str) -> Result<Explanation> {
    let [regulatory_rule_cue, operational_protocol_rationale]: [String; 2] =
        labeled_fields(TemplateId::Explain, raw, &EXPLAIN_LABELS)?.try_into().expect("two labels");
    Ok(Explanation { regulatory_rule_cue, operational_protocol_rationale })
}

/// `primary | [redundant, ...]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeGroup {
    pub primary: String,
    pub redundant: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupResult {
    /// Keyed by vocabulary kind name.
    pub behavior: BTreeMap<String, Vec<MergeGroup>>,
    pub keep_unique_behavior: Vec<String>,
    pub function: Vec<MergeGroup>,
    pub keep_unique_function: Vec<String>,
}

const BEHAVIOR_HEADER: &str = "BEHAVIOR_REDUNDANCY:";
const FUNCTION_HEADER: &str = "FUNCTION_REDUNDANCY:";

fn clean_item(s: &str) -> String {
    s.trim().trim_matches(['<', '>', '"', '\'', '`']).trim().to_string()
}

fn parse_list(s: &str) -> Vec<String> {
    let s = s.trim();
    let s = s.strip_prefix('[').unwrap_or(s);
    let s = s.strip_suffix(']').unwrap_or(s);
    s.split(',').map(clean_item).filter(|x| !x.is_empty()).collect()
}

fn parse_group(t: TemplateId, at: usize, line: &str) -> Result<MergeGroup> {
    let body = strip_bullet(line);
    let (primary, rest) = body.split_once('|').ok_or_else(|| Error::malformed(t, at, "merge line without '|'"))?;
    let primary = clean_item(primary);
    if primary.is_empty() {
        return Err(Error::malformed(t, at, "merge line without a primary"));
    }
    Ok(MergeGroup { primary, redundant: parse_list(rest) })
}

fn format_list(items: &[String]) -> String {
    format!("[{}]", items.join(", "))
}

impl DedupResult {
    pub fn format(&self) -> String {
        let mut out = format!("{BEHAVIOR_HEADER}\n");
        for (attr, groups) in &self.behavior {
            let _ = writeln!(out, "[{attr}]:");
            for g in groups {
                let _ = writeln!(out, "- {} | {}", g.primary, format_list(&g.redundant));
            }
        }
        let _ = writeln!(out, "KEEP_UNIQUE: {}\n", format_list(&self.keep_unique_behavior));
        let _ = writeln!(out, "{FUNCTION_HEADER}");
        for g in &self.function {
            let _ = writeln!(out, "- {} | {}", g.primary, format_list(&g.redundant));
        }
        let _ = writeln!(out, "KEEP_UNIQUE: {}", format_list(&self.keep_unique_function));
        out
    }
}

pub fn parse_dedup(raw: &str) -> Result<DedupResult> {
    let t = TemplateId::Dedup;
    let b = raw.find(BEHAVIOR_HEADER).ok_or_else(|| Error::malformed(t, 0, "missing BEHAVIOR_REDUNDANCY"))?;
    let f = raw.find(FUNCTION_HEADER).ok_or_else(|| Error::malformed(t, raw.len(), "missing FUNCTION_REDUNDANCY"))?;
    if f < b {
        return Err(Error::malformed(t, f, "FUNCTION_REDUNDANCY before BEHAVIOR_REDUNDANCY"));
    }
    let mut out = DedupResult::default();
    let mut attr: Option<VocabKind> = None;
    let bstart = b + BEHAVIOR_HEADER.len();
    for (at, line) in lines(bstart, &raw[bstart..f]) {
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(v) = after_label(l, "KEEP_UNIQUE") {
            out.keep_unique_behavior.extend(parse_list(v));
        } else if l.starts_with('-') {
            let kind = attr.ok_or_else(|| Error::malformed(t, at, "merge line before an attribute header"))?;
            out.behavior.entry(kind.as_str().to_string()).or_default().push(parse_group(t, at, l)?);
        } else if let Some(name) = l.strip_suffix(':') {
            attr = VocabKind::from_label(name.trim_matches(['[', ']']));
        }
    }
    let fstart = f + FUNCTION_HEADER.len();
    for (at, line) in lines(fstart, &raw[fstart..]) {
        let l = line.trim();
        if let Some(v) = after_label(l, "KEEP_UNIQUE") {
            out.keep_unique_function.extend(parse_list(v));
        } else if l.starts_with('-') {
            out.function.push(parse_group(t, at, l)?);
        }
    }
    Ok(out)
}

pub fn format_description(text: &str) -> String {
    format!("Description: {text}\n")
}

pub fn parse_description(raw: &str) -> Result<String> {
    let t = TemplateId::Describe;
    let (at, d) = description_after(0, raw).ok_or_else(|| Error::malformed(t, 0, "missing \"Description:\""))?;
    if d.is_empty() {
        return Err(Error::malformed(t, at, "empty description"));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parsed {
    Behavior(BehaviorPattern),
    Function(FunctionProposal),
    BehaviorSelection(BehaviorSelection),
    MethodSelection(MethodSelection),
    Explanation(Explanation),
    Dedup(DedupResult),
    Description(String),
}

pub fn parse(template: TemplateId, raw: &str) -> Result<Parsed> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyOracleOutput(template));
    }
    Ok(match template {
        TemplateId::BehaviorAbstraction => Parsed::Behavior(parse_behavior_pattern(raw)?),
        TemplateId::MethodBuilder => Parsed::Function(parse_function_proposal(raw)?),
        TemplateId::BehaviorSelect => Parsed::BehaviorSelection(parse_behavior_selection(raw)?),
        TemplateId::MethodSelect => Parsed::MethodSelection(parse_method_selection(raw)?),
        TemplateId::Explain => Parsed::Explanation(parse_explanation(raw)?),
        TemplateId::Dedup => Parsed::Dedup(parse_dedup(raw)?),
        TemplateId::Describe => Parsed::Description(parse_description(raw)?),
    })
}
