//! Prompt templates with `{name}` placeholders. `{{` and `}}` are literal
//! braces; substituted values are never rescanned.

use std::collections::{BTreeMap, BTreeSet};

use super::TemplateId;
use crate::error::{Error, Result};

pub fn text(id: TemplateId) -> &'static str {
    match id {
        TemplateId::BehaviorAbstraction => include_str!("../../templates/behavior_abstraction.txt"),
        TemplateId::MethodBuilder => include_str!("../../templates/method_builder.txt"),
        TemplateId::BehaviorSelect => include_str!("../../templates/behavior_select.txt"),
        TemplateId::MethodSelect => include_str!("../../templates/method_select.txt"),
        TemplateId::Explain => include_str!("../../templates/explain.txt"),
        TemplateId::Dedup => include_str!("../../templates/dedup.txt"),
        TemplateId::Describe => include_str!("../../templates/describe.txt"),
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

enum Piece<'a> {
    Lit(&'a str),
    Slot(&'a str),
}

fn pieces(t: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = t;
    while let Some(i) = rest.find(['{', '}']) {
        out.push(Piece::Lit(&rest[..i]));
        let tail = &rest[i..];
        if let Some(r) = tail.strip_prefix("{{") {
            out.push(Piece::Lit("{"));
            rest = r;
        } else if let Some(r) = tail.strip_prefix("}}") {
            out.push(Piece::Lit("}"));
            rest = r;
        } else if let Some(name) =
            tail.strip_prefix('{').and_then(|s| s.split_once('}')).map(|(n, _)| n).filter(|n| is_name(n))
        {
            out.push(Piece::Slot(name));
            rest = &tail[name.len() + 2..];
        } else {
            out.push(Piece::Lit(&tail[..1]));
            rest = &tail[1..];
        }
    }
    out.push(Piece::Lit(rest));
    out
}

/// Placeholder names of a template, sorted.
pub fn placeholders(id: TemplateId) -> BTreeSet<&'static str> {
    pieces(text(id))
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(n) => Some(n),
            Piece::Lit(_) => None,
        })
        .collect()
}

/// Every placeholder must be bound and every variable used.
pub fn render(id: TemplateId, variables: &BTreeMap<String, String>) -> Result<String> {
    let t = text(id);
    let mut out = String::with_capacity(t.len() + variables.values().map(String::len).sum::<usize>());
    let mut used = BTreeSet::new();
    for p in pieces(t) {
        match p {
            Piece::Lit(s) => out.push_str(s),
            Piece::Slot(name) => {
                let v = variables
                    .get(name)
                    .ok_or_else(|| Error::Template(format!("{id}: unbound placeholder {{{name}}}")))?;
                out.push_str(v);
                used.insert(name);
            }
        }
    }
    if let Some(extra) = variables.keys().find(|k| !used.contains(k.as_str())) {
        return Err(Error::Template(format!("{id}: variable {extra:?} has no placeholder")));
    }
    Ok(out)
}
