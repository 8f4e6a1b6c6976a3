use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sdkg::BehaviorTuple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VocabKind {
    Speed,
    Course,
    Heading,
    Intent,
}

impl VocabKind {
    pub const ALL: [VocabKind; 4] = [VocabKind::Speed, VocabKind::Course, VocabKind::Heading, VocabKind::Intent];

    pub fn as_str(self) -> &'static str {
        match self {
            VocabKind::Speed => "speed",
            VocabKind::Course => "course",
            VocabKind::Heading => "heading",
            VocabKind::Intent => "intent",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match canonicalize_token(s).as_str() {
            "speed" | "speed pattern" => Some(VocabKind::Speed),
            "course" | "course pattern" => Some(VocabKind::Course),
            "heading" | "heading pattern" => Some(VocabKind::Heading),
            "intent" => Some(VocabKind::Intent),
            _ => None,
        }
    }
}

impl fmt::Display for VocabKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lowercase ASCII letters and digits separated by single spaces.
pub fn is_canonical_token(t: &str) -> bool {
    !t.is_empty()
        && !t.starts_with(' ')
        && !t.ends_with(' ')
        && !t.contains("  ")
        && t.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == ' ')
}

/// Lowercases, turns every other character into a space and collapses runs.
pub fn canonicalize_token(t: &str) -> String {
    t.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// One token family with its merge map.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub tokens: BTreeSet<String>,
    /// Redundant token to the token that replaced it.
    pub merge_map: BTreeMap<String, String>,
    /// Free-text explanations that came with the tokens.
    #[serde(default)]
    pub descriptions: BTreeMap<String, String>,
}

impl Vocabulary {
    pub fn canonical<'a>(&'a self, token: &'a str) -> &'a str {
        self.merge_map.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    /// Adds `token` (after merge-map resolution) and returns the token kept.
    pub fn add(&mut self, token: &str) -> String {
        let t = self.canonical(token).to_string();
        self.tokens.insert(t.clone());
        t
    }

    pub fn describe(&mut self, token: &str, description: &str) {
        if !description.is_empty() && self.tokens.contains(token) {
            self.descriptions.entry(token.to_string()).or_insert_with(|| description.to_string());
        }
    }

    /// Records `redundant → primary`. Chains are collapsed so every target is
    /// a live token. Returns false when nothing changed.
    pub fn merge(&mut self, primary: &str, redundant: &str) -> bool {
        let primary = self.canonical(primary).to_string();
        let redundant = self.canonical(redundant).to_string();
        if primary == redundant || !is_canonical_token(&primary) || !is_canonical_token(&redundant) {
            return false;
        }
        self.tokens.insert(primary.clone());
        self.tokens.remove(&redundant);
        for target in self.merge_map.values_mut() {
            if *target == redundant {
                *target = primary.clone();
            }
        }
        if let Some(d) = self.descriptions.remove(&redundant) {
            self.descriptions.entry(primary.clone()).or_insert(d);
        }
        self.merge_map.insert(redundant, primary);
        true
    }

    /// Prompt rendering: `{"token": "description", ...}` or `{}`.
    pub fn render(&self) -> String {
        let items: Vec<String> = self
            .tokens
            .iter()
            .map(|t| match self.descriptions.get(t) {
                Some(d) => format!("\"{t}\": \"{}\"", d.replace('"', "'")),
                None => format!("\"{t}\": \"\""),
            })
            .collect();
        format!("{{{}}}", items.join(", "))
    }
}

/// `P^s`, `P^θ`, `P^ψ` and `P^i`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub speed: Vocabulary,
    pub course: Vocabulary,
    pub heading: Vocabulary,
    pub intent: Vocabulary,
}

impl Vocabularies {
    pub fn get(&self, kind: VocabKind) -> &Vocabulary {
        match kind {
            VocabKind::Speed => &self.speed,
            VocabKind::Course => &self.course,
            VocabKind::Heading => &self.heading,
            VocabKind::Intent => &self.intent,
        }
    }

    pub fn get_mut(&mut self, kind: VocabKind) -> &mut Vocabulary {
        match kind {
            VocabKind::Speed => &mut self.speed,
            VocabKind::Course => &mut self.course,
            VocabKind::Heading => &mut self.heading,
            VocabKind::Intent => &mut self.intent,
        }
    }

    pub fn add_tokens(&mut self, speed: &str, course: &str, heading: &str, intent: &str) {
        self.speed.add(speed);
        self.course.add(course);
        self.heading.add(heading);
        self.intent.add(intent);
    }

    pub fn canonical_behavior(&self, b: &BehaviorTuple) -> BehaviorTuple {
        BehaviorTuple {
            speed: self.speed.canonical(&b.speed).to_string(),
            course: self.course.canonical(&b.course).to_string(),
            heading: self.heading.canonical(&b.heading).to_string(),
            intent: self.intent.canonical(&b.intent).to_string(),
            duration_bin: b.duration_bin,
        }
    }

    pub fn token_count(&self) -> usize {
        VocabKind::ALL.iter().map(|k| self.get(*k).tokens.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(canonicalize_token("Stable "), "stable");
        assert_eq!(canonicalize_token("  Gradual-Turn,  to port"), "gradual turn to port");
        assert!(is_canonical_token("gradual turn"));
        assert!(!is_canonical_token("Stable"));
        assert!(!is_canonical_token("a  b"));
        assert!(!is_canonical_token(""));
        assert!(!is_canonical_token("turn!"));
    }

    #[test]
    fn merge_keeps_targets_live() {
        let mut v = Vocabulary::default();
        v.add("steady");
        v.add("constant");
        assert!(v.merge("constant", "steady"));
        assert!(v.merge("stable", "constant"));
        assert_eq!(v.canonical("steady"), "stable");
        assert_eq!(v.canonical("constant"), "stable");
        for target in v.merge_map.values() {
            assert!(v.tokens.contains(target));
        }
        assert_eq!(v.tokens.iter().collect::<Vec<_>>(), vec!["stable"]);
        // Reverse merge is a no-op once resolved.
        assert!(!v.merge("steady", "stable"));
        assert_eq!(v.add("steady"), "stable");
    }

    #[test]
    fn render_dicts() {
        let mut v = Vocabulary::default();
        assert_eq!(v.render(), "{}");
        v.add("stable");
        v.describe("stable", "no change");
        v.add("increasing");
        assert_eq!(v.render(), "{\"increasing\": \"\", \"stable\": \"no change\"}");
    }
}
