use std::collections::BTreeSet;

use super::ExtractedUnit;
use crate::encoder::vocab::{canonicalize_token, VocabKind};
use crate::method::{builtin, probe_signature, signatures_match, FunctionSpec};
use crate::oracle::parse::parse_dedup;
use crate::oracle::{ask, Oracle, OracleRequest, TemplateId};
use crate::sdkg::{BehaviorTuple, SdKg};

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub units: Vec<ExtractedUnit>,
    pub token_merges: usize,
    pub function_merges: usize,
    /// The dedup answer was unusable; only exact matching was applied.
    pub oracle_skipped: bool,
}

fn token_mut(b: &mut BehaviorTuple, kind: VocabKind) -> &mut String {
    match kind {
        VocabKind::Speed => &mut b.speed,
        VocabKind::Course => &mut b.course,
        VocabKind::Heading => &mut b.heading,
        VocabKind::Intent => &mut b.intent,
    }
}

fn token_of(b: &BehaviorTuple, kind: VocabKind) -> &str {
    match kind {
        VocabKind::Speed => &b.speed,
        VocabKind::Course => &b.course,
        VocabKind::Heading => &b.heading,
        VocabKind::Intent => &b.intent,
    }
}

/// Token canonicalization against the graph vocabularies (exact match
/// after normalization, then oracle-proposed merges among known tokens)
/// followed by probe-equivalence merging of the batch's functions. Merge
/// maps in `kg` are updated; nodes are not touched.
pub fn deredundancy(mut units: Vec<ExtractedUnit>, kg: &mut SdKg, oracle: &dyn Oracle) -> DedupOutcome {
    for u in &mut units {
        for kind in VocabKind::ALL {
            let t = token_mut(&mut u.unit.behavior, kind);
            *t = kg.vocab().get(kind).canonical(&canonicalize_token(t)).to_string();
        }
    }
    let mut fresh: Vec<(VocabKind, BTreeSet<String>)> = Vec::new();
    for kind in VocabKind::ALL {
        let v = kg.vocab().get(kind);
        let new: BTreeSet<String> =
            units.iter().map(|u| token_of(&u.unit.behavior, kind).to_string()).filter(|t| !v.contains(t)).collect();
        if !new.is_empty() {
            fresh.push((kind, new));
        }
    }
    let mut token_merges = 0;
    let mut oracle_skipped = false;
    if !fresh.is_empty() {
        let mut vb = String::new();
        for (kind, new) in &fresh {
            let all: BTreeSet<&str> =
                kg.vocab().get(*kind).tokens.iter().map(String::as_str).chain(new.iter().map(String::as_str)).collect();
            vb.push_str(&format!("{}: {}\n", kind.as_str(), all.into_iter().collect::<Vec<_>>().join(", ")));
        }
        let mut vf = String::new();
        for (i, u) in units.iter().enumerate() {
            let family = builtin::classify(&u.unit.function.spec).unwrap_or("custom");
            vf.push_str(&format!("Candidate_{i}: family={family}; description={}\n", u.unit.function.description));
        }
        let req = OracleRequest::new(TemplateId::Dedup).var("vb_data_text", vb).var("vf_data_text", vf);
        match ask(oracle, &req, parse_dedup) {
            Ok(result) => {
                for (label, groups) in &result.behavior {
                    let Some(kind) = VocabKind::from_label(label) else { continue };
                    let new = fresh.iter().find(|(k, _)| *k == kind).map(|(_, n)| n);
                    let vocab = kg.vocab_mut().get_mut(kind);
                    for g in groups {
                        let primary = canonicalize_token(&g.primary);
                        for r in &g.redundant {
                            let r = canonicalize_token(r);
                            let known = |t: &str| vocab.contains(t) || new.is_some_and(|n| n.contains(t));
                            if known(&primary) && known(&r) && vocab.merge(&primary, &r) {
                                token_merges += 1;
                            }
                        }
                    }
                }
            }
            Err(e) => {
                log::warn!("dedup answer unusable, exact matching only: {e}");
                oracle_skipped = true;
            }
        }
        for u in &mut units {
            u.unit.behavior = kg.vocab().canonical_behavior(&u.unit.behavior);
        }
    }

    let mut reps: Vec<(FunctionSpec, String, Vec<(f64, f64)>)> = Vec::new();
    let mut function_merges = 0;
    for u in &mut units {
        let f = &mut u.unit.function;
        let existing = kg.find_function(&f.spec).ok().flatten().and_then(|id| kg.function(id).ok());
        let (spec, description) = match existing {
            Some((spec, d)) => (spec.clone(), d.to_string()),
            None => {
                let Ok(sig) = probe_signature(&f.spec) else { continue };
                match reps.iter().find(|(_, _, s)| signatures_match(s, &sig)) {
                    Some((spec, d, _)) => (spec.clone(), d.clone()),
                    None => {
                        reps.push((f.spec.clone(), f.description.clone(), sig));
                        continue;
                    }
                }
            }
        };
        if spec.source() != f.spec.source() {
            function_merges += 1;
        }
        f.spec = spec;
        f.description = description;
    }
    DedupOutcome { units, token_merges, function_merges, oracle_skipped }
}
