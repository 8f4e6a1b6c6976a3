use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CommittedUnit, Edge, EdgeKind, Node, NodeData, SdKg};
use crate::encoder::vocab::Vocabularies;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    schema_version: u32,
    revision: u64,
    next_id: u64,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    vocabularies: Vocabularies,
    #[serde(default)]
    units: Vec<CommittedUnit>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

impl SdKg {
    pub fn to_json(&self) -> Result<String> {
        let snap = Snapshot {
            schema_version: SCHEMA_VERSION,
            revision: self.revision,
            next_id: self.next_id,
            nodes: self.nodes.iter().map(|(id, data)| Node { id: *id, data: data.clone() }).collect(),
            edges: self.edges().collect(),
            vocabularies: self.vocab.clone(),
            units: self.units.values().cloned().collect(),
        };
        Ok(serde_json::to_string_pretty(&snap)?)
    }

    pub fn from_json(text: &str) -> Result<SdKg> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.schema_version != SCHEMA_VERSION {
            return Err(Error::IncompatibleSnapshot { found: probe.schema_version, expected: SCHEMA_VERSION });
        }
        let snap: Snapshot = serde_json::from_str(text)?;
        let mut kg =
            SdKg { revision: snap.revision, next_id: snap.next_id, vocab: snap.vocabularies, ..SdKg::default() };
        for n in snap.nodes {
            if n.id.0 >= kg.next_id {
                return Err(Error::InvalidInput(format!("node id {} not below next_id {}", n.id, kg.next_id)));
            }
            if kg.nodes.insert(n.id, n.data).is_some() {
                return Err(Error::InvalidInput(format!("duplicate node id {}", n.id)));
            }
        }
        for e in snap.edges {
            let (src, dst) = (kg.node(e.src)?, kg.node(e.dst)?);
            let consistent = match e.kind {
                EdgeKind::StaticBehavior => {
                    matches!((src, dst), (NodeData::Static { .. }, NodeData::Behavior { .. }))
                }
                EdgeKind::BehaviorFunction => {
                    matches!((src, dst), (NodeData::Behavior { .. }, NodeData::Function { .. }))
                }
            };
            if !consistent || e.weight == 0 {
                return Err(Error::InvalidInput(format!("bad edge {} -> {}", e.src, e.dst)));
            }
            if kg.edges.insert((e.src, e.dst), e.weight).is_some() {
                return Err(Error::InvalidInput(format!("duplicate edge {} -> {}", e.src, e.dst)));
            }
        }
        for u in snap.units {
            for id in u.statics.iter().chain([&u.behavior, &u.function]) {
                kg.node(*id)?;
            }
            kg.units.insert((u.vessel_id.clone(), u.segment_index), u);
        }
        kg.rebuild_indices();
        Ok(kg)
    }

    /// Content-keyed view that ignores node ids.
    pub fn canonical(&self) -> CanonicalGraph {
        let key = |data: &NodeData| match data {
            NodeData::Static { kind, value } => format!("s:{}={value}", kind.as_str()),
            NodeData::Behavior { behavior } => format!("b:{behavior}"),
            NodeData::Function { spec, .. } => format!("f:{}", spec.source()),
        };
        let keys: BTreeMap<_, _> = self.nodes.iter().map(|(id, d)| (*id, key(d))).collect();
        CanonicalGraph {
            nodes: keys.values().cloned().collect(),
            edges: self.edges.iter().map(|((s, d), w)| ((keys[s].clone(), keys[d].clone()), *w)).collect(),
        }
    }
}

/// Graph structure keyed by node content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), u64>,
}

pub fn save(kg: &SdKg, path: &Path) -> Result<()> {
    std::fs::write(path, kg.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<SdKg> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SdKg::from_json(&text)
}
