//! The structured-data knowledge graph: static attribute, behavior and
//! function nodes joined by co-occurrence counts.

mod dot;
mod prior;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::encoder::vocab::{is_canonical_token, Vocabularies};
use crate::error::{Error, Result};
use crate::method::{probe_signature, signatures_match, FunctionSpec};

pub use dot::{name_in, node_name, resolve_nodes, to_dot};
pub use prior::{behavior_prior, function_prior, top_k, Prior, PriorMap};
pub use snapshot::{load, save, CanonicalGraph, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticKind {
    VesselId,
    NavStatus,
    CargoType,
    DraughtBin,
    LengthBin,
    WidthBin,
    ShipType,
    SpatialContext,
}

impl StaticKind {
    pub const ALL: [StaticKind; 8] = [
        StaticKind::VesselId,
        StaticKind::NavStatus,
        StaticKind::CargoType,
        StaticKind::DraughtBin,
        StaticKind::LengthBin,
        StaticKind::WidthBin,
        StaticKind::ShipType,
        StaticKind::SpatialContext,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StaticKind::VesselId => "vessel_id",
            StaticKind::NavStatus => "nav_status",
            StaticKind::CargoType => "cargo_type",
            StaticKind::DraughtBin => "draught_bin",
            StaticKind::LengthBin => "length_bin",
            StaticKind::WidthBin => "width_bin",
            StaticKind::ShipType => "ship_type",
            StaticKind::SpatialContext => "spatial_context",
        }
    }

    fn is_bin(self) -> bool {
        matches!(self, StaticKind::DraughtBin | StaticKind::LengthBin | StaticKind::WidthBin)
    }
}

/// `v_s`: one canonical value per static attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StaticTuple {
    pub vessel_id: String,
    pub nav_status: String,
    pub cargo_type: String,
    pub draught_bin: String,
    pub length_bin: String,
    pub width_bin: String,
    pub ship_type: String,
    pub spatial_context: String,
}

impl StaticTuple {
    pub fn members(&self) -> [(StaticKind, &str); 8] {
        [
            (StaticKind::VesselId, &self.vessel_id),
            (StaticKind::NavStatus, &self.nav_status),
            (StaticKind::CargoType, &self.cargo_type),
            (StaticKind::DraughtBin, &self.draught_bin),
            (StaticKind::LengthBin, &self.length_bin),
            (StaticKind::WidthBin, &self.width_bin),
            (StaticKind::ShipType, &self.ship_type),
            (StaticKind::SpatialContext, &self.spatial_context),
        ]
    }
}

/// Sentinel lower bound of the open-ended duration bin.
pub const DURATION_OPEN_BIN: u32 = 3600;
pub const DURATION_BIN_WIDTH: u32 = 50;

/// `v_b`: kinematic tokens, intent and a 50 s duration bin keyed by its
/// lower bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BehaviorTuple {
    pub speed: String,
    pub course: String,
    pub heading: String,
    pub intent: String,
    pub duration_bin: u32,
}

impl BehaviorTuple {
    pub fn duration_label(&self) -> String {
        if self.duration_bin >= DURATION_OPEN_BIN {
            format!("[{DURATION_OPEN_BIN},inf)")
        } else {
            format!("[{},{})", self.duration_bin, self.duration_bin + DURATION_BIN_WIDTH)
        }
    }

    pub fn tokens(&self) -> [&str; 4] {
        [&self.speed, &self.course, &self.heading, &self.intent]
    }
}

impl fmt::Display for BehaviorTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "speed={}; course={}; heading={}; intent={}; duration={}",
            self.speed,
            self.course,
            self.heading,
            self.intent,
            self.duration_label()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeData {
    Static { kind: StaticKind, value: String },
    Behavior { behavior: BehaviorTuple },
    Function { spec: FunctionSpec, description: String },
}

impl NodeData {
    pub fn label(&self) -> String {
        match self {
            NodeData::Static { kind, value } => format!("{}: {value}", kind.as_str()),
            NodeData::Behavior { behavior } => behavior.to_string(),
            NodeData::Function { spec, .. } => spec.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(flatten)]
    pub data: NodeData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    StaticBehavior,
    BehaviorFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: u64,
    pub kind: EdgeKind,
}

/// The function part of a knowledge unit before it is resolved to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitFunction {
    pub spec: FunctionSpec,
    pub description: String,
}

/// `(v_s, v_b, v_f)` distilled from one complete segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeUnit {
    pub vessel_id: String,
    pub segment_index: usize,
    pub statics: StaticTuple,
    pub behavior: BehaviorTuple,
    pub function: UnitFunction,
}

/// A unit after commit, referring to graph nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommittedUnit {
    pub vessel_id: String,
    pub segment_index: usize,
    /// One node per static attribute, in [`StaticKind::ALL`] order.
    pub statics: Vec<NodeId>,
    pub behavior: NodeId,
    pub function: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpsertReceipt {
    pub statics: Vec<NodeId>,
    pub behavior: NodeId,
    pub function: NodeId,
    pub revision: u64,
}

/// The graph. Mutation takes `&mut self`; callers that share a graph
/// across threads funnel commits through one writer.
#[derive(Debug, Clone, Default)]
pub struct SdKg {
    nodes: BTreeMap<NodeId, NodeData>,
    edges: BTreeMap<(NodeId, NodeId), u64>,
    revision: u64,
    next_id: u64,
    vocab: Vocabularies,
    units: BTreeMap<(String, usize), CommittedUnit>,
    static_index: HashMap<(StaticKind, String), NodeId>,
    behavior_index: HashMap<BehaviorTuple, NodeId>,
    function_index: HashMap<String, NodeId>,
    function_probes: Vec<(NodeId, Vec<(f64, f64)>)>,
}

impl PartialEq for SdKg {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.revision == other.revision
            && self.next_id == other.next_id
            && self.vocab == other.vocab
            && self.units == other.units
    }
}

fn check_static_value(kind: StaticKind, value: &str) -> Result<()> {
    let ok = if kind.is_bin() {
        parse_bin(value).is_some()
    } else if kind == StaticKind::VesselId {
        !value.is_empty() && value.trim() == value && !value.contains(char::is_whitespace)
    } else {
        !value.is_empty()
            && value.trim() == value
            && !value.contains("  ")
            && !value.chars().any(|c| c.is_uppercase() || c.is_control())
    };
    if ok {
        Ok(())
    } else {
        Err(Error::NotCanonical(format!("{}={value}", kind.as_str())))
    }
}

/// Parses `[a,b)` or `[a,inf)`.
pub fn parse_bin(s: &str) -> Option<(u32, Option<u32>)> {
    let inner = s.strip_prefix('[')?.strip_suffix(')')?;
    let (lo, hi) = inner.split_once(',')?;
    let lo: u32 = lo.parse().ok()?;
    let hi = if hi == "inf" { None } else { Some(hi.parse::<u32>().ok()?) };
    if hi.is_some_and(|h| h <= lo) {
        return None;
    }
    (format_bin(lo, hi) == s).then_some((lo, hi))
}

pub fn format_bin(lo: u32, hi: Option<u32>) -> String {
    match hi {
        Some(hi) => format!("[{lo},{hi})"),
        None => format!("[{lo},inf)"),
    }
}

fn check_behavior(b: &BehaviorTuple) -> Result<()> {
    for t in b.tokens() {
        if !is_canonical_token(t) {
            return Err(Error::NotCanonical(t.to_string()));
        }
    }
    if b.duration_bin > DURATION_OPEN_BIN
        || (b.duration_bin < DURATION_OPEN_BIN && !b.duration_bin.is_multiple_of(DURATION_BIN_WIDTH))
    {
        return Err(Error::NotCanonical(format!("duration bin {}", b.duration_bin)));
    }
    Ok(())
}

impl SdKg {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeData> {
        self.nodes.get(&id).ok_or(Error::UnknownNode(id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeData)> {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(&(src, dst), &weight)| Edge { src, dst, weight, kind: self.edge_kind(src) })
    }

    fn edge_kind(&self, src: NodeId) -> EdgeKind {
        match self.nodes.get(&src) {
            Some(NodeData::Behavior { .. }) => EdgeKind::BehaviorFunction,
            _ => EdgeKind::StaticBehavior,
        }
    }

    /// Weight of `src -> dst`, 0 when absent.
    pub fn weight(&self, src: NodeId, dst: NodeId) -> u64 {
        self.edges.get(&(src, dst)).copied().unwrap_or(0)
    }

    pub fn vocab(&self) -> &Vocabularies {
        &self.vocab
    }

    pub fn vocab_mut(&mut self) -> &mut Vocabularies {
        &mut self.vocab
    }

    pub fn units(&self) -> impl Iterator<Item = &CommittedUnit> {
        self.units.values()
    }

    pub fn unit(&self, vessel_id: &str, segment_index: usize) -> Option<&CommittedUnit> {
        self.units.get(&(vessel_id.to_string(), segment_index))
    }

    pub fn static_node(&self, kind: StaticKind, value: &str) -> Option<NodeId> {
        self.static_index.get(&(kind, value.to_string())).copied()
    }

    pub fn behavior_node(&self, b: &BehaviorTuple) -> Option<NodeId> {
        self.behavior_index.get(b).copied()
    }

    pub fn behavior(&self, id: NodeId) -> Result<&BehaviorTuple> {
        match self.node(id)? {
            NodeData::Behavior { behavior } => Ok(behavior),
            _ => Err(Error::UnknownNode(id)),
        }
    }

    pub fn function(&self, id: NodeId) -> Result<(&FunctionSpec, &str)> {
        match self.node(id)? {
            NodeData::Function { spec, description } => Ok((spec, description)),
            _ => Err(Error::UnknownNode(id)),
        }
    }

    pub fn function_nodes(&self) -> impl Iterator<Item = (NodeId, &FunctionSpec, &str)> {
        self.nodes.iter().filter_map(|(id, d)| match d {
            NodeData::Function { spec, description } => Some((*id, spec, description.as_str())),
            _ => None,
        })
    }

    pub fn behavior_nodes(&self) -> impl Iterator<Item = (NodeId, &BehaviorTuple)> {
        self.nodes.iter().filter_map(|(id, d)| match d {
            NodeData::Behavior { behavior } => Some((*id, behavior)),
            _ => None,
        })
    }

    /// Existing function node equal to `spec` by text or by probes.
    pub fn find_function(&self, spec: &FunctionSpec) -> Result<Option<NodeId>> {
        if let Some(id) = self.function_index.get(spec.source()) {
            return Ok(Some(*id));
        }
        let sig = probe_signature(spec)?;
        Ok(self.function_probes.iter().find(|(_, s)| signatures_match(s, &sig)).map(|(id, _)| *id))
    }

    fn alloc(&mut self, data: NodeData) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.index_node(id, &data);
        self.nodes.insert(id, data);
        id
    }

    fn index_node(&mut self, id: NodeId, data: &NodeData) {
        match data {
            NodeData::Static { kind, value } => {
                self.static_index.insert((*kind, value.clone()), id);
            }
            NodeData::Behavior { behavior } => {
                self.behavior_index.insert(behavior.clone(), id);
            }
            NodeData::Function { spec, .. } => {
                self.function_index.insert(spec.source().to_string(), id);
                if let Ok(sig) = probe_signature(spec) {
                    self.function_probes.push((id, sig));
                }
            }
        }
    }

    fn rebuild_indices(&mut self) {
        self.static_index.clear();
        self.behavior_index.clear();
        self.function_index.clear();
        self.function_probes.clear();
        let nodes = std::mem::take(&mut self.nodes);
        for (id, data) in &nodes {
            self.index_node(*id, data);
        }
        self.nodes = nodes;
    }

    pub fn intern_static(&mut self, kind: StaticKind, value: &str) -> Result<NodeId> {
        check_static_value(kind, value)?;
        Ok(match self.static_node(kind, value) {
            Some(id) => id,
            None => self.alloc(NodeData::Static { kind, value: value.to_string() }),
        })
    }

    pub fn intern_behavior(&mut self, b: &BehaviorTuple) -> Result<NodeId> {
        check_behavior(b)?;
        Ok(match self.behavior_node(b) {
            Some(id) => id,
            None => self.alloc(NodeData::Behavior { behavior: b.clone() }),
        })
    }

    /// Returns the node of an equivalent function, inserting `spec` when
    /// none exists. Existing descriptions are kept.
    pub fn intern_function(&mut self, spec: &FunctionSpec, description: &str) -> Result<NodeId> {
        if let Some(id) = self.find_function(spec)? {
            return Ok(id);
        }
        if description.trim().is_empty() {
            return Err(Error::InvalidInput(format!("function {:?} has no description", spec.name())));
        }
        Ok(self.alloc(NodeData::Function { spec: spec.clone(), description: description.to_string() }))
    }

    fn validate_unit(&self, unit: &KnowledgeUnit) -> Result<()> {
        for (kind, value) in unit.statics.members() {
            check_static_value(kind, value)?;
        }
        check_behavior(&unit.behavior)
    }

    /// Inserts missing nodes, increments every static→behavior and the
    /// behavior→function edge by one, and bumps the revision once.
    pub fn upsert_unit(&mut self, unit: &KnowledgeUnit) -> Result<UpsertReceipt> {
        self.validate_unit(unit)?;
        let statics =
            unit.statics.members().iter().map(|(k, v)| self.intern_static(*k, v)).collect::<Result<Vec<_>>>()?;
        let behavior = self.intern_behavior(&unit.behavior)?;
        let function = self.intern_function(&unit.function.spec, &unit.function.description)?;
        for s in &statics {
            *self.edges.entry((*s, behavior)).or_insert(0) += 1;
        }
        *self.edges.entry((behavior, function)).or_insert(0) += 1;
        let [speed, course, heading, intent] = unit.behavior.tokens();
        self.vocab.add_tokens(speed, course, heading, intent);
        self.units.insert(
            (unit.vessel_id.clone(), unit.segment_index),
            CommittedUnit {
                vessel_id: unit.vessel_id.clone(),
                segment_index: unit.segment_index,
                statics: statics.clone(),
                behavior,
                function,
            },
        );
        self.revision += 1;
        Ok(UpsertReceipt { statics, behavior, function, revision: self.revision })
    }

    /// Static node ids used as the prior query set for `units`: the union
    /// of their static members, optionally without the vessel-id node.
    pub fn static_query(&self, units: &[&CommittedUnit], include_vessel_id: bool) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = units
            .iter()
            .flat_map(|u| u.statics.iter().copied())
            .filter(|id| {
                include_vessel_id
                    || !matches!(self.nodes.get(id), Some(NodeData::Static { kind: StaticKind::VesselId, .. }))
            })
            .collect();
        set.into_iter().collect()
    }

    fn require(&self, ids: &[NodeId]) -> Result<()> {
        match ids.iter().find(|id| !self.nodes.contains_key(id)) {
            Some(id) => Err(Error::UnknownNode(*id)),
            None => Ok(()),
        }
    }

    /// Destinations with positive weight from any of `sources`, ascending.
    fn successors(&self, sources: &[NodeId]) -> Result<Vec<NodeId>> {
        self.require(sources)?;
        let mut out = BTreeSet::new();
        for s in sources {
            for ((_, dst), w) in self.edges.range((*s, NodeId(0))..=(*s, NodeId(u64::MAX))) {
                if *w > 0 {
                    out.insert(*dst);
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Behaviors linked to at least one of `static_nodes`.
    pub fn candidate_behaviors(&self, static_nodes: &[NodeId]) -> Result<Vec<NodeId>> {
        self.successors(static_nodes)
    }

    /// Functions linked to `behavior`.
    pub fn candidate_functions(&self, behavior: NodeId) -> Result<Vec<NodeId>> {
        self.behavior(behavior)?;
        self.successors(&[behavior])
    }

    /// The nodes `ids` and every edge with both endpoints among them.
    pub fn induced_subgraph(&self, ids: &[NodeId]) -> Result<Fragment> {
        self.require(ids)?;
        let set: BTreeSet<NodeId> = ids.iter().copied().collect();
        let nodes = set.iter().map(|id| Node { id: *id, data: self.nodes[id].clone() }).collect();
        let edges = self.edges().filter(|e| set.contains(&e.src) && set.contains(&e.dst)).collect();
        Ok(Fragment { nodes, edges })
    }

    pub fn fragment(&self) -> Fragment {
        Fragment {
            nodes: self.nodes.iter().map(|(id, d)| Node { id: *id, data: d.clone() }).collect(),
            edges: self.edges().collect(),
        }
    }

    /// Folds node `drop` into `keep`: weights are summed, unit references
    /// rewritten and `drop` removed. Both must be of the same type.
    pub fn merge_nodes(&mut self, keep: NodeId, drop: NodeId) -> Result<()> {
        if keep == drop {
            return Ok(());
        }
        let same_type = matches!(
            (self.node(keep)?, self.node(drop)?),
            (NodeData::Static { .. }, NodeData::Static { .. })
                | (NodeData::Behavior { .. }, NodeData::Behavior { .. })
                | (NodeData::Function { .. }, NodeData::Function { .. })
        );
        if !same_type {
            return Err(Error::InvalidParameter(format!("cannot merge node {drop} into {keep} of another type")));
        }
        let moved: Vec<((NodeId, NodeId), u64)> =
            self.edges.iter().filter(|((s, d), _)| *s == drop || *d == drop).map(|(k, w)| (*k, *w)).collect();
        for ((s, d), w) in moved {
            self.edges.remove(&(s, d));
            let s = if s == drop { keep } else { s };
            let d = if d == drop { keep } else { d };
            *self.edges.entry((s, d)).or_insert(0) += w;
        }
        for u in self.units.values_mut() {
            for s in u.statics.iter_mut().chain([&mut u.behavior, &mut u.function]) {
                if *s == drop {
                    *s = keep;
                }
            }
        }
        self.nodes.remove(&drop);
        self.rebuild_indices();
        self.revision += 1;
        Ok(())
    }

    /// Rewrites behavior tokens through the vocabulary merge maps, merging
    /// behavior nodes that become identical. Returns the number of nodes
    /// removed.
    pub fn apply_token_merges(&mut self) -> Result<usize> {
        let mut removed = 0;
        let ids: Vec<NodeId> = self.behavior_nodes().map(|(id, _)| id).collect();
        for id in ids {
            let Some(NodeData::Behavior { behavior }) = self.nodes.get(&id) else { continue };
            let canonical = self.vocab.canonical_behavior(behavior);
            if canonical == *behavior {
                continue;
            }
            match self.behavior_node(&canonical) {
                Some(existing) if existing != id => {
                    let (keep, drop) = (existing.min(id), existing.max(id));
                    self.nodes.insert(keep, NodeData::Behavior { behavior: canonical });
                    self.merge_nodes(keep, drop)?;
                    removed += 1;
                }
                _ => {
                    self.nodes.insert(id, NodeData::Behavior { behavior: canonical });
                    self.rebuild_indices();
                    self.revision += 1;
                }
            }
        }
        Ok(removed)
    }

    /// Merges probe-equivalent function nodes into the lowest id of each
    /// class. Returns the number of nodes removed.
    pub fn merge_equivalent_functions(&mut self) -> Result<usize> {
        let mut reps: Vec<(NodeId, Vec<(f64, f64)>)> = Vec::new();
        let mut merges = Vec::new();
        for (id, spec, _) in self.function_nodes() {
            let sig = probe_signature(spec)?;
            match reps.iter().find(|(_, s)| signatures_match(s, &sig)) {
                Some((rep, _)) => merges.push((*rep, id)),
                None => reps.push((id, sig)),
            }
        }
        for (keep, drop) in &merges {
            self.merge_nodes(*keep, *drop)?;
        }
        Ok(merges.len())
    }
}

/// A node subset with the edges among it.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}
