use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::{NodeId, SdKg};
use crate::error::{Error, Result};

/// Laplace-smoothed multiplicative support of one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prior {
    pub node: NodeId,
    /// `Π (w + 1)` over the query nodes.
    #[serde(serialize_with = "as_decimal")]
    pub support: BigUint,
}

fn as_decimal<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Priors over a candidate set, kept exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorMap {
    /// Ascending by node id.
    pub entries: Vec<Prior>,
    pub total: BigUint,
}

impl PriorMap {
    pub fn get(&self, node: NodeId) -> Option<&Prior> {
        self.entries.binary_search_by_key(&node, |p| p.node).ok().map(|i| &self.entries[i])
    }

    pub fn exact(&self, node: NodeId) -> Option<BigRational> {
        self.get(node).map(|p| BigRational::new(p.support.clone().into(), self.total.clone().into()))
    }

    /// `π(node)` rounded to the nearest f64.
    pub fn probability(&self, node: NodeId) -> Option<f64> {
        self.exact(node).and_then(|r| r.to_f64())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn prior_over(kg: &SdKg, query: &[NodeId], candidates: &[NodeId]) -> Result<PriorMap> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut ids = candidates.to_vec();
    ids.sort();
    ids.dedup();
    let mut total = BigUint::zero();
    let mut entries = Vec::with_capacity(ids.len());
    for c in ids {
        kg.node(c)?;
        let support = query.iter().fold(BigUint::one(), |acc, q| acc * BigUint::from(kg.weight(*q, c) + 1));
        total += &support;
        entries.push(Prior { node: c, support });
    }
    Ok(PriorMap { entries, total })
}

/// `π(v_b) = Π_v (w(v, v_b) + 1) / Σ_{v_b'} Π_v (w(v, v_b') + 1)`.
pub fn behavior_prior(kg: &SdKg, static_nodes: &[NodeId], candidates: &[NodeId]) -> Result<PriorMap> {
    for s in static_nodes {
        kg.node(*s)?;
    }
    prior_over(kg, static_nodes, candidates)
}

/// The same construction with the single behavior node as the query.
pub fn function_prior(kg: &SdKg, behavior: NodeId, candidates: &[NodeId]) -> Result<PriorMap> {
    kg.behavior(behavior)?;
    prior_over(kg, &[behavior], candidates)
}

/// Highest supports first; ties by ascending node id.
pub fn top_k(priors: &PriorMap, k: usize) -> Vec<Prior> {
    let mut sorted = priors.entries.clone();
    sorted.sort_by(|a, b| b.support.cmp(&a.support).then(a.node.cmp(&b.node)));
    sorted.truncate(k);
    sorted
}
