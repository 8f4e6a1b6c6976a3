use std::fmt::Write;

use super::{Fragment, NodeData, NodeId, SdKg};

/// DOT identifier of a node: `Vessel_<id>` for static attribute nodes,
/// `Movement_Pattern_<id>` for behaviors and `Function_<id>` for functions.
pub fn node_name(id: NodeId, data: &NodeData) -> String {
    match data {
        NodeData::Static { .. } => format!("Vessel_{id}"),
        NodeData::Behavior { .. } => format!("Movement_Pattern_{id}"),
        NodeData::Function { .. } => format!("Function_{id}"),
    }
}

/// DOT name of a node of `kg`, if present.
pub fn name_in(kg: &SdKg, id: NodeId) -> Option<String> {
    kg.node(id).ok().map(|d| node_name(id, d))
}

/// Resolves DOT names or bare numeric ids. Blank entries are skipped.
pub fn resolve_nodes<'a>(kg: &SdKg, refs: impl IntoIterator<Item = &'a str>) -> crate::Result<Vec<NodeId>> {
    let names: std::collections::HashMap<String, NodeId> = kg.nodes().map(|(id, d)| (node_name(id, d), id)).collect();
    let mut ids = Vec::new();
    for r in refs.into_iter().map(str::trim).filter(|r| !r.is_empty()) {
        let id = match names.get(r) {
            Some(id) => *id,
            None => match r.parse() {
                Ok(n) if kg.node(NodeId(n)).is_ok() => NodeId(n),
                _ => return Err(crate::Error::UnknownNodeRef(r.to_string())),
            },
        };
        ids.push(id);
    }
    Ok(ids)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// Serializes a fragment. Nodes appear by ascending id and edges by
/// `(src, dst)`, so equal fragments give identical bytes.
pub fn to_dot(fragment: &Fragment) -> String {
    if fragment.nodes.is_empty() {
        return "digraph sdkg { }\n".to_string();
    }
    let mut nodes = fragment.nodes.iter().collect::<Vec<_>>();
    nodes.sort_by_key(|n| n.id);
    let mut edges = fragment.edges.clone();
    edges.sort_by_key(|e| (e.src, e.dst));

    let names: std::collections::HashMap<NodeId, String> =
        nodes.iter().map(|n| (n.id, node_name(n.id, &n.data))).collect();
    let mut out = String::from("digraph sdkg {\n");
    for n in &nodes {
        let _ = writeln!(out, "  {} [label=\"{}\"];", names[&n.id], escape(&n.data.label()));
    }
    for e in &edges {
        let (Some(src), Some(dst)) = (names.get(&e.src), names.get(&e.dst)) else { continue };
        let _ = writeln!(out, "  {src} -> {dst} [label=\"w={}\"];", e.weight);
    }
    out.push_str("}\n");
    out
}
