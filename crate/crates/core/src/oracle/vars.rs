//! Text encodings of prompt variables. Producers in the pipeline and the
//! stub oracle both go through these, so the stub can read what it is sent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ais::AisRecord;
use crate::sdkg::BehaviorTuple;

pub const TRAJECTORY_HEADER: [&str; 13] = [
    "timestamp",
    "lat",
    "lon",
    "sog",
    "cog",
    "heading",
    "nav_status",
    "cargo_type",
    "draught",
    "length",
    "width",
    "ship_type",
    "spatial_context",
];

/// One row of `trajectory_data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub timestamp: i64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub sog: Option<f64>,
    pub cog: Option<f64>,
    pub heading: Option<f64>,
    pub nav_status: Option<String>,
    pub cargo_type: Option<String>,
    pub draught: Option<f64>,
    pub length: Option<f64>,
    pub width: Option<f64>,
    pub ship_type: Option<String>,
    pub spatial_context: Option<String>,
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with [`TRAJECTORY_HEADER`].
pub fn trajectory_data(records: &[AisRecord], spatial_context: &str) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(TRAJECTORY_HEADER);
    for r in records {
        let _ = w.write_record([
            r.timestamp.to_string(),
            num(r.lat),
            num(r.lon),
            num(r.speed),
            num(r.course),
            num(r.heading),
            r.nav_status.clone().unwrap_or_default(),
            r.cargo_type.clone().unwrap_or_default(),
            num(r.draught),
            num(r.length),
            num(r.width),
            r.ship_type.clone().unwrap_or_default(),
            spatial_context.to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Rows that do not deserialize are skipped.
pub fn parse_trajectory(text: &str) -> Vec<TrajectoryRow> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().filter_map(|r| r.ok()).collect()
}

pub fn behavior_text(b: &BehaviorTuple) -> String {
    b.to_string()
}

/// `k=v; k=v` pairs.
pub fn parse_kv(text: &str) -> BTreeMap<String, String> {
    text.split(';')
        .filter_map(|p| p.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// `before: ...` and `after: ...` lines.
pub fn boundary_text(before: Option<&BehaviorTuple>, after: Option<&BehaviorTuple>) -> String {
    let side = |b: Option<&BehaviorTuple>| b.map_or("absent".to_string(), behavior_text);
    format!("before: {}\nafter: {}", side(before), side(after))
}

/// Lines `name: value`, grouped by name.
pub fn parse_attribute_lines(text: &str) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.trim().split_once(':') {
            let v = v.trim();
            if !k.contains(' ') && !v.is_empty() {
                out.entry(k.to_string()).or_default().push(v.to_string());
            }
        }
    }
    out
}

/// Candidate lines `Name_N: k=v; k=v` with their pairs; indented lines are
/// ignored.
pub fn candidate_lines(text: &str) -> Vec<(String, BTreeMap<String, String>)> {
    text.lines()
        .filter(|l| !l.starts_with(char::is_whitespace))
        .filter_map(|l| l.split_once(": "))
        .filter(|(id, _)| !id.is_empty() && !id.contains(' ') && id.ends_with(|c: char| c.is_ascii_digit()))
        .map(|(id, rest)| (id.to_string(), parse_kv(rest)))
        .collect()
}

/// `(src, dst, weight)` of every `a -> b [label="w=N"]` line.
pub fn parse_dot_edges(dot: &str) -> Vec<(String, String, u64)> {
    dot.lines()
        .filter_map(|l| {
            let (lhs, attrs) = l.trim().split_once('[')?;
            let (src, dst) = lhs.split_once("->")?;
            let w = attrs.split_once("w=")?.1.split(|c: char| !c.is_ascii_digit()).next()?.parse().ok()?;
            Some((src.trim().to_string(), dst.trim().to_string(), w))
        })
        .collect()
}

pub fn feedback_text(rejected: &[(usize, f64, f64, f64)], threshold: f64) -> String {
    if rejected.is_empty() {
        return String::new();
    }
    let mut out = format!(
        "[FEEDBACK]\nRejected attempts: {}\nThe fitting error e(f) = (MAE_lat + MAE_lon) / 2 must not exceed {threshold:e} degrees.\n",
        rejected.len()
    );
    for (attempt, e_f, mae_lat, mae_lon) in rejected {
        out.push_str(&format!("- attempt {attempt}: e(f) = {e_f:e}, MAE_lat = {mae_lat:e}, MAE_lon = {mae_lon:e}\n"));
    }
    out.push_str("Propose a different function that better matches the trajectory.");
    out
}

pub fn parse_rejected(text: &str) -> usize {
    text.lines()
        .find_map(|l| l.trim().strip_prefix("Rejected attempts:"))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Numeric suffix of a node reference such as `Movement_Pattern_3`, `<3>`
/// or `ID: 3`.
pub fn node_number(reference: &str) -> Option<u64> {
    let r = reference.trim().trim_matches(['<', '>', '"', '\'', '`', '*', '.', ' ']);
    let digits: String = r.chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let prefix = &r[..r.len() - digits.len()];
    let ok = prefix.is_empty()
        || ["Movement_Pattern_", "Function_", "Vessel_"].iter().any(|p| prefix.eq_ignore_ascii_case(p));
    if !ok {
        return None;
    }
    digits.chars().rev().collect::<String>().parse().ok()
}
