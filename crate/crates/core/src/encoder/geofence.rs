use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};

pub const OPEN_WATER: &str = "open-water";

pub const DEFAULT_CONTEXT_PRIORITY: [&str; 4] = ["traffic-separation-scheme", "port", "anchorage", "shipping-lane"];

/// Maps a position to a spatial context category `σ`.
pub trait ContextSource: Send + Sync {
    fn category(&self, lat: f64, lon: f64) -> Result<String>;
}

pub fn lookup_context(lat: f64, lon: f64, source: &dyn ContextSource) -> Result<String> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::InvalidParameter(format!("position ({lat}, {lon}) out of range")));
    }
    source.category(lat, lon)
}

/// Rings are `(lon, lat)` pairs as in GeoJSON.
#[derive(Debug, Clone)]
struct Polygon {
    exterior: Vec<(f64, f64)>,
    holes: Vec<Vec<(f64, f64)>>,
    bbox: (f64, f64, f64, f64),
}

impl Polygon {
    fn new(exterior: Vec<(f64, f64)>, holes: Vec<Vec<(f64, f64)>>) -> Self {
        let mut bbox = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &exterior {
            bbox = (bbox.0.min(x), bbox.1.min(y), bbox.2.max(x), bbox.3.max(y));
        }
        Polygon { exterior, holes, bbox }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bbox;
        if x < x0 || x > x1 || y < y0 || y > y1 {
            return false;
        }
        ring_contains(&self.exterior, x, y) && !self.holes.iter().any(|h| ring_contains(h, x, y))
    }
}

/// Even-odd ray casting.
fn ring_contains(ring: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone)]
struct Fence {
    rank: usize,
    category: String,
    polygons: Vec<Polygon>,
}

/// Offline geofence lookup from a GeoJSON FeatureCollection whose
/// features carry `properties.category`.
#[derive(Debug, Clone, Default)]
pub struct GeofenceIndex {
    priority: Vec<String>,
    fences: Vec<Fence>,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(format!("geofence: {}", msg.into()))
}

fn parse_ring(v: &Value) -> Result<Vec<(f64, f64)>> {
    let pts = v.as_array().ok_or_else(|| config("ring is not an array"))?;
    let ring = pts
        .iter()
        .map(|p| match p.as_array().map(|a| a.as_slice()) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err(config("non-numeric coordinate")),
            },
            _ => Err(config("coordinate is not a pair")),
        })
        .collect::<Result<Vec<_>>>()?;
    if ring.len() < 3 {
        return Err(config("ring has fewer than three points"));
    }
    Ok(ring)
}

fn parse_polygon(v: &Value) -> Result<Polygon> {
    let rings = v.as_array().ok_or_else(|| config("polygon is not an array of rings"))?;
    let mut rings = rings.iter().map(parse_ring).collect::<Result<Vec<_>>>()?.into_iter();
    let exterior = rings.next().ok_or_else(|| config("polygon without rings"))?;
    Ok(Polygon::new(exterior, rings.collect()))
}

fn parse_geometry(g: &Value) -> Result<Vec<Polygon>> {
    let coords = &g["coordinates"];
    match g["type"].as_str() {
        Some("Polygon") => Ok(vec![parse_polygon(coords)?]),
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or_else(|| config("MultiPolygon coordinates are not an array"))?
            .iter()
            .map(parse_polygon)
            .collect(),
        other => Err(config(format!("unsupported geometry type {other:?}"))),
    }
}

impl GeofenceIndex {
    /// No fences: every position is open water.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_geojson(text: &str, priority: &[String]) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| config(e.to_string()))?;
        if doc["type"].as_str() != Some("FeatureCollection") {
            return Err(config("expected a FeatureCollection"));
        }
        let features = doc["features"].as_array().ok_or_else(|| config("missing features"))?;
        let mut fences = Vec::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            let category = f["properties"]["category"]
                .as_str()
                .ok_or_else(|| config(format!("feature {i} has no properties.category")))?;
            let rank = priority
                .iter()
                .position(|p| p == category)
                .ok_or_else(|| config(format!("feature {i} category {category:?} is not in the priority list")))?;
            fences.push(Fence { rank, category: category.to_string(), polygons: parse_geometry(&f["geometry"])? });
        }
        // Stable: equal ranks keep file order.
        fences.sort_by_key(|f| f.rank);
        Ok(GeofenceIndex { priority: priority.to_vec(), fences })
    }

    pub fn load(path: &Path, priority: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_geojson(&text, priority)
    }

    pub fn priority(&self) -> &[String] {
        &self.priority
    }

    pub fn lookup(&self, lat: f64, lon: f64) -> &str {
        self.fences
            .iter()
            .find(|f| f.polygons.iter().any(|p| p.contains(lon, lat)))
            .map_or(OPEN_WATER, |f| f.category.as_str())
    }
}

impl ContextSource for GeofenceIndex {
    fn category(&self, lat: f64, lon: f64) -> Result<String> {
        Ok(self.lookup(lat, lon).to_string())
    }
}

/// Online lookup through an Overpass endpoint. Answers are cached on a
/// 1e-3 degree grid.
pub struct OverpassSource {
    url: String,
    priority: Vec<String>,
    client: reqwest::blocking::Client,
    cache: Mutex<HashMap<(i64, i64), String>>,
}

impl OverpassSource {
    pub fn new(url: impl Into<String>, priority: &[String], timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("overpass client: {e}")))?;
        Ok(OverpassSource { url: url.into(), priority: priority.to_vec(), client, cache: Mutex::new(HashMap::new()) })
    }

    fn query(&self, lat: f64, lon: f64) -> Result<Value> {
        let q = format!(
            "[out:json][timeout:10];(is_in({lat},{lon});way(around:200,{lat},{lon})[\"seamark:type\"];\
             way(around:200,{lat},{lon})[harbour];);out tags;"
        );
        let resp = self.client.post(&self.url).form(&[("data", q)]).send().map_err(|e| {
            if e.is_timeout() {
                Error::OracleTimeout(format!("overpass: {e}"))
            } else {
                Error::OracleUnavailable(format!("overpass: {e}"))
            }
        })?;
        if !resp.status().is_success() {
            return Err(Error::OracleUnavailable(format!("overpass returned {}", resp.status())));
        }
        resp.json().map_err(|e| Error::OracleUnavailable(format!("overpass body: {e}")))
    }
}

/// Category implied by one OSM element's tags.
pub fn category_of_tags(tags: &serde_json::Map<String, Value>) -> Option<&'static str> {
    let tag = |k: &str| tags.get(k).and_then(Value::as_str);
    match tag("seamark:type") {
        Some(t) if t.starts_with("separation_") => return Some("traffic-separation-scheme"),
        Some("anchorage" | "anchor_berth") => return Some("anchorage"),
        Some("harbour" | "harbour_basin") => return Some("port"),
        Some("fairway" | "recommended_track" | "navigation_line") => return Some("shipping-lane"),
        _ => {}
    }
    if tag("harbour").is_some() || tag("landuse") == Some("port") || tag("industrial") == Some("port") {
        return Some("port");
    }
    None
}

impl ContextSource for OverpassSource {
    fn category(&self, lat: f64, lon: f64) -> Result<String> {
        let key = ((lat * 1000.0).round() as i64, (lon * 1000.0).round() as i64);
        if let Some(c) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(c.clone());
        }
        let doc = self.query(lat, lon)?;
        let found: Vec<&str> = doc["elements"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|e| e["tags"].as_object().and_then(category_of_tags))
            .collect();
        let category = self
            .priority
            .iter()
            .find(|p| found.contains(&p.as_str()))
            .cloned()
            .unwrap_or_else(|| OPEN_WATER.to_string());
        self.cache.lock().expect("cache lock").insert(key, category.clone());
        Ok(category)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn priority() -> Vec<String> {
        DEFAULT_CONTEXT_PRIORITY.iter().map(|s| s.to_string()).collect()
    }

    fn square(category: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> String {
        format!(
            r#"{{"type":"Feature","properties":{{"category":"{category}"}},"geometry":{{"type":"Polygon",
            "coordinates":[[[{x0},{y0}],[{x1},{y0}],[{x1},{y1}],[{x0},{y1}],[{x0},{y0}]]]}}}}"#
        )
    }

    fn collection(features: &[String]) -> String {
        format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, features.join(","))
    }

    #[test]
    fn containment_and_default() {
        let g = GeofenceIndex::from_geojson(&collection(&[square("anchorage", 10.0, 55.0, 10.2, 55.1)]), &priority())
            .unwrap();
        assert_eq!(g.lookup(55.05, 10.1), "anchorage");
        assert_eq!(g.lookup(56.0, 10.1), OPEN_WATER);
    }

    #[test]
    fn priority_resolves_overlap() {
        // Port listed first in the file; the scheme still wins.
        let text =
            collection(&[square("port", 0.0, 0.0, 2.0, 2.0), square("traffic-separation-scheme", 1.0, 1.0, 3.0, 3.0)]);
        let g = GeofenceIndex::from_geojson(&text, &priority()).unwrap();
        assert_eq!(g.lookup(1.5, 1.5), "traffic-separation-scheme");
        assert_eq!(g.lookup(0.5, 0.5), "port");
    }

    #[test]
    fn holes_are_excluded() {
        let text = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"category":"port"},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[4,0],[4,4],[0,4],[0,0]],[[1,1],[3,1],[3,3],[1,3],[1,1]]]}}]}"#;
        let g = GeofenceIndex::from_geojson(text, &priority()).unwrap();
        assert_eq!(g.lookup(0.5, 0.5), "port");
        assert_eq!(g.lookup(2.0, 2.0), OPEN_WATER);
    }

    #[test]
    fn unknown_category_and_bad_file_are_config_errors() {
        let text = collection(&[square("lagoon", 0.0, 0.0, 1.0, 1.0)]);
        assert!(matches!(GeofenceIndex::from_geojson(&text, &priority()), Err(Error::Config(_))));
        assert!(matches!(
            GeofenceIndex::load(Path::new("/nonexistent/fences.geojson"), &priority()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn osm_tag_mapping() {
        let tags = |k: &str, v: &str| serde_json::json!({ k: v }).as_object().unwrap().clone();
        assert_eq!(category_of_tags(&tags("seamark:type", "separation_lane")), Some("traffic-separation-scheme"));
        assert_eq!(category_of_tags(&tags("seamark:type", "anchorage")), Some("anchorage"));
        assert_eq!(category_of_tags(&tags("landuse", "port")), Some("port"));
        assert_eq!(category_of_tags(&tags("natural", "water")), None);
    }

    #[test]
    fn unreachable_overpass_is_retryable() {
        let src = OverpassSource::new("http://127.0.0.1:9/api", &priority(), Duration::from_millis(500)).unwrap();
        let err = src.category(55.0, 10.0).unwrap_err();
        assert!(err.is_retryable(), "{err:?}");
    }
}
