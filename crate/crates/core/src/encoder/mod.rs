//! Static and spatial encoding plus behavior abstraction: turns a complete
//! segment into the canonical `v_s` and `v_b` parts of a knowledge unit.

mod behavior;
pub mod geofence;
pub mod vocab;

use crate::ais::{AisRecord, MinimalSegment};
use crate::error::{Error, Result};
use crate::sdkg::{format_bin, StaticTuple, DURATION_BIN_WIDTH, DURATION_OPEN_BIN};

pub use behavior::{abstract_behavior, AbstractedBehavior};
pub use geofence::{
    lookup_context, ContextSource, GeofenceIndex, OverpassSource, DEFAULT_CONTEXT_PRIORITY, OPEN_WATER,
};

/// `(width, cap)` in meters.
pub const DRAUGHT_BINS: (u32, u32) = (2, 12);
pub const LENGTH_BINS: (u32, u32) = (50, 300);
pub const WIDTH_BINS: (u32, u32) = (5, 30);

/// Half-open bin of a nonnegative value: `[a, a+width)` below `cap`,
/// `[cap, inf)` from it on.
pub fn bin_label(value: f64, (width, cap): (u32, u32)) -> Result<String> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter(format!("cannot bin {value}")));
    }
    if value >= cap as f64 {
        return Ok(format_bin(cap, None));
    }
    let lo = (value / width as f64).floor() as u32 * width;
    Ok(format_bin(lo, Some(lo + width)))
}

/// Lowercase, trimmed, single-spaced.
pub fn normalize_static(value: &str) -> String {
    value.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn normalize_vessel_id(value: &str) -> String {
    value.split_whitespace().collect::<Vec<_>>().join("_")
}

/// Most frequent value; ties go to the value seen first.
pub fn mode<T: PartialEq + Clone>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut counts: Vec<(T, usize)> = Vec::new();
    for v in values {
        match counts.iter_mut().find(|(x, _)| *x == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    let best = counts.iter().map(|(_, c)| *c).max()?;
    counts.into_iter().find(|(_, c)| *c == best).map(|(v, _)| v)
}

fn incomplete(segment: &MinimalSegment) -> Error {
    Error::IncompleteSegment { vessel_id: segment.vessel_id.clone(), segment_index: segment.index }
}

fn field<T: Clone>(segment: &MinimalSegment, get: impl Fn(&AisRecord) -> Option<T>) -> Result<Vec<T>> {
    segment.records.iter().map(|r| get(r).ok_or_else(|| incomplete(segment))).collect()
}

fn modal_bin(segment: &MinimalSegment, get: impl Fn(&AisRecord) -> Option<f64>, bins: (u32, u32)) -> Result<String> {
    let labels = field(segment, get)?.into_iter().map(|v| bin_label(v, bins)).collect::<Result<Vec<_>>>()?;
    mode(labels).ok_or_else(|| incomplete(segment))
}

fn modal_text(segment: &MinimalSegment, get: impl Fn(&AisRecord) -> Option<&String>) -> Result<String> {
    let values = field(segment, |r| get(r).map(|s| normalize_static(s)))?;
    match mode(values) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(incomplete(segment)),
    }
}

/// `v_s` of a complete segment.
pub fn encode_static(segment: &MinimalSegment, context: &dyn ContextSource) -> Result<StaticTuple> {
    if segment.is_empty() || !segment.is_complete() {
        return Err(incomplete(segment));
    }
    let vessel_id = mode(segment.records.iter().map(|r| normalize_vessel_id(&r.vessel_id)))
        .filter(|v| !v.is_empty())
        .ok_or_else(|| incomplete(segment))?;
    let contexts = segment
        .records
        .iter()
        .map(|r| {
            let (lat, lon) = r.position().ok_or_else(|| incomplete(segment))?;
            context.category(lat, lon)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StaticTuple {
        vessel_id,
        nav_status: modal_text(segment, |r| r.nav_status.as_ref())?,
        cargo_type: modal_text(segment, |r| r.cargo_type.as_ref())?,
        draught_bin: modal_bin(segment, |r| r.draught, DRAUGHT_BINS)?,
        length_bin: modal_bin(segment, |r| r.length, LENGTH_BINS)?,
        width_bin: modal_bin(segment, |r| r.width, WIDTH_BINS)?,
        ship_type: modal_text(segment, |r| r.ship_type.as_ref())?,
        spatial_context: mode(contexts).ok_or_else(|| incomplete(segment))?,
    })
}

/// Lower bound of the 50 s duration bin; 3600 stands for `[3600, inf)`.
pub fn duration_token(segment: &MinimalSegment) -> Result<u32> {
    if segment.len() < 2 {
        return Err(Error::InvalidParameter("duration needs at least two records".into()));
    }
    Ok(duration_bin_of(segment.time_span()))
}

pub fn duration_bin_of(span_seconds: i64) -> u32 {
    let span = span_seconds.max(0);
    if span >= DURATION_OPEN_BIN as i64 {
        DURATION_OPEN_BIN
    } else {
        (span as u32 / DURATION_BIN_WIDTH) * DURATION_BIN_WIDTH
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::{generate_synthetic_track, partition, SyntheticParams, TrackKind};

    fn segment() -> MinimalSegment {
        let seq = generate_synthetic_track(TrackKind::ConstantVelocity, 20, &SyntheticParams::default()).unwrap();
        partition(&seq, 20).unwrap().segments.remove(0)
    }

    #[test]
    fn bins() {
        assert_eq!(bin_label(5.3, DRAUGHT_BINS).unwrap(), "[4,6)");
        assert_eq!(bin_label(6.0, DRAUGHT_BINS).unwrap(), "[6,8)");
        assert_eq!(bin_label(12.0, DRAUGHT_BINS).unwrap(), "[12,inf)");
        assert_eq!(bin_label(300.0, LENGTH_BINS).unwrap(), "[300,inf)");
        assert_eq!(bin_label(299.9, LENGTH_BINS).unwrap(), "[250,300)");
        assert_eq!(bin_label(0.0, WIDTH_BINS).unwrap(), "[0,5)");
        assert!(bin_label(-1.0, WIDTH_BINS).is_err());
    }

    #[test]
    fn mode_prefers_earliest_on_tie() {
        assert_eq!(mode(["b", "a", "a", "b", "c"]), Some("b"));
        assert_eq!(mode(["c", "a", "a"]), Some("a"));
        assert_eq!(mode(Vec::<u8>::new()), None);
    }

    #[test]
    fn durations() {
        assert_eq!(duration_bin_of(1320), 1300);
        assert_eq!(duration_bin_of(49), 0);
        assert_eq!(duration_bin_of(3599), 3550);
        assert_eq!(duration_bin_of(3600), DURATION_OPEN_BIN);
        let mut s = segment();
        assert_eq!(duration_token(&s).unwrap(), 1100);
        s.records.truncate(1);
        assert!(matches!(duration_token(&s), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn static_tuple_of_synthetic_segment() {
        let s = segment();
        let v = encode_static(&s, &GeofenceIndex::empty()).unwrap();
        assert_eq!(v.nav_status, "under way using engine");
        assert_eq!(v.ship_type, "cargo");
        assert_eq!(v.draught_bin, "[4,6)");
        assert_eq!(v.spatial_context, OPEN_WATER);
        let mut bad = s.clone();
        bad.records[3].ship_type = None;
        assert!(matches!(encode_static(&bad, &GeofenceIndex::empty()), Err(Error::IncompleteSegment { .. })));
    }

    #[test]
    fn discrete_fields_use_mode() {
        let mut s = segment();
        for r in s.records.iter_mut().take(11) {
            r.nav_status = Some("Moored".into());
        }
        assert_eq!(encode_static(&s, &GeofenceIndex::empty()).unwrap().nav_status, "moored");
    }
}
