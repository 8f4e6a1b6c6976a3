//! AIS records, per-vessel sequences, fixed-length segmentation and
//! observation masks.

mod csv_io;
pub mod synth;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{read_csv, read_csv_from, write_csv, write_csv_to, TimestampFormat};
pub use synth::{generate_synthetic_track, SyntheticParams, TrackKind};

/// Default minimal segment length.
pub const DEFAULT_SEGMENT_LEN: usize = 20;

/// One AIS report. `None` means the field was not observed.
///
/// `vessel_id` and `timestamp` are always present: the timestamp is the slot
/// a record occupies on the vessel's time grid, even when every observed
/// attribute has been removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub vessel_id: String,
    /// Seconds since the UTC epoch.
    pub timestamp: i64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    /// Speed over ground, knots.
    pub speed: Option<f64>,
    /// Course over ground, degrees in [0, 360).
    pub course: Option<f64>,
    /// True heading, degrees in [0, 360).
    pub heading: Option<f64>,
    pub nav_status: Option<String>,
    pub cargo_type: Option<String>,
    /// Meters.
    pub draught: Option<f64>,
    /// Meters.
    pub length: Option<f64>,
    /// Meters.
    pub width: Option<f64>,
    pub ship_type: Option<String>,
}

impl AisRecord {
    pub fn empty(vessel_id: impl Into<String>, timestamp: i64) -> Self {
        AisRecord {
            vessel_id: vessel_id.into(),
            timestamp,
            lat: None,
            lon: None,
            speed: None,
            course: None,
            heading: None,
            nav_status: None,
            cargo_type: None,
            draught: None,
            length: None,
            width: None,
            ship_type: None,
        }
    }

    /// True iff every attribute is present.
    pub fn is_complete(&self) -> bool {
        self.lat.is_some()
            && self.lon.is_some()
            && self.speed.is_some()
            && self.course.is_some()
            && self.heading.is_some()
            && self.nav_status.is_some()
            && self.cargo_type.is_some()
            && self.draught.is_some()
            && self.length.is_some()
            && self.width.is_some()
            && self.ship_type.is_some()
    }

    /// `(lat, lon)` when both coordinates are present.
    pub fn position(&self) -> Option<(f64, f64)> {
        Some((self.lat?, self.lon?))
    }

    /// Drops every observed attribute, keeping identity and time slot.
    pub fn clear_observations(&mut self) {
        *self = AisRecord::empty(std::mem::take(&mut self.vessel_id), self.timestamp);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidInput(format!(
                "vessel {} at {}: {what} out of range ({v})",
                self.vessel_id, self.timestamp
            )))
        };
        if let Some(v) = self.lat {
            if !(-90.0..=90.0).contains(&v) {
                return bad("lat", v);
            }
        }
        if let Some(v) = self.lon {
            if !(-180.0..=180.0).contains(&v) {
                return bad("lon", v);
            }
        }
        for (name, v) in [("course", self.course), ("heading", self.heading)] {
            if let Some(v) = v {
                if !(0.0..360.0).contains(&v) {
                    return bad(name, v);
                }
            }
        }
        for (name, v) in [("speed", self.speed), ("draught", self.draught)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(name, v);
                }
            }
        }
        for (name, v) in [("length", self.length), ("width", self.width)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return bad(name, v);
                }
            }
        }
        Ok(())
    }
}

/// Time-ordered records of one vessel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselSequence {
    vessel_id: String,
    records: Vec<AisRecord>,
}

impl VesselSequence {
    /// Validates shared identity and strictly increasing timestamps.
    pub fn new(vessel_id: impl Into<String>, records: Vec<AisRecord>) -> Result<Self> {
        let vessel_id = vessel_id.into();
        for r in &records {
            if r.vessel_id != vessel_id {
                return Err(Error::InvalidInput(format!(
                    "record of vessel {} in sequence of vessel {vessel_id}",
                    r.vessel_id
                )));
            }
            r.validate()?;
        }
        if let Some(w) = records.windows(2).find(|w| w[0].timestamp >= w[1].timestamp) {
            return Err(Error::InvalidInput(format!(
                "vessel {vessel_id}: timestamps not strictly increasing ({} then {})",
                w[0].timestamp, w[1].timestamp
            )));
        }
        Ok(VesselSequence { vessel_id, records })
    }

    pub fn vessel_id(&self) -> &str {
        &self.vessel_id
    }

    pub fn records(&self) -> &[AisRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<AisRecord> {
        self.records
    }
}

/// A block of exactly `m` consecutive records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalSegment {
    pub vessel_id: String,
    /// 0-based position of the segment in its vessel's partition.
    pub index: usize,
    pub records: Vec<AisRecord>,
}

impl MinimalSegment {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.records.iter().all(AisRecord::is_complete)
    }

    /// Every record lacks coordinates, i.e. the segment was removed.
    pub fn is_removed(&self) -> bool {
        self.records.iter().all(|r| r.lat.is_none() && r.lon.is_none())
    }

    pub fn first_timestamp(&self) -> i64 {
        self.records.first().map_or(0, |r| r.timestamp)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.records.iter().map(|r| r.timestamp)
    }

    /// `τ_last − τ_first`.
    pub fn time_span(&self) -> i64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0,
        }
    }
}

/// Trailing records that do not fill a whole segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Remainder {
    pub vessel_id: String,
    /// Index of the first excluded record.
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub segments: Vec<MinimalSegment>,
    pub remainder: Option<Remainder>,
}

/// Splits a sequence into `⌊T/m⌋` consecutive segments of length `m`.
pub fn partition(sequence: &VesselSequence, m: usize) -> Result<Partition> {
    if sequence.is_empty() {
        return Err(Error::EmptyInput(format!("vessel {} has no records", sequence.vessel_id)));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!("segment length must be >= 2, got {m}")));
    }
    let records = sequence.records();
    let segments = records
        .chunks_exact(m)
        .enumerate()
        .map(|(index, chunk)| MinimalSegment { vessel_id: sequence.vessel_id.clone(), index, records: chunk.to_vec() })
        .collect::<Vec<_>>();
    let covered = segments.len() * m;
    let remainder = (covered < records.len()).then(|| Remainder {
        vessel_id: sequence.vessel_id.clone(),
        start: covered,
        len: records.len() - covered,
    });
    if let Some(r) = &remainder {
        log::warn!("vessel {}: {} trailing records excluded from segmentation", r.vessel_id, r.len);
    }
    Ok(Partition { segments, remainder })
}

/// Per-segment completeness bits for one vessel.
///
/// `targets` lists the segments removed by block masking; only those are
/// imputed and evaluated (every record of a target is flagged by the
/// internal mask).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMask {
    pub vessel_id: String,
    pub m: usize,
    pub bits: Vec<u8>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub removal_prob: Option<f64>,
    #[serde(default)]
    pub targets: Vec<usize>,
}

impl ObservationMask {
    pub fn is_complete(&self, k: usize) -> bool {
        self.bits.get(k) == Some(&1)
    }

    /// Per-record evaluation flags of segment `k`.
    pub fn internal_mask(&self, k: usize) -> Vec<bool> {
        vec![self.targets.contains(&k); self.m]
    }
}

/// `bits[k] = 1` iff every record of segment `k` is complete.
pub fn compute_mask(segments: &[MinimalSegment]) -> ObservationMask {
    ObservationMask {
        vessel_id: segments.first().map(|s| s.vessel_id.clone()).unwrap_or_default(),
        m: segments.first().map_or(0, MinimalSegment::len),
        bits: segments.iter().map(|s| u8::from(s.is_complete())).collect(),
        seed: None,
        removal_prob: None,
        targets: Vec::new(),
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("removal probability must lie in [0, 1], got {p}")))
    }
}

/// Removes each segment independently with probability `removal_prob`.
///
/// Removed segments keep their timestamps; every other attribute is cleared.
pub fn apply_block_missingness<R: Rng>(
    segments: &[MinimalSegment],
    removal_prob: f64,
    rng: &mut R,
) -> Result<(Vec<MinimalSegment>, ObservationMask)> {
    check_probability(removal_prob)?;
    let mut targets = Vec::new();
    let masked: Vec<MinimalSegment> = segments
        .iter()
        .map(|segment| {
            let mut segment = segment.clone();
            if rng.gen::<f64>() < removal_prob {
                targets.push(segment.index);
                segment.records.iter_mut().for_each(AisRecord::clear_observations);
            }
            segment
        })
        .collect();
    let mut mask = compute_mask(&masked);
    mask.removal_prob = Some(removal_prob);
    mask.targets = targets;
    Ok((masked, mask))
}

/// [`apply_block_missingness`] driven by a seeded ChaCha8 generator.
pub fn apply_block_missingness_seeded(
    segments: &[MinimalSegment],
    removal_prob: f64,
    seed: u64,
) -> Result<(Vec<MinimalSegment>, ObservationMask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (segments, mut mask) = apply_block_missingness(segments, removal_prob, &mut rng)?;
    mask.seed = Some(seed);
    Ok((segments, mask))
}

/// All vessels of an input file, keyed and ordered by vessel id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    vessels: BTreeMap<String, VesselSequence>,
}

impl Dataset {
    pub fn new(sequences: impl IntoIterator<Item = VesselSequence>) -> Self {
        Dataset { vessels: sequences.into_iter().map(|s| (s.vessel_id.clone(), s)).collect() }
    }

    /// Groups records by vessel and sorts them by time. Records repeating an
    /// earlier timestamp of the same vessel are dropped.
    pub fn from_records(records: impl IntoIterator<Item = AisRecord>) -> Result<Self> {
        let mut grouped: BTreeMap<String, Vec<AisRecord>> = BTreeMap::new();
        for r in records {
            grouped.entry(r.vessel_id.clone()).or_default().push(r);
        }
        let mut vessels = BTreeMap::new();
        for (id, mut recs) in grouped {
            recs.sort_by_key(|r| r.timestamp);
            let before = recs.len();
            recs.dedup_by_key(|r| r.timestamp);
            if recs.len() < before {
                log::warn!("vessel {id}: dropped {} records with duplicate timestamps", before - recs.len());
            }
            vessels.insert(id.clone(), VesselSequence::new(id, recs)?);
        }
        Ok(Dataset { vessels })
    }

    pub fn vessels(&self) -> impl Iterator<Item = &VesselSequence> {
        self.vessels.values()
    }

    pub fn vessel(&self, id: &str) -> Option<&VesselSequence> {
        self.vessels.get(id)
    }

    pub fn len(&self) -> usize {
        self.vessels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vessels.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &AisRecord> {
        self.vessels.values().flat_map(|v| v.records.iter())
    }

    /// Partitions every vessel. Vessels shorter than `m` yield no segments.
    pub fn partition(&self, m: usize) -> Result<Vec<Partition>> {
        self.vessels.values().map(|v| partition(v, m)).collect()
    }

    /// Block-masks every vessel with one generator, visiting vessels in id
    /// order. Trailing remainders are left untouched.
    pub fn mask(&self, m: usize, removal_prob: f64, seed: u64) -> Result<(Dataset, Vec<ObservationMask>)> {
        check_probability(removal_prob)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sequences = Vec::with_capacity(self.vessels.len());
        let mut masks = Vec::with_capacity(self.vessels.len());
        for seq in self.vessels.values() {
            let part = partition(seq, m)?;
            let (masked, mut mask) = apply_block_missingness(&part.segments, removal_prob, &mut rng)?;
            mask.vessel_id = seq.vessel_id.clone();
            mask.m = m;
            mask.seed = Some(seed);
            let mut records: Vec<AisRecord> = masked.into_iter().flat_map(|s| s.records).collect();
            if let Some(rem) = &part.remainder {
                records.extend_from_slice(&seq.records[rem.start..]);
            }
            sequences.push(VesselSequence { vessel_id: seq.vessel_id.clone(), records });
            masks.push(mask);
        }
        Ok((Dataset::new(sequences), masks))
    }
}

/// Reads a mask file: a JSON array of per-vessel masks.
pub fn read_masks(path: &std::path::Path) -> Result<Vec<ObservationMask>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_masks(path: &std::path::Path, masks: &[ObservationMask]) -> Result<()> {
    let text = serde_json::to_string_pretty(masks)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(vessel: &str, t: i64) -> AisRecord {
        AisRecord {
            vessel_id: vessel.into(),
            timestamp: t,
            lat: Some(55.0),
            lon: Some(10.0),
            speed: Some(5.4),
            course: Some(110.0),
            heading: Some(110.0),
            nav_status: Some("under way using engine".into()),
            cargo_type: Some("no hazard".into()),
            draught: Some(5.3),
            length: Some(120.0),
            width: Some(20.0),
            ship_type: Some("cargo".into()),
        }
    }

    fn sequence(n: usize) -> VesselSequence {
        VesselSequence::new("v", (0..n as i64).map(|t| complete("v", t * 10)).collect()).unwrap()
    }

    #[test]
    fn partition_counts() {
        let p = partition(&sequence(200), 20).unwrap();
        assert_eq!(p.segments.len(), 10);
        assert_eq!(p.segments.iter().map(|s| s.index).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
        assert!(p.remainder.is_none());

        let p = partition(&sequence(20), 20).unwrap();
        assert_eq!(p.segments.len(), 1);
        assert_eq!(p.segments[0].records.len(), 20);

        let p = partition(&sequence(47), 20).unwrap();
        assert_eq!(p.segments.len(), 2);
        assert_eq!(p.remainder, Some(Remainder { vessel_id: "v".into(), start: 40, len: 7 }));
    }

    #[test]
    fn partition_errors() {
        let empty = VesselSequence::new("v", vec![]).unwrap();
        assert!(matches!(partition(&empty, 20), Err(Error::EmptyInput(_))));
        assert!(matches!(partition(&sequence(5), 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn sequence_rejects_unordered_or_foreign_records() {
        let recs = vec![complete("v", 10), complete("v", 10)];
        assert!(VesselSequence::new("v", recs).is_err());
        let recs = vec![complete("v", 10), complete("w", 20)];
        assert!(VesselSequence::new("v", recs).is_err());
        let mut r = complete("v", 1);
        r.lat = Some(91.0);
        assert!(VesselSequence::new("v", vec![r]).is_err());
    }

    #[test]
    fn mask_marks_incomplete_segments() {
        let mut part = partition(&sequence(60), 20).unwrap();
        part.segments[1].records[7].speed = None;
        let mask = compute_mask(&part.segments);
        assert_eq!(mask.bits, vec![1, 0, 1]);
        assert_eq!(mask.m, 20);
    }

    #[test]
    fn mask_example_pattern() {
        // m = 4: one complete segment followed by two with gaps.
        let mut part = partition(&sequence(12), 4).unwrap();
        part.segments[1].records[2].lat = None;
        part.segments[2].records[0].heading = None;
        part.segments[2].records[3].lon = None;
        assert_eq!(compute_mask(&part.segments).bits, vec![1, 0, 0]);
    }

    #[test]
    fn block_missingness_extremes() {
        let part = partition(&sequence(200), 20).unwrap();
        let (masked, mask) = apply_block_missingness_seeded(&part.segments, 0.0, 1).unwrap();
        assert_eq!(mask.bits, vec![1; 10]);
        assert_eq!(masked, part.segments);

        let (masked, mask) = apply_block_missingness_seeded(&part.segments, 1.0, 1).unwrap();
        assert_eq!(mask.bits, vec![0; 10]);
        assert_eq!(mask.targets, (0..10).collect::<Vec<_>>());
        for (a, b) in masked.iter().zip(&part.segments) {
            assert!(a.is_removed());
            assert_eq!(a.timestamps().collect::<Vec<_>>(), b.timestamps().collect::<Vec<_>>());
        }
        assert!(apply_block_missingness_seeded(&part.segments, 1.5, 1).is_err());
        assert!(apply_block_missingness_seeded(&part.segments, -0.1, 1).is_err());
    }

    #[test]
    fn block_missingness_rate_concentrates() {
        let seq = sequence(2 * 10_000);
        let part = partition(&seq, 2).unwrap();
        let (_, mask) = apply_block_missingness_seeded(&part.segments, 0.2, 42).unwrap();
        let frac = mask.targets.len() as f64 / 10_000.0;
        assert!((0.18..=0.22).contains(&frac), "removed fraction {frac}");
        let (_, again) = apply_block_missingness_seeded(&part.segments, 0.2, 42).unwrap();
        assert_eq!(mask, again);
    }

    #[test]
    fn dataset_mask_keeps_remainder() {
        let ds = Dataset::new([sequence(47)]);
        let (masked, masks) = ds.mask(20, 1.0, 3).unwrap();
        let v = masked.vessel("v").unwrap();
        assert_eq!(v.len(), 47);
        assert!(v.records()[..40].iter().all(|r| r.lat.is_none()));
        assert!(v.records()[40..].iter().all(AisRecord::is_complete));
        assert_eq!(masks[0].bits, vec![0, 0]);
    }

    #[test]
    fn from_records_sorts_and_drops_duplicates() {
        let recs = vec![complete("b", 30), complete("a", 20), complete("a", 10), complete("a", 10)];
        let ds = Dataset::from_records(recs).unwrap();
        assert_eq!(ds.len(), 2);
        let a = ds.vessel("a").unwrap();
        assert_eq!(a.records().iter().map(|r| r.timestamp).collect::<Vec<_>>(), vec![10, 20]);
    }
}
