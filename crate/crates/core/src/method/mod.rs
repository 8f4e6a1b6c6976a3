//! Imputation functions: representation, execution, fit validation and
//! probe-based equivalence.

pub mod builder;
pub mod builtin;
pub mod iel;

use serde::{Deserialize, Serialize};

use crate::ais::MinimalSegment;
use crate::error::{Error, Result};
use iel::Program;

pub use builder::{
    build_function, describe, known_description, propose, retrieve, spec_from_source, validate_and_refine,
    BuildOutcome, FitConfig,
};

/// Default acceptance threshold on e(f), degrees.
pub const DEFAULT_FIT_THRESHOLD: f64 = 3e-3;
/// Default cap on proposals per segment.
pub const DEFAULT_MAX_PROPOSALS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Builtin,
    OracleGenerated,
}

/// An imputation function `f`: an IEL program plus a display name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct FunctionSpec {
    name: String,
    origin: Origin,
    source: String,
    program: Program,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    name: String,
    origin: Origin,
    source: String,
}

impl TryFrom<SpecRepr> for FunctionSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        FunctionSpec::parse(r.name, r.origin, &r.source)
    }
}

impl From<FunctionSpec> for SpecRepr {
    fn from(f: FunctionSpec) -> Self {
        SpecRepr { name: f.name, origin: f.origin, source: f.source }
    }
}

impl PartialEq for FunctionSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.origin == other.origin && self.source == other.source
    }
}

impl FunctionSpec {
    pub fn parse(name: impl Into<String>, origin: Origin, source: &str) -> Result<Self> {
        let program = Program::parse(source)?;
        Ok(FunctionSpec { name: name.into(), origin, source: program.canonical_text(), program })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// Canonical IEL text, one statement per line.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn params(&self) -> Vec<(&str, f64)> {
        self.program.params()
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    /// Evaluates at normalized times `us`; values outside [0, 1]
    /// extrapolate.
    pub fn evaluate(&self, boundary: &Boundary, dt_total: f64, us: &[f64]) -> Result<Vec<(f64, f64)>> {
        if !(dt_total > 0.0) {
            return Err(Error::DegenerateSpan);
        }
        let chord = ((boundary.end.0 - boundary.start.0) / dt_total, (boundary.end.1 - boundary.start.1) / dt_total);
        let v0 = boundary.v_start.unwrap_or(chord);
        let v1 = boundary.v_end.unwrap_or(chord);
        us.iter()
            .map(|&u| {
                let vars = [
                    u,
                    boundary.start.0,
                    boundary.start.1,
                    boundary.end.0,
                    boundary.end.1,
                    dt_total,
                    v0.0,
                    v0.1,
                    v1.0,
                    v1.1,
                ];
                self.program.eval(&vars)
            })
            .collect()
    }
}

/// Known positions at both ends of a gap, with optional velocities
/// (degrees per second) estimated from the records just outside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub v_start: Option<(f64, f64)>,
    pub v_end: Option<(f64, f64)>,
}

impl Boundary {
    pub fn new(start: (f64, f64), end: (f64, f64)) -> Self {
        Boundary { start, end, v_start: None, v_end: None }
    }
}

/// Runs `func` over a gap. `time_offsets` start at 0 (the record before
/// the gap) and end at the record after it; one point is returned per
/// interior offset.
pub fn execute(func: &FunctionSpec, boundary: &Boundary, time_offsets: &[f64]) -> Result<Vec<(f64, f64)>> {
    if time_offsets.len() < 2 {
        return Err(Error::InvalidParameter("need at least the two boundary offsets".into()));
    }
    if time_offsets[0] != 0.0 {
        return Err(Error::InvalidParameter("first time offset must be 0".into()));
    }
    if time_offsets.windows(2).any(|w| w[0] >= w[1]) {
        if time_offsets.windows(2).all(|w| w[0] == w[1]) {
            return Err(Error::DegenerateSpan);
        }
        return Err(Error::InvalidParameter("time offsets must be strictly increasing".into()));
    }
    let total = time_offsets[time_offsets.len() - 1];
    let us: Vec<f64> = time_offsets[1..time_offsets.len() - 1].iter().map(|t| t / total).collect();
    func.evaluate(boundary, total, &us)
}

/// Fitting error of a function on one complete segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mae_lat: f64,
    pub mae_lon: f64,
    /// `½(mae_lat + mae_lon)`.
    pub e_f: f64,
    pub accepted: bool,
    pub attempts: usize,
}

/// Evaluates `func` on the segment's own grid with its first and last
/// records as anchors, against the interior records.
pub fn fit_report(func: &FunctionSpec, segment: &MinimalSegment, threshold: f64) -> Result<FitReport> {
    let recs = &segment.records;
    if recs.len() < 3 {
        return Err(Error::InvalidParameter("fit needs at least one interior record".into()));
    }
    let position = |i: usize| {
        recs[i]
            .position()
            .ok_or(Error::IncompleteSegment { vessel_id: segment.vessel_id.clone(), segment_index: segment.index })
    };
    let (first, last) = (position(0)?, position(recs.len() - 1)?);
    let t0 = recs[0].timestamp;
    let offsets: Vec<f64> = recs.iter().map(|r| (r.timestamp - t0) as f64).collect();
    let predicted = execute(func, &Boundary::new(first, last), &offsets)?;
    let n = predicted.len() as f64;
    let (mut sum_lat, mut sum_lon) = (0.0, 0.0);
    for (i, (plat, plon)) in predicted.into_iter().enumerate() {
        let (lat, lon) = position(i + 1)?;
        sum_lat += (plat - lat).abs();
        sum_lon += (plon - lon).abs();
    }
    let (mae_lat, mae_lon) = (sum_lat / n, sum_lon / n);
    let e_f = 0.5 * (mae_lat + mae_lon);
    Ok(FitReport { mae_lat, mae_lon, e_f, accepted: e_f <= threshold, attempts: 1 })
}

const PROBE_PAIRS: [((f64, f64), (f64, f64)); 5] = [
    ((0.0, 0.0), (1.0, 1.0)),
    ((55.0, 10.0), (55.02, 10.05)),
    ((-33.9, 151.2), (-33.85, 151.18)),
    ((12.5, -170.25), (12.25, -170.75)),
    ((-0.001, 0.002), (0.003, -0.0005)),
];
const PROBE_SPANS: [f64; 3] = [60.0, 600.0, 3600.0];
const PROBE_TOLERANCE: f64 = 1e-9;

fn probe_boundary(pair: ((f64, f64), (f64, f64)), dt: f64) -> Boundary {
    let (s, e) = pair;
    let chord = ((e.0 - s.0) / dt, (e.1 - s.1) / dt);
    // Velocities deliberately off the chord so derivative-aware families
    // separate from linear ones.
    Boundary {
        start: s,
        end: e,
        v_start: Some((1.3 * chord.0 - 0.2 * chord.1, 0.2 * chord.0 + 1.3 * chord.1)),
        v_end: Some((0.7 * chord.0 + 0.1 * chord.1, -0.1 * chord.0 + 0.7 * chord.1)),
    }
}

/// Evaluates a function on the canonical probe grid, in a fixed order.
pub fn probe_signature(f: &FunctionSpec) -> Result<Vec<(f64, f64)>> {
    let us: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut out = Vec::with_capacity(PROBE_PAIRS.len() * PROBE_SPANS.len() * us.len());
    for pair in PROBE_PAIRS {
        for dt in PROBE_SPANS {
            out.extend(f.evaluate(&probe_boundary(pair, dt), dt, &us)?);
        }
    }
    Ok(out)
}

/// True iff both functions agree within 1e-9 degrees on every probe.
pub fn probe_equivalent(f1: &FunctionSpec, f2: &FunctionSpec) -> Result<bool> {
    if f1.source == f2.source {
        return Ok(true);
    }
    let (a, b) = (probe_signature(f1)?, probe_signature(f2)?);
    Ok(signatures_match(&a, &b))
}

pub fn signatures_match(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(p, q)| (p.0 - q.0).abs() <= PROBE_TOLERANCE && (p.1 - q.1).abs() <= PROBE_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::{generate_synthetic_track, partition, SyntheticParams, TrackKind};

    fn spec(src: &str) -> FunctionSpec {
        FunctionSpec::parse("test", Origin::OracleGenerated, src).unwrap()
    }

    #[test]
    fn linear_midpoint_and_anchors() {
        let f = builtin::linear();
        let b = Boundary::new((0.0, 0.0), (1.0, 1.0));
        assert_eq!(execute(&f, &b, &[0.0, 5.0, 10.0]).unwrap(), vec![(0.5, 0.5)]);
        assert_eq!(f.evaluate(&b, 10.0, &[0.0, 1.0]).unwrap(), vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn execute_rejects_bad_offsets() {
        let f = builtin::linear();
        let b = Boundary::new((0.0, 0.0), (1.0, 1.0));
        assert!(matches!(execute(&f, &b, &[0.0, 0.0]), Err(Error::DegenerateSpan)));
        assert!(matches!(execute(&f, &b, &[0.0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(execute(&f, &b, &[1.0, 2.0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(execute(&f, &b, &[0.0, 3.0, 2.0]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn evaluation_errors_surface() {
        let f = spec("lat = lat0 / (u - 0.5)\nlon = lon0");
        let b = Boundary::new((1.0, 1.0), (2.0, 2.0));
        assert!(matches!(execute(&f, &b, &[0.0, 5.0, 10.0]), Err(Error::Evaluation(_))));
    }

    #[test]
    fn rearranged_linear_is_equivalent() {
        let a = spec("lat = lat0 * (1 - u) + lat1 * u\nlon = lon0 * (1 - u) + lon1 * u");
        let b = spec("lat = lat0 + u * (lat1 - lat0)\nlon = lon0 + u * (lon1 - lon0)");
        assert!(probe_equivalent(&a, &b).unwrap());
        assert!(probe_equivalent(&b, &a).unwrap());
        assert!(probe_equivalent(&a, &a).unwrap());
        let ease = spec("e = u * u * (3 - 2 * u)\nlat = lat0 + e * (lat1 - lat0)\nlon = lon0 + e * (lon1 - lon0)");
        assert!(!probe_equivalent(&a, &ease).unwrap());
        assert!(!probe_equivalent(&builtin::linear(), &builtin::cubic_hermite()).unwrap());
    }

    #[test]
    fn fit_on_linear_track_is_exact() {
        let seq = generate_synthetic_track(TrackKind::ConstantVelocity, 20, &SyntheticParams::default()).unwrap();
        let seg = &partition(&seq, 20).unwrap().segments[0];
        let r = fit_report(&builtin::linear(), seg, DEFAULT_FIT_THRESHOLD).unwrap();
        assert!(r.e_f < 1e-12 && r.accepted);
        let constant = spec("lat = lat0\nlon = lon0");
        let r = fit_report(&constant, seg, DEFAULT_FIT_THRESHOLD).unwrap();
        assert!(r.e_f > 3e-3 && !r.accepted);
        assert!(r.e_f >= 0.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        // A moored vessel at the origin and a function offset by exactly 0.003.
        let p = SyntheticParams { start: (0.0, 0.0), velocity: (0.0, 0.0), ..Default::default() };
        let seq = generate_synthetic_track(TrackKind::ConstantVelocity, 4, &p).unwrap();
        let seg = &partition(&seq, 4).unwrap().segments[0];
        let f = spec("lat = lat0 + u * (lat1 - lat0) + 0.003\nlon = lon0 + u * (lon1 - lon0) + 0.003");
        let r = fit_report(&f, seg, 3e-3).unwrap();
        assert_eq!(r.e_f, 3e-3);
        assert!(r.accepted);
        assert!(!fit_report(&f, seg, 2.9e-3).unwrap().accepted);
    }

    #[test]
    fn serde_round_trip_keeps_program() {
        let f = builtin::constant_turn(0.0012);
        let json = serde_json::to_string(&f).unwrap();
        let g: FunctionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(f, g);
        assert_eq!(g.params(), vec![("omega", 0.0012)]);
        assert!(serde_json::from_str::<FunctionSpec>(r#"{"name":"x","origin":"builtin","source":"lat = ("}"#).is_err());
    }
}
