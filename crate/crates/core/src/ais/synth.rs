//! Synthetic tracks with analytically known positions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AisRecord, VesselSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackKind {
    ConstantVelocity,
    ConstantTurn,
    NoisyLinear,
}

impl std::str::FromStr for TrackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant-velocity" => Ok(TrackKind::ConstantVelocity),
            "constant-turn" => Ok(TrackKind::ConstantTurn),
            "noisy-linear" => Ok(TrackKind::NoisyLinear),
            other => Err(Error::InvalidParameter(format!("unknown track kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub vessel_id: String,
    /// `(lat, lon)` of the first record.
    pub start: (f64, f64),
    /// Displacement between the first two records, degrees per step.
    pub velocity: (f64, f64),
    /// Seconds between records.
    pub step_seconds: i64,
    pub t0: i64,
    /// Radians the velocity rotates per step (constant-turn only).
    pub turn_rate: f64,
    /// Standard deviation of the position noise in degrees (noisy-linear only).
    pub sigma: f64,
    pub seed: u64,
    pub nav_status: String,
    pub cargo_type: String,
    pub ship_type: String,
    pub draught: f64,
    pub length: f64,
    pub width: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            vessel_id: "219000001".into(),
            start: (55.0, 10.0),
            velocity: (0.001, 0.002),
            step_seconds: 60,
            t0: 1_700_000_000,
            turn_rate: 0.0,
            sigma: 0.0,
            seed: 0,
            nav_status: "under way using engine".into(),
            cargo_type: "no hazard".into(),
            ship_type: "cargo".into(),
            draught: 5.3,
            length: 120.0,
            width: 20.0,
        }
    }
}

impl SyntheticParams {
    /// Turn rate in radians per second.
    pub fn omega(&self) -> f64 {
        self.turn_rate / self.step_seconds as f64
    }
}

/// Noise-free position after `k` steps.
///
/// The constant-turn track is the circle through the samples
/// `z_k = z_0 + v·(e^{iωk} − 1)/(e^{iω} − 1)` in the complex plane
/// `lat + i·lon`.
pub fn ideal_position(kind: TrackKind, p: &SyntheticParams, k: f64) -> (f64, f64) {
    let (vlat, vlon) = p.velocity;
    let w = p.turn_rate;
    if kind != TrackKind::ConstantTurn || w == 0.0 {
        return (p.start.0 + k * vlat, p.start.1 + k * vlon);
    }
    let rot = w * (k - 1.0) / 2.0;
    let scale = (w * k / 2.0).sin() / (w / 2.0).sin();
    let (s, c) = rot.sin_cos();
    (p.start.0 + scale * (vlat * c - vlon * s), p.start.1 + scale * (vlat * s + vlon * c))
}

/// Compass bearing (north = 0, east = 90) of the path tangent at step `k`.
fn tangent_course(kind: TrackKind, p: &SyntheticParams, k: f64) -> f64 {
    let base = p.velocity.1.atan2(p.velocity.0);
    let turn = if kind == TrackKind::ConstantTurn { p.turn_rate * (k - 0.5) } else { 0.0 };
    (base + turn).to_degrees().rem_euclid(360.0)
}

pub fn generate_synthetic_track(kind: TrackKind, n: usize, params: &SyntheticParams) -> Result<VesselSequence> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("synthetic track needs n >= 2, got {n}")));
    }
    if params.step_seconds <= 0 {
        return Err(Error::InvalidParameter("step_seconds must be positive".into()));
    }
    let noise = match kind {
        TrackKind::NoisyLinear if params.sigma > 0.0 => {
            Some(Normal::new(0.0, params.sigma).map_err(|e| Error::InvalidParameter(format!("sigma: {e}")))?)
        }
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let step_len = params.velocity.0.hypot(params.velocity.1);
    let chord = if kind == TrackKind::ConstantTurn && params.turn_rate != 0.0 {
        // Arc length per step is slightly longer than the chord.
        step_len * (params.turn_rate / 2.0) / (params.turn_rate / 2.0).sin()
    } else {
        step_len
    };
    let knots = chord * 60.0 * 3600.0 / params.step_seconds as f64;

    let records = (0..n)
        .map(|k| {
            let (mut lat, mut lon) = ideal_position(kind, params, k as f64);
            if let Some(dist) = &noise {
                lat += dist.sample(&mut rng);
                lon += dist.sample(&mut rng);
            }
            let course = tangent_course(kind, params, k as f64);
            AisRecord {
                vessel_id: params.vessel_id.clone(),
                timestamp: params.t0 + k as i64 * params.step_seconds,
                lat: Some(lat),
                lon: Some(lon),
                speed: Some(knots),
                course: Some(course),
                heading: Some(course),
                nav_status: Some(params.nav_status.clone()),
                cargo_type: Some(params.cargo_type.clone()),
                draught: Some(params.draught),
                length: Some(params.length),
                width: Some(params.width),
                ship_type: Some(params.ship_type.clone()),
            }
        })
        .collect();
    VesselSequence::new(params.vessel_id.clone(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positions(seq: &VesselSequence) -> Vec<(f64, f64)> {
        seq.records().iter().map(|r| r.position().unwrap()).collect()
    }

    #[test]
    fn constant_velocity_example() {
        let p = SyntheticParams::default();
        let seq = generate_synthetic_track(TrackKind::ConstantVelocity, 3, &p).unwrap();
        let expected = [(55.0, 10.0), (55.001, 10.002), (55.002, 10.004)];
        for ((lat, lon), (elat, elon)) in positions(&seq).into_iter().zip(expected) {
            assert!((lat - elat).abs() < 1e-12 && (lon - elon).abs() < 1e-12);
        }
        assert!(seq.records().iter().all(AisRecord::is_complete));
    }

    #[test]
    fn zero_turn_matches_constant_velocity() {
        let p = SyntheticParams::default();
        let a = generate_synthetic_track(TrackKind::ConstantVelocity, 50, &p).unwrap();
        let b = generate_synthetic_track(TrackKind::ConstantTurn, 50, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_sigma_noisy_is_linear() {
        let p = SyntheticParams::default();
        let a = generate_synthetic_track(TrackKind::ConstantVelocity, 50, &p).unwrap();
        let b = generate_synthetic_track(TrackKind::NoisyLinear, 50, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_turn_stays_on_circle() {
        let p = SyntheticParams { turn_rate: 0.05, ..Default::default() };
        let seq = generate_synthetic_track(TrackKind::ConstantTurn, 40, &p).unwrap();
        let pts = positions(&seq);
        // Consecutive chords all have the same length and rotate by the turn rate.
        let chords: Vec<(f64, f64)> = pts.windows(2).map(|w| (w[1].0 - w[0].0, w[1].1 - w[0].1)).collect();
        for w in chords.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!((a.0.hypot(a.1) - b.0.hypot(b.1)).abs() < 1e-12);
            let angle = b.1.atan2(b.0) - a.1.atan2(a.0);
            assert!((angle - 0.05).abs() < 1e-9, "{angle}");
        }
        assert!((pts[1].0 - 55.001).abs() < 1e-12 && (pts[1].1 - 10.002).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_tracks() {
        let p = SyntheticParams::default();
        assert!(generate_synthetic_track(TrackKind::ConstantVelocity, 1, &p).is_err());
    }

    #[test]
    fn noisy_track_is_seeded() {
        let p = SyntheticParams { sigma: 1e-3, seed: 9, ..Default::default() };
        let a = generate_synthetic_track(TrackKind::NoisyLinear, 30, &p).unwrap();
        let b = generate_synthetic_track(TrackKind::NoisyLinear, 30, &p).unwrap();
        assert_eq!(a, b);
        let clean = generate_synthetic_track(TrackKind::ConstantVelocity, 30, &p).unwrap();
        assert_ne!(a, clean);
    }
}
