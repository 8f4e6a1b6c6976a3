//! Masked evaluation metrics and the rule-based baselines.

pub mod baselines;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ais::{Dataset, ObservationMask};
use crate::error::{Error, Result};
use crate::imputation::ImputationOutcome;

pub use baselines::{akima_window, impute_with, kalman_smooth, lin_itp, side_window, Akima, Baseline, KalmanParams};

/// Earth's mean radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

fn hav(x: f64) -> f64 {
    let s = (x / 2.0).sin();
    s * s
}

/// Great-circle distance in km between two `(lat, lon)` points in degrees.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let h = hav(p2 - p1) + p1.cos() * p2.cos() * hav((b.1 - a.1).to_radians());
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae_lat: f64,
    pub mae_lon: f64,
    pub rmse_lat: f64,
    pub rmse_lon: f64,
    /// Kilometers.
    pub mhd: f64,
    pub n: usize,
}

impl MetricReport {
    /// Metrics over `(truth, estimate)` position pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = ((f64, f64), (f64, f64))>) -> Self {
        let (mut abs, mut sq, mut dist, mut n) = ([0.0; 2], [0.0; 2], 0.0, 0usize);
        for (y, e) in pairs {
            let d = [(y.0 - e.0).abs(), (y.1 - e.1).abs()];
            for i in 0..2 {
                abs[i] += d[i];
                sq[i] += d[i] * d[i];
            }
            dist += haversine_km(y, e);
            n += 1;
        }
        if n == 0 {
            return MetricReport::default();
        }
        let nf = n as f64;
        MetricReport {
            mae_lat: abs[0] / nf,
            mae_lon: abs[1] / nf,
            rmse_lat: (sq[0] / nf).sqrt(),
            rmse_lon: (sq[1] / nf).sqrt(),
            mhd: dist / nf,
            n,
        }
    }
}

/// `(vessel_id, segment_index)` to imputed `(lat, lon, timestamp)` points.
pub type Predictions = BTreeMap<(String, usize), Vec<(f64, f64, i64)>>;

pub fn predictions_of<'a>(outcomes: impl IntoIterator<Item = &'a ImputationOutcome>) -> Predictions {
    outcomes.into_iter().map(|o| ((o.vessel_id.clone(), o.segment_index), o.points.clone())).collect()
}

/// The evaluation index set: `(vessel_id, k, j)` for every record the
/// internal masks flag.
pub fn eval_index(masks: &[ObservationMask]) -> BTreeSet<(String, usize, usize)> {
    let mut out = BTreeSet::new();
    for mask in masks {
        for k in &mask.targets {
            for (j, flag) in mask.internal_mask(*k).into_iter().enumerate() {
                if flag {
                    out.insert((mask.vessel_id.clone(), *k, j));
                }
            }
        }
    }
    out
}

/// Compares predictions against `truth` on the masked records only. A gap
/// without a prediction, or with the wrong number of points, is
/// `MissingOutcome`.
pub fn evaluate(truth: &Dataset, predictions: &Predictions, masks: &[ObservationMask]) -> Result<MetricReport> {
    let mut pairs = Vec::new();
    for (vessel_id, k, j) in eval_index(masks) {
        let missing = || Error::MissingOutcome { vessel_id: vessel_id.clone(), segment_index: k };
        let seq = truth.vessel(&vessel_id).ok_or_else(missing)?;
        let m = masks.iter().find(|x| x.vessel_id == vessel_id).map_or(0, |x| x.m);
        let pts = predictions.get(&(vessel_id.clone(), k)).ok_or_else(missing)?;
        if pts.len() != m {
            return Err(missing());
        }
        let rec = seq
            .records()
            .get(k * m + j)
            .ok_or_else(|| Error::InvalidInput(format!("truth for {vessel_id} has no record {}", k * m + j)))?;
        let y = rec.position().ok_or_else(|| {
            Error::InvalidInput(format!("truth for {vessel_id} lacks a position at {}", rec.timestamp))
        })?;
        let p = pts[j];
        if p.2 != rec.timestamp {
            return Err(Error::InvalidInput(format!(
                "prediction timestamp {} does not match truth {} for {vessel_id}/{k}",
                p.2, rec.timestamp
            )));
        }
        pairs.push((y, (p.0, p.1)));
    }
    Ok(MetricReport::from_pairs(pairs))
}

/// `truth` with every masking target's observations cleared.
pub fn masked_view(truth: &Dataset, masks: &[ObservationMask]) -> Result<Dataset> {
    let mut out = Vec::new();
    for seq in truth.vessels() {
        let mut recs = seq.records().to_vec();
        if let Some(mask) = masks.iter().find(|m| m.vessel_id == seq.vessel_id()) {
            for k in &mask.targets {
                for r in recs.iter_mut().skip(k * mask.m).take(mask.m) {
                    r.clear_observations();
                }
            }
        }
        out.push(crate::ais::VesselSequence::new(seq.vessel_id(), recs)?);
    }
    Ok(Dataset::new(out))
}

/// Baseline predictions on every masking target of `masked`.
pub fn baseline_predictions(
    baseline: Baseline,
    masked: &Dataset,
    masks: &[ObservationMask],
    kalman: &KalmanParams,
) -> Result<(Predictions, usize)> {
    let mut out = Predictions::new();
    let mut degraded = 0;
    for mask in masks {
        let seq = masked
            .vessel(&mask.vessel_id)
            .ok_or_else(|| Error::MissingOutcome { vessel_id: mask.vessel_id.clone(), segment_index: 0 })?;
        for k in &mask.targets {
            let (pts, d) = impute_with(baseline, seq, mask.m, *k, kalman)?;
            degraded += d as usize;
            out.insert((mask.vessel_id.clone(), *k), pts);
        }
    }
    Ok((out, degraded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    #[serde(flatten)]
    pub metrics: MetricReport,
    /// Gaps where the method fell back to a simpler rule.
    pub degraded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub metrics: MetricReport,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparison: Vec<ComparisonRow>,
}

/// One row per method, the subject first.
pub fn comparison_table(
    subject: (&str, MetricReport, usize),
    truth: &Dataset,
    masked: &Dataset,
    masks: &[ObservationMask],
    kalman: &KalmanParams,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = vec![ComparisonRow { method: subject.0.into(), metrics: subject.1, degraded: subject.2 }];
    for b in Baseline::ALL {
        let (preds, degraded) = baseline_predictions(b, masked, masks, kalman)?;
        rows.push(ComparisonRow { method: b.as_str().into(), metrics: evaluate(truth, &preds, masks)?, degraded });
    }
    Ok(rows)
}

/// Fixed-width text rendering of a comparison table.
pub fn render_table(rows: &[ComparisonRow]) -> String {
    let mut s = format!(
        "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6}\n",
        "method", "mae_lat", "mae_lon", "rmse_lat", "rmse_lon", "mhd_km", "n"
    );
    for r in rows {
        let m = &r.metrics;
        s.push_str(&format!(
            "{:<10} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>6}\n",
            r.method, m.mae_lat, m.mae_lon, m.rmse_lat, m.rmse_lon, m.mhd, m.n
        ));
    }
    s
}
