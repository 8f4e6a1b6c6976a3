//! Rule-based imputers, applied axis-wise in degrees over time.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::ais::VesselSequence;
use crate::error::{Error, Result};

/// Known side points per gap used by Akima.
pub const AKIMA_WINDOW: usize = 5;

/// Linear interpolation between two anchors. `offsets` start at 0 (the
/// first anchor) and end at the second; one point per interior offset.
pub fn lin_itp(boundary: ((f64, f64), (f64, f64)), offsets: &[f64]) -> Result<Vec<(f64, f64)>> {
    let (Some(first), Some(last)) = (offsets.first(), offsets.last()) else {
        return Err(Error::InvalidParameter("no offsets".into()));
    };
    let span = last - first;
    if !(span > 0.0) {
        return Err(Error::DegenerateSpan);
    }
    let ((a0, b0), (a1, b1)) = boundary;
    Ok(offsets[1..offsets.len() - 1]
        .iter()
        .map(|t| {
            let u = (t - first) / span;
            (a0 + u * (a1 - a0), b0 + u * (b1 - b0))
        })
        .collect())
}

/// Akima spline through `(xs, ys)`.
#[derive(Debug, Clone)]
pub struct Akima {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Akima {
    /// Needs at least three knots with strictly increasing `xs`.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(Error::InvalidParameter(format!("Akima needs >= 3 matching knots, got {n}")));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("Akima knots must be strictly increasing".into()));
        }
        // Secant slopes padded with two extrapolated values on each side.
        let mut m = vec![0.0; n + 3];
        for i in 0..n - 1 {
            m[i + 2] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        }
        m[1] = 2.0 * m[2] - m[3];
        m[0] = 2.0 * m[1] - m[2];
        m[n + 1] = 2.0 * m[n] - m[n - 1];
        m[n + 2] = 2.0 * m[n + 1] - m[n];
        let slopes = (0..n)
            .map(|i| {
                let (w1, w2) = ((m[i + 3] - m[i + 2]).abs(), (m[i + 1] - m[i]).abs());
                if w1 + w2 == 0.0 {
                    0.5 * (m[i + 1] + m[i + 2])
                } else {
                    (w1 * m[i + 1] + w2 * m[i + 2]) / (w1 + w2)
                }
            })
            .collect();
        Ok(Akima { xs: xs.to_vec(), ys: ys.to_vec(), slopes })
    }

    /// Value at `x`; outside the knots the end pieces extend.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|k| *k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (3.0 * s2 - 2.0 * s3) * y1 + (s3 - s2) * d1
    }

    /// Derivative of cubic piece `i` (between knots `i` and `i + 1`) at `x`.
    pub fn derivative_on(&self, i: usize, x: f64) -> f64 {
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        (6.0 * s * s - 6.0 * s) / h * (y0 - y1) + (3.0 * s * s - 4.0 * s + 1.0) * m0 + (3.0 * s * s - 2.0 * s) * m1
    }
}

/// Known `(t, lat, lon)` around a gap, times relative to the first one.
#[derive(Debug, Clone, PartialEq)]
pub struct SideWindow {
    pub before: Vec<(f64, f64, f64)>,
    pub after: Vec<(f64, f64, f64)>,
    pub origin: i64,
}

/// Up to `width` known fixes on each side of segment `k`.
pub fn side_window(seq: &VesselSequence, m: usize, k: usize, width: usize) -> SideWindow {
    let recs = seq.records();
    let (lo, hi) = (k * m, ((k + 1) * m).min(recs.len()));
    let fix = |r: &crate::ais::AisRecord| Some((r.timestamp, r.lat?, r.lon?));
    let mut before: Vec<_> = recs[..lo.min(recs.len())].iter().rev().filter_map(fix).take(width).collect();
    before.reverse();
    let after: Vec<_> = recs[hi..].iter().filter_map(fix).take(width).collect();
    let origin = before.first().or(after.first()).map_or(0, |f| f.0);
    let rel = |v: Vec<(i64, f64, f64)>| v.into_iter().map(|(t, a, b)| ((t - origin) as f64, a, b)).collect();
    SideWindow { before: rel(before), after: rel(after), origin }
}

/// Linear through the nearest fix on each side, or extended from the two
/// nearest fixes of the only known side.
fn linear_window(w: &SideWindow, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let pair = match (w.before.last(), w.after.first()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => match (w.before.as_slice(), w.after.as_slice()) {
            ([.., a, b], _) | (_, [a, b, ..]) => (*a, *b),
            ([p], _) | (_, [p]) => return Ok(times.iter().map(|_| (p.1, p.2)).collect()),
            _ => return Err(Error::InvalidInput("no known fix near the gap".into())),
        },
    };
    let (a, b) = pair;
    let span = b.0 - a.0;
    if !(span > 0.0) {
        return Err(Error::DegenerateSpan);
    }
    Ok(times
        .iter()
        .map(|t| {
            let u = (t - a.0) / span;
            (a.1 + u * (b.1 - a.1), a.2 + u * (b.2 - a.2))
        })
        .collect())
}

/// Akima over the side windows when each side has at least three fixes;
/// otherwise linear, reported by the flag.
pub fn akima_window(w: &SideWindow, times: &[f64]) -> Result<(Vec<(f64, f64)>, bool)> {
    if w.before.len() < 3 || w.after.len() < 3 {
        return Ok((linear_window(w, times)?, true));
    }
    let knots: Vec<_> = w.before.iter().chain(&w.after).collect();
    let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
    let lat = Akima::new(&xs, &knots.iter().map(|k| k.1).collect::<Vec<_>>())?;
    let lon = Akima::new(&xs, &knots.iter().map(|k| k.2).collect::<Vec<_>>())?;
    Ok((times.iter().map(|t| (lat.eval(*t), lon.eval(*t))).collect(), false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanParams {
    /// Acceleration noise, degrees per s².
    pub sigma_process: f64,
    /// Position noise, degrees.
    pub sigma_obs: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        KalmanParams { sigma_process: 1e-6, sigma_obs: 1e-4 }
    }
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn process_noise(dt: f64, q: f64) -> Matrix4<f64> {
    let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    Matrix4::new(a, 0.0, b, 0.0, 0.0, a, 0.0, b, b, 0.0, c, 0.0, 0.0, b, 0.0, c) * q
}

/// Constant-velocity Kalman filter with Rauch-Tung-Striebel smoothing.
/// `obs` are `(t, lat, lon)` in increasing time; returns smoothed
/// positions at `times` (which may fall between or beyond observations).
pub fn kalman_smooth(obs: &[(f64, f64, f64)], times: &[f64], params: &KalmanParams) -> Result<Vec<(f64, f64)>> {
    if obs.len() < 2 {
        return Err(Error::InvalidParameter("Kalman smoothing needs at least two observations".into()));
    }
    if obs.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidParameter("observation times must be strictly increasing".into()));
    }
    // Merged time line: (t, observation or query index).
    let mut steps: Vec<(f64, Option<usize>, Option<usize>)> =
        obs.iter().enumerate().map(|(i, o)| (o.0, Some(i), None)).collect();
    steps.extend(times.iter().enumerate().map(|(j, t)| (*t, None, Some(j))));
    steps.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.is_some().cmp(&a.1.is_some())));

    let q = params.sigma_process * params.sigma_process;
    let r = Matrix2::identity() * (params.sigma_obs * params.sigma_obs);
    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let (o0, o1) = (obs[0], obs[1]);
    let v0 = ((o1.1 - o0.1) / (o1.0 - o0.0), (o1.2 - o0.2) / (o1.0 - o0.0));
    let mut x = Vector4::new(o0.1, o0.2, v0.0, v0.1);
    let var_v = 2.0 * params.sigma_obs.powi(2) / (o1.0 - o0.0).powi(2);
    let mut p = Matrix4::from_diagonal(&Vector4::new(params.sigma_obs.powi(2), params.sigma_obs.powi(2), var_v, var_v));
    // The initial state belongs to the first observation; earlier query
    // times are reached by propagating backwards.
    let mut t_prev = o0.0;

    let mut filtered = Vec::with_capacity(steps.len());
    let mut predicted = Vec::with_capacity(steps.len());
    let mut transitions = Vec::with_capacity(steps.len());
    for (t, oi, _) in &steps {
        let f = transition(t - t_prev);
        let (xp, pp) = (f * x, f * p * f.transpose() + process_noise((t - t_prev).abs(), q));
        let (xf, pf) = match oi {
            Some(i) => {
                let z = Vector2::new(obs[*i].1, obs[*i].2);
                let s = h * pp * h.transpose() + r;
                let s_inv =
                    s.try_inverse().ok_or_else(|| Error::Evaluation("singular innovation covariance".into()))?;
                let gain = pp * h.transpose() * s_inv;
                (xp + gain * (z - h * xp), (Matrix4::identity() - gain * h) * pp)
            }
            None => (xp, pp),
        };
        predicted.push((xp, pp));
        filtered.push((xf, pf));
        transitions.push(f);
        x = xf;
        p = pf;
        t_prev = *t;
    }

    let n = steps.len();
    let mut smoothed = vec![Vector4::zeros(); n];
    smoothed[n - 1] = filtered[n - 1].0;
    for k in (0..n - 1).rev() {
        let (xf, pf) = filtered[k];
        let (xp, pp) = predicted[k + 1];
        let f = transitions[k + 1];
        let pp_inv = pp.try_inverse().ok_or_else(|| Error::Evaluation("singular predicted covariance".into()))?;
        let c = pf * f.transpose() * pp_inv;
        smoothed[k] = xf + c * (smoothed[k + 1] - xp);
    }

    let mut out = vec![(0.0, 0.0); times.len()];
    for (k, (_, _, qi)) in steps.iter().enumerate() {
        if let Some(j) = qi {
            out[*j] = (smoothed[k][0], smoothed[k][1]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    LinItp,
    Akima,
    Kalman,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::LinItp, Baseline::Akima, Baseline::Kalman];

    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::LinItp => "lin-itp",
            Baseline::Akima => "akima",
            Baseline::Kalman => "kalman",
        }
    }
}

/// Positions for segment `k` of `seq` from known fixes around it. Kalman
/// sees up to `m` fixes per side; the flag reports an Akima degrade.
pub fn impute_with(
    baseline: Baseline,
    seq: &VesselSequence,
    m: usize,
    k: usize,
    kalman: &KalmanParams,
) -> Result<(Vec<(f64, f64, i64)>, bool)> {
    let recs = seq.records();
    if (k + 1) * m > recs.len() {
        return Err(Error::InvalidParameter(format!("segment {k} out of range for vessel {}", seq.vessel_id())));
    }
    let width = if baseline == Baseline::Kalman { m } else { AKIMA_WINDOW };
    let w = side_window(seq, m, k, width);
    let stamps: Vec<i64> = recs[k * m..(k + 1) * m].iter().map(|r| r.timestamp).collect();
    let times: Vec<f64> = stamps.iter().map(|t| (t - w.origin) as f64).collect();
    let (pts, degraded) = match baseline {
        Baseline::LinItp => (linear_window(&w, &times)?, false),
        Baseline::Akima => akima_window(&w, &times)?,
        Baseline::Kalman => {
            let obs: Vec<_> = w.before.iter().chain(&w.after).copied().collect();
            if obs.len() < 2 {
                (linear_window(&w, &times)?, true)
            } else {
                (kalman_smooth(&obs, &times, kalman)?, false)
            }
        }
    };
    Ok((pts.into_iter().zip(stamps).map(|((a, b), t)| (a, b, t)).collect(), degraded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lin_itp_examples() {
        assert_eq!(lin_itp(((0.0, 0.0), (2.0, 4.0)), &[0.0, 0.5, 1.0]).unwrap(), vec![(1.0, 2.0)]);
        assert_eq!(lin_itp(((0.0, 0.0), (2.0, 4.0)), &[0.0, 0.0, 1.0]).unwrap(), vec![(0.0, 0.0)]);
        let p = lin_itp(((0.0, 0.0), (4.0, 8.0)), &[0.0, 10.0, 40.0]).unwrap();
        assert_eq!(p, vec![(1.0, 2.0)]);
        assert!(matches!(lin_itp(((0.0, 0.0), (1.0, 1.0)), &[0.0, 0.0]), Err(Error::DegenerateSpan)));
    }

    #[test]
    fn akima_knots_and_continuity() {
        let xs = [0.0, 1.0, 2.5, 3.0, 4.5, 6.0, 7.0];
        let ys = [0.0, 2.0, 1.0, 3.5, 3.0, 0.5, 1.0];
        let a = Akima::new(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert!((a.eval(*x) - y).abs() < 1e-12);
        }
        for i in 1..xs.len() - 1 {
            let left = a.derivative_on(i - 1, xs[i]);
            let right = a.derivative_on(i, xs[i]);
            assert!((left - right).abs() <= 1e-9, "{}: {left} vs {right}", xs[i]);
            // Against a central difference inside the piece.
            let x = xs[i] + 0.3 * (xs[i + 1] - xs[i]);
            let fd = (a.eval(x + 1e-6) - a.eval(x - 1e-6)) / 2e-6;
            assert!((fd - a.derivative_on(i, x)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn akima_reproduces_lines(a in -100.0f64..100.0, b in -1.0f64..1.0, gaps in prop::collection::vec(0.1f64..50.0, 3..12)) {
            let mut xs = vec![0.0];
            for g in gaps { xs.push(xs.last().unwrap() + g); }
            let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
            let s = Akima::new(&xs, &ys).unwrap();
            let end = *xs.last().unwrap();
            for i in 0..=50 {
                let x = end * i as f64 / 50.0;
                prop_assert!((s.eval(x) - (a + b * x)).abs() <= 1e-12 * (1.0 + a.abs() + (b * x).abs()) * 10.0);
            }
        }
    }

    #[test]
    fn kalman_on_exact_line() {
        let obs: Vec<_> = (0..40)
            .filter(|i| !(15..25).contains(i))
            .map(|i| {
                let t = i as f64 * 60.0;
                (t, 55.0 + 1e-5 * t, 10.0 + 2e-5 * t)
            })
            .collect();
        let times: Vec<f64> = (15..25).map(|i| i as f64 * 60.0).collect();
        let out = kalman_smooth(&obs, &times, &KalmanParams::default()).unwrap();
        for (t, p) in times.iter().zip(&out) {
            assert!((p.0 - (55.0 + 1e-5 * t)).abs() < 1e-9 && (p.1 - (10.0 + 2e-5 * t)).abs() < 1e-9);
        }
    }

    #[test]
    fn kalman_before_first_and_after_last() {
        let obs: Vec<_> = (10..30)
            .map(|i| {
                let t = i as f64 * 60.0;
                (t, 55.0 + 1e-5 * t, 10.0 - 2e-5 * t)
            })
            .collect();
        let times = [0.0, 300.0, 2400.0];
        let out = kalman_smooth(&obs, &times, &KalmanParams::default()).unwrap();
        for (t, p) in times.iter().zip(&out) {
            assert!((p.0 - (55.0 + 1e-5 * t)).abs() < 1e-9 && (p.1 - (10.0 - 2e-5 * t)).abs() < 1e-9, "{t}: {p:?}");
        }
    }

    #[test]
    fn kalman_collapses_to_observations() {
        let obs = [(0.0, 1.0, 1.0), (10.0, 1.3, 0.9), (20.0, 1.1, 1.4), (30.0, 1.6, 1.2)];
        let times: Vec<f64> = obs.iter().map(|o| o.0).collect();
        let p = KalmanParams { sigma_process: 1e-3, sigma_obs: 1e-9 };
        let out = kalman_smooth(&obs, &times, &p).unwrap();
        for (o, s) in obs.iter().zip(&out) {
            assert!((o.1 - s.0).abs() < 1e-6 && (o.2 - s.1).abs() < 1e-6, "{o:?} {s:?}");
        }
        assert!(kalman_smooth(&[(0.0, 1.0, 1.0), (0.0, 1.0, 1.0)], &[1.0], &p).is_err());
    }
}
