//! Feature extraction from sampled decoherence curves: dominant frequency,
//! first minimum, collapse/revival times, and least-squares fits.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_COLLAPSE_THRESHOLD: f64 = 0.1;
pub const DEFAULT_REVIVAL_THRESHOLD: f64 = 0.5;
/// Samples below this factor are excluded from log-linear decay fits.
pub const DEFAULT_FIT_FLOOR: f64 = 1e-4;

const ZERO_PAD: usize = 8;
const FLAT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub collapse: f64,
    pub revival: f64,
    pub fit_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            collapse: DEFAULT_COLLAPSE_THRESHOLD,
            revival: DEFAULT_REVIVAL_THRESHOLD,
            fit_floor: DEFAULT_FIT_FLOOR,
        }
    }
}

/// Least-squares line through `-ln(factor)` against `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    pub window_end: f64,
}

/// `A + B cos(omega T) + C sin(omega T)` fitted by Gauss-Newton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub omega: f64,
    pub offset: f64,
    pub cos_coeff: f64,
    pub sin_coeff: f64,
    /// Largest absolute residual over the samples.
    pub max_residual: f64,
    pub iterations: usize,
}

impl CosineFit {
    pub fn eval(&self, t: f64) -> f64 {
        let (s, c) = (self.omega * t).sin_cos();
        self.offset + self.cos_coeff * c + self.sin_coeff * s
    }
}

/// Absent entries mean the feature is undefined for the curve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveFeatures {
    /// Angular frequency of the largest spectral peak of `factor - mean`.
    pub dominant_frequency: Option<f64>,
    pub first_minimum_time: Option<f64>,
    pub collapse_time: Option<f64>,
    pub revival_time: Option<f64>,
    pub decay: Option<DecayFit>,
    pub min_factor: f64,
    pub max_factor: f64,
}

fn check_samples(times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if values.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    Ok(())
}

fn uniform_step(times: &[f64]) -> Option<f64> {
    if times.len() < 3 {
        return None;
    }
    let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
    (step > 0.0 && uniform).then_some(step)
}

/// Vertex offset (in samples, within `[-1, 1]`) of the parabola through
/// three equally spaced points.
fn parabolic_offset(y0: f64, y1: f64, y2: f64) -> f64 {
    let denom = y0 - 2.0 * y1 + y2;
    if denom == 0.0 {
        0.0
    } else {
        (0.5 * (y0 - y2) / denom).clamp(-1.0, 1.0)
    }
}

fn refined_time(times: &[f64], values: &[f64], i: usize) -> f64 {
    let step = 0.5 * (times[i + 1] - times[i - 1]);
    times[i] + step * parabolic_offset(values[i - 1], values[i], values[i + 1])
}

/// Angular frequency of the strongest spectral peak of `values - mean`,
/// using a Hann window, zero padding and parabolic peak refinement.
/// `None` for flat curves or non-uniform grids.
pub fn dominant_frequency(times: &[f64], values: &[f64]) -> Option<f64> {
    let step = uniform_step(times)?;
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if values.iter().all(|v| (v - mean).abs() < FLAT_TOL) {
        return None;
    }
    let padded = n * ZERO_PAD;
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 - 0.5 * (TAU * i as f64 / (n - 1) as f64).cos();
            Complex::new((v - mean) * w, 0.0)
        })
        .collect();
    buf.resize(padded, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mag: Vec<f64> = buf[..padded / 2 + 1].iter().map(|c| c.norm()).collect();
    // Skip the Hann main lobe around zero frequency.
    let start = 2 * ZERO_PAD;
    if mag.len() < start + 2 {
        return None;
    }
    let k = (start..mag.len() - 1).max_by(|&a, &b| mag[a].total_cmp(&mag[b]))?;
    let offset = parabolic_offset(mag[k - 1], mag[k], mag[k + 1]);
    Some(TAU * (k as f64 + offset) / (padded as f64 * step))
}

/// First interior local minimum, refined by a parabola.
pub fn first_minimum_time(times: &[f64], values: &[f64]) -> Option<f64> {
    (1..values.len().saturating_sub(1))
        .find(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1])
        .map(|i| refined_time(times, values, i))
}

/// Index of the first sample below `threshold` (never the first sample).
pub fn collapse_index(values: &[f64], threshold: f64) -> Option<usize> {
    values
        .iter()
        .position(|&v| v < threshold)
        .filter(|&i| i > 0)
}

fn interpolate_crossing(times: &[f64], values: &[f64], i: usize, threshold: f64) -> f64 {
    let (t0, t1, v0, v1) = (times[i - 1], times[i], values[i - 1], values[i]);
    t0 + (t1 - t0) * (v0 - threshold) / (v0 - v1)
}

/// First local maximum above `revival` after the curve has collapsed below
/// `collapse`.
pub fn revival_time(times: &[f64], values: &[f64], thresholds: &Thresholds) -> Option<f64> {
    let start = collapse_index(values, thresholds.collapse)?;
    (start.max(1)..values.len().saturating_sub(1))
        .find(|&i| {
            values[i] > thresholds.revival
                && values[i] >= values[i - 1]
                && values[i] > values[i + 1]
        })
        .map(|i| refined_time(times, values, i))
}

/// Least-squares fit of `-ln(values)` against `times` over the samples
/// preceding the first value below `floor`.
pub fn fit_decay(times: &[f64], values: &[f64], floor: f64) -> Result<DecayFit> {
    check_samples(times, values)?;
    let end = values
        .iter()
        .position(|&v| !(v > floor))
        .unwrap_or(values.len());
    if end < 3 {
        return Err(Error::Fit(format!(
            "only {end} samples above the fit floor {floor:e}"
        )));
    }
    let t = &times[..end];
    let y: Vec<f64> = values[..end].iter().map(|v| -v.ln()).collect();
    let n = end as f64;
    let t_mean = t.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|ti| (ti - t_mean).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::Fit("fit window has zero time span".into()));
    }
    let sty: f64 = t
        .iter()
        .zip(&y)
        .map(|(ti, yi)| (ti - t_mean) * (yi - y_mean))
        .sum();
    let rate = sty / stt;
    let intercept = y_mean - rate * t_mean;
    let ss_res: f64 = t
        .iter()
        .zip(&y)
        .map(|(ti, yi)| (yi - intercept - rate * ti).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - y_mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(DecayFit {
        rate,
        intercept,
        r_squared,
        points: end,
        window_end: t[end - 1],
    })
}

/// Fits `A + B cos(omega T) + C sin(omega T)`, starting from the dominant
/// spectral frequency.
pub fn fit_single_cosine(times: &[f64], values: &[f64]) -> Result<CosineFit> {
    const MAX_ITER: usize = 100;
    check_samples(times, values)?;
    let mut omega = dominant_frequency(times, values)
        .ok_or_else(|| Error::Fit("curve has no oscillation to fit".into()))?;
    let n = times.len();
    let linear = |omega: f64| -> Option<DVector<f64>> {
        let a = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (omega * times[i]).cos(),
            _ => (omega * times[i]).sin(),
        });
        a.svd(true, true)
            .solve(&DVector::from_column_slice(values), 1e-14)
            .ok()
    };
    let mut p = linear(omega).ok_or_else(|| Error::Fit("singular linear system".into()))?;
    let mut iterations = 0;
    for iter in 1..=MAX_ITER {
        iterations = iter;
        let jac = DMatrix::from_fn(n, 4, |i, j| {
            let (s, c) = (omega * times[i]).sin_cos();
            match j {
                0 => 1.0,
                1 => c,
                2 => s,
                _ => times[i] * (p[2] * c - p[1] * s),
            }
        });
        let resid = DVector::from_fn(n, |i, _| {
            let (s, c) = (omega * times[i]).sin_cos();
            values[i] - (p[0] + p[1] * c + p[2] * s)
        });
        let step = jac
            .svd(true, true)
            .solve(&resid, 1e-14)
            .map_err(|e| Error::Fit(e.to_string()))?;
        p[0] += step[0];
        p[1] += step[1];
        p[2] += step[2];
        omega += step[3];
        if step[3].abs() <= 1e-15 * omega.abs() && step.rows(0, 3).amax() <= 1e-15 {
            break;
        }
    }
    if !(omega.is_finite()
        && omega > 0.0
        && omega < PI / uniform_step(times).unwrap_or(f64::MIN_POSITIVE))
    {
        return Err(Error::Fit(format!("frequency diverged to {omega}")));
    }
    let mut fit = CosineFit {
        omega,
        offset: p[0],
        cos_coeff: p[1],
        sin_coeff: p[2],
        max_residual: 0.0,
        iterations,
    };
    fit.max_residual = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| (v - fit.eval(t)).abs())
        .fold(0.0, f64::max);
    Ok(fit)
}

/// All features of one sampled curve. Undefined features are `None`.
pub fn extract_features(
    times: &[f64],
    values: &[f64],
    thresholds: &Thresholds,
) -> Result<CurveFeatures> {
    check_samples(times, values)?;
    if values.is_empty() {
        return Err(Error::InvalidInput("empty curve".into()));
    }
    let collapse = collapse_index(values, thresholds.collapse)
        .map(|i| interpolate_crossing(times, values, i, thresholds.collapse));
    let flat = values.iter().all(|v| (v - values[0]).abs() < FLAT_TOL);
    Ok(CurveFeatures {
        dominant_frequency: dominant_frequency(times, values),
        first_minimum_time: first_minimum_time(times, values),
        collapse_time: collapse,
        revival_time: revival_time(times, values, thresholds),
        decay: if flat {
            None
        } else {
            fit_decay(times, values, thresholds.fit_floor).ok()
        },
        min_factor: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max_factor: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn cos_squared_frequency() {
        let t = grid(400.0, 4001);
        let omega = 0.37;
        let v: Vec<f64> = t.iter().map(|x| (omega * x).cos().powi(2)).collect();
        let f = dominant_frequency(&t, &v).unwrap();
        let bin = TAU / 400.0;
        assert!((f - 2.0 * omega).abs() < bin, "{f}");
    }

    #[test]
    fn constant_curve_has_no_features() {
        let t = grid(10.0, 101);
        let v = vec![1.0; 101];
        let feat = extract_features(&t, &v, &Thresholds::default()).unwrap();
        assert_eq!(feat.dominant_frequency, None);
        assert_eq!(feat.revival_time, None);
        assert_eq!(feat.collapse_time, None);
        assert_eq!(feat.first_minimum_time, None);
        assert_eq!(feat.decay, None);
    }

    #[test]
    fn exponential_rate_exact() {
        let t = grid(50.0, 501);
        let v: Vec<f64> = t.iter().map(|x| (-0.083 * x).exp()).collect();
        let fit = fit_decay(&t, &v, 1e-4).unwrap();
        assert!((fit.rate - 0.083).abs() < 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn decay_window_stops_at_floor() {
        let t = grid(200.0, 201);
        let v: Vec<f64> = t.iter().map(|x| (-0.1 * x).exp()).collect();
        let fit = fit_decay(&t, &v, 1e-4).unwrap();
        // exp(-0.1 T) = 1e-4 at T = 92.1
        assert_eq!(fit.window_end, 92.0);
        assert!(fit_decay(&t[..2], &v[..2], 1e-4).is_err());
    }

    #[test]
    fn cosine_fit_recovers_parameters() {
        let t = grid(300.0, 3001);
        let v: Vec<f64> = t
            .iter()
            .map(|x| 0.6 + 0.3 * (0.2813 * x).cos() - 0.1 * (0.2813 * x).sin())
            .collect();
        let fit = fit_single_cosine(&t, &v).unwrap();
        assert!((fit.omega - 0.2813).abs() < 1e-12);
        assert!((fit.offset - 0.6).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn first_minimum_refined() {
        let t = grid(10.0, 41);
        let v: Vec<f64> = t.iter().map(|x| (x - 3.1).powi(2)).collect();
        assert!((first_minimum_time(&t, &v).unwrap() - 3.1).abs() < 1e-12);
    }

    #[test]
    fn revival_needs_collapse() {
        let t = grid(20.0, 2001);
        // cos^2 never below 0.1 if offset keeps it high
        let high: Vec<f64> = t.iter().map(|x| 0.8 + 0.2 * x.cos()).collect();
        assert_eq!(revival_time(&t, &high, &Thresholds::default()), None);
        let full: Vec<f64> = t.iter().map(|x| (0.5 * x).cos().powi(2)).collect();
        let r = revival_time(&t, &full, &Thresholds::default()).unwrap();
        assert!((r - TAU).abs() < 1e-6, "{r}");
    }

    #[test]
    fn deterministic() {
        let t = grid(100.0, 1001);
        let v: Vec<f64> = t
            .iter()
            .map(|x| (-0.01 * x).exp() * (0.3 * x).cos().powi(2))
            .collect();
        let a = extract_features(&t, &v, &Thresholds::default()).unwrap();
        let b = extract_features(&t, &v, &Thresholds::default()).unwrap();
        assert_eq!(a, b);
    }
}
