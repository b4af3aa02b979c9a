//! Canned scans: the single-mode photon-number series, the multi-mode comb
//! collapse/revival series, and the continuum-limit decay check.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{decoherence_from_row, propagate, uniform_times, DecoherenceCurve};
use crate::features::{
    extract_features, fit_decay, fit_single_cosine, CosineFit, CurveFeatures, Thresholds,
};
use crate::model::{build_comb, validated, CombSpec, ModelParams};
use crate::resolvent::comb_decay_rate;
use crate::subspace::{build_multi_mode, build_single_mode, SubspaceSystem};

pub const FIG1_OMEGA_E: f64 = 1.0;
pub const FIG1_OMEGA_J: f64 = 1.2;
pub const FIG1_COUPLING: f64 = 0.07;
pub const FIG1_PHOTON_NUMBERS: [u32; 4] = [0, 1, 2, 7];
pub const FIG1_T_MAX: f64 = 800.0;
pub const FIG1_SAMPLES: usize = 4096;

pub const FIG2_OMEGA_E: f64 = 1.0;
pub const FIG2_COUPLING: f64 = 0.17;
pub const FIG2_HALF_BANDWIDTH: f64 = 0.4;
pub const FIG2_MODE_COUNTS: [usize; 4] = [3, 5, 7, 9];
pub const FIG2_T_MAX: f64 = 200.0;
pub const FIG2_SAMPLES: usize = 20_001;

/// Continuum sweep: `omega_e` sits well above the widest band.
pub const CONTINUUM_OMEGA_E: f64 = 4.0;
/// `4 pi rho d^2` at `rho = 20`, `d = 0.02`.
pub const CONTINUUM_GAMMA: f64 = 4.0 * PI * 20.0 * 0.0004;
pub const CONTINUUM_SPACINGS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
/// Half-bandwidth times spacing; `W = 0.9` at `delta = 0.05`.
pub const CONTINUUM_BAND_PRODUCT: f64 = 0.045;
pub const CONTINUUM_SAMPLES: usize = 2049;

pub fn figure1_times() -> Vec<f64> {
    uniform_times(FIG1_T_MAX, FIG1_SAMPLES)
}

pub fn figure2_times() -> Vec<f64> {
    uniform_times(FIG2_T_MAX, FIG2_SAMPLES)
}

/// One curve of a scan together with the parameters that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanCurve {
    pub label: String,
    pub params: ModelParams,
    pub photon_number: Option<u32>,
    pub comb: Option<CombSpec>,
    pub curve: DecoherenceCurve,
    /// `max_T |sum_M |(M|U(T)|N)|^2 - 1|`.
    pub norm_deviation: f64,
    pub features: CurveFeatures,
    pub cosine_fit: Option<CosineFit>,
}

/// Fitted decay of one comb against the Wigner-Weisskopf rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuumPoint {
    pub label: String,
    pub comb: CombSpec,
    pub spacing: f64,
    pub density: f64,
    pub gamma_ww: f64,
    /// `2 pi / spacing`.
    pub rephasing_time: f64,
    pub gamma_fit: Option<f64>,
    pub relative_error: Option<f64>,
    pub r_squared: Option<f64>,
    pub window_end: Option<f64>,
    /// Fitted rate with all couplings divided by `sqrt 2`.
    pub gamma_fit_scaled: Option<f64>,
    pub stimulation_ratio: Option<f64>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanResult {
    pub label: String,
    pub thresholds: Thresholds,
    pub curves: Vec<ScanCurve>,
    pub continuum: Vec<ContinuumPoint>,
}

fn evolve_curve(
    label: String,
    system: &SubspaceSystem,
    comb: Option<CombSpec>,
    times: &[f64],
    thresholds: &Thresholds,
) -> Result<ScanCurve> {
    let row = propagate(system, system.initial_label(), times)?;
    let curve = decoherence_from_row(system, &row);
    let features = extract_features(&curve.times, &curve.factor, thresholds)?;
    Ok(ScanCurve {
        label,
        params: system.params.clone(),
        photon_number: system.photon_number,
        comb,
        norm_deviation: row.norm_deviation(),
        curve,
        features,
        cosine_fit: None,
    })
}

/// Single mode, `omega_j - omega_e = 0.20`, `d = 0.07`, `N = 0, 1, 2, 7`.
/// The `N = 0` curve also carries a single-cosine fit.
pub fn figure1_scan(times: &[f64], thresholds: &Thresholds) -> Result<ScanResult> {
    let params = validated(ModelParams::single_mode(
        FIG1_OMEGA_E,
        FIG1_OMEGA_J,
        FIG1_COUPLING,
    ))?;
    let curves = FIG1_PHOTON_NUMBERS
        .par_iter()
        .map(|&n| {
            let system = build_single_mode(&params, n)?;
            let mut curve = evolve_curve(format!("fig1_N{n}"), &system, None, times, thresholds)?;
            if n == 0 {
                curve.cosine_fit =
                    Some(fit_single_cosine(&curve.curve.times, &curve.curve.factor)?);
            }
            Ok(curve)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        label: "fig1".into(),
        thresholds: *thresholds,
        curves,
        continuum: Vec::new(),
    })
}

/// Where the system frequency sits relative to the comb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CombPlacement {
    /// Comb centered on `omega_e`; odd counts put a mode on resonance.
    #[default]
    OnGrid,
    /// Comb shifted by half a spacing.
    OffGrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Figure2Options {
    pub omega_e: f64,
    pub coupling: f64,
    pub half_bandwidth: f64,
    pub counts: Vec<usize>,
    pub placement: CombPlacement,
    pub thresholds: Thresholds,
}

impl Default for Figure2Options {
    fn default() -> Self {
        Self {
            omega_e: FIG2_OMEGA_E,
            coupling: FIG2_COUPLING,
            half_bandwidth: FIG2_HALF_BANDWIDTH,
            counts: FIG2_MODE_COUNTS.to_vec(),
            placement: CombPlacement::OnGrid,
            thresholds: Thresholds::default(),
        }
    }
}

impl Figure2Options {
    pub fn comb(&self, count: usize) -> CombSpec {
        let mut spec = CombSpec {
            center: self.omega_e,
            half_bandwidth: self.half_bandwidth,
            count,
            coupling: self.coupling,
        };
        if self.placement == CombPlacement::OffGrid {
            spec.center += 0.5 * spec.spacing().unwrap_or(0.0);
        }
        spec
    }
}

/// Equally coupled combs of fixed bandwidth and growing mode count, vacuum
/// reservoir.
pub fn figure2_scan(times: &[f64], options: &Figure2Options) -> Result<ScanResult> {
    let curves = options
        .counts
        .par_iter()
        .map(|&count| {
            let comb = options.comb(count);
            let params = validated(ModelParams::new(options.omega_e, build_comb(&comb)?))?;
            let system = build_multi_mode(&params)?;
            evolve_curve(
                format!("fig2_M{count}"),
                &system,
                Some(comb),
                times,
                &options.thresholds,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        label: "fig2".into(),
        thresholds: options.thresholds,
        curves,
        continuum: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumSweepPoint {
    pub spacing: f64,
    pub half_bandwidth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuumOptions {
    pub omega_e: f64,
    /// Target `4 pi rho d^2`; each comb's coupling is chosen to hit it.
    pub gamma_target: f64,
    pub sweep: Vec<ContinuumSweepPoint>,
    pub samples: usize,
    /// Fit window as a fraction of the rephasing time `2 pi / spacing`.
    pub window_fraction: f64,
    pub thresholds: Thresholds,
}

impl Default for ContinuumOptions {
    fn default() -> Self {
        Self {
            omega_e: CONTINUUM_OMEGA_E,
            gamma_target: CONTINUUM_GAMMA,
            sweep: CONTINUUM_SPACINGS
                .iter()
                .map(|&spacing| ContinuumSweepPoint {
                    spacing,
                    half_bandwidth: CONTINUUM_BAND_PRODUCT / spacing,
                })
                .collect(),
            samples: CONTINUUM_SAMPLES,
            window_fraction: 0.5,
            thresholds: Thresholds::default(),
        }
    }
}

impl ContinuumOptions {
    /// Comb for one sweep point, with the count rounded so the spacing is
    /// as close as possible to the requested one.
    pub fn comb(&self, point: &ContinuumSweepPoint) -> Result<CombSpec> {
        if !(point.spacing > 0.0 && point.half_bandwidth >= point.spacing) {
            return Err(Error::InvalidInput(format!(
                "sweep point needs 0 < spacing <= half-bandwidth, got {point:?}"
            )));
        }
        let count = (2.0 * point.half_bandwidth / point.spacing).round() as usize + 1;
        Ok(CombSpec {
            center: self.omega_e,
            half_bandwidth: point.half_bandwidth,
            count,
            coupling: (self.gamma_target * point.spacing / (4.0 * PI)).sqrt(),
        })
    }
}

fn fitted_rate(params: &ModelParams, times: &[f64], floor: f64) -> Result<(f64, f64, f64)> {
    let system = build_multi_mode(params)?;
    let row = propagate(&system, system.initial_label(), times)?;
    let curve = decoherence_from_row(&system, &row);
    let fit = fit_decay(&curve.times, &curve.factor, floor)?;
    Ok((fit.rate, fit.r_squared, fit.window_end))
}

/// Fits the decay of one comb over `[0, window]` and compares it with
/// `4 pi rho d^2`; also fits the same comb with couplings divided by `sqrt 2`.
pub fn continuum_point(
    label: String,
    comb: CombSpec,
    omega_e: f64,
    window: f64,
    samples: usize,
    thresholds: &Thresholds,
) -> Result<ContinuumPoint> {
    let spacing = comb
        .spacing()
        .ok_or_else(|| Error::InvalidInput("continuum comb needs at least two modes".into()))?;
    let params = validated(ModelParams::new(omega_e, build_comb(&comb)?))?;
    let gamma_ww = comb_decay_rate(comb.coupling, spacing);
    let times = uniform_times(window, samples);
    let mut point = ContinuumPoint {
        label,
        comb,
        spacing,
        density: 1.0 / spacing,
        gamma_ww,
        rephasing_time: TAU / spacing,
        gamma_fit: None,
        relative_error: None,
        r_squared: None,
        window_end: None,
        gamma_fit_scaled: None,
        stimulation_ratio: None,
        fit_error: None,
    };
    match fitted_rate(&params, &times, thresholds.fit_floor) {
        Ok((rate, r2, end)) => {
            point.gamma_fit = Some(rate);
            point.relative_error = Some((rate - gamma_ww).abs() / gamma_ww);
            point.r_squared = Some(r2);
            point.window_end = Some(end);
        }
        Err(Error::Fit(msg)) => point.fit_error = Some(msg),
        Err(e) => return Err(e),
    }
    match fitted_rate(
        &params.scale_couplings(std::f64::consts::FRAC_1_SQRT_2),
        &times,
        thresholds.fit_floor,
    ) {
        Ok((rate, _, _)) => {
            point.gamma_fit_scaled = Some(rate);
            point.stimulation_ratio = point.gamma_fit.map(|g| g / rate);
        }
        Err(Error::Fit(msg)) => {
            point.fit_error.get_or_insert(format!("scaled comb: {msg}"));
        }
        Err(e) => return Err(e),
    }
    Ok(point)
}

/// Fitted decay rate against `4 pi rho d^2` over a sweep of comb densities.
pub fn continuum_check(options: &ContinuumOptions) -> Result<ScanResult> {
    let continuum = options
        .sweep
        .par_iter()
        .map(|point| {
            let comb = options.comb(point)?;
            let spacing = comb.spacing().unwrap_or(point.spacing);
            continuum_point(
                format!("continuum_delta{}", point.spacing),
                comb,
                options.omega_e,
                options.window_fraction * TAU / spacing,
                options.samples,
                &options.thresholds,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        label: "continuum".into(),
        thresholds: options.thresholds,
        curves: Vec::new(),
        continuum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure1_structure() {
        let scan = figure1_scan(&figure1_times(), &Thresholds::default()).unwrap();
        assert_eq!(scan.curves.len(), 4);
        for c in &scan.curves {
            assert!(c.norm_deviation < 1e-10);
            assert!(c.features.min_factor > 0.0);
            assert!(c
                .curve
                .factor
                .iter()
                .all(|f| (-1e-12..=1.0 + 1e-12).contains(f)));
        }
        let freqs: Vec<f64> = scan
            .curves
            .iter()
            .map(|c| c.features.dominant_frequency.unwrap())
            .collect();
        assert!(freqs.windows(2).all(|w| w[1] > w[0]), "{freqs:?}");
        assert!(scan.curves[0].cosine_fit.unwrap().max_residual < 1e-8);
    }

    #[test]
    fn vacuum_frequency_is_rabi() {
        let scan = figure1_scan(&figure1_times(), &Thresholds::default()).unwrap();
        // Two-level Rabi frequency sqrt(Delta^2 + 4 * 2 d^2).
        let rabi = (0.2f64.powi(2) + 8.0 * FIG1_COUPLING.powi(2)).sqrt();
        let fit = scan.curves[0].cosine_fit.unwrap();
        assert!((fit.omega - rabi).abs() < 1e-10, "{} vs {rabi}", fit.omega);
    }

    #[test]
    fn off_grid_shifts_comb() {
        let opts = Figure2Options {
            placement: CombPlacement::OffGrid,
            ..Default::default()
        };
        let c = opts.comb(5);
        assert!((c.center - 1.1).abs() < 1e-15);
    }

    #[test]
    fn figure2_collapse_non_increasing() {
        let scan = figure2_scan(&figure2_times(), &Figure2Options::default()).unwrap();
        let collapse: Vec<f64> = scan
            .curves
            .iter()
            .map(|c| c.features.collapse_time.unwrap())
            .collect();
        assert!(
            collapse.windows(2).all(|w| w[1] <= w[0] + 1e-9),
            "{collapse:?}"
        );
        for c in &scan.curves {
            assert!(c.norm_deviation < 1e-10);
        }
    }

    #[test]
    fn continuum_default_density() {
        let opts = ContinuumOptions::default();
        let comb = opts.comb(&opts.sweep[1]).unwrap();
        assert_eq!(comb.count, 37);
        assert!((comb.coupling - 0.02).abs() < 1e-12);
        let p = continuum_point(
            "t".into(),
            comb,
            opts.omega_e,
            0.5 * TAU / 0.05,
            2049,
            &Thresholds::default(),
        )
        .unwrap();
        assert!(p.relative_error.unwrap() < 0.05);
        assert!(p.r_squared.unwrap() > 0.99);
    }

    #[test]
    fn early_revival_reported_not_fatal() {
        let comb = CombSpec {
            center: 1.0,
            half_bandwidth: 0.4,
            count: 5,
            coupling: 0.02,
        };
        let thresholds = Thresholds {
            fit_floor: 2.0,
            ..Default::default()
        };
        let p = continuum_point("t".into(), comb, 1.0, 10.0, 101, &thresholds).unwrap();
        assert!(p.gamma_fit.is_none());
        assert!(p.fit_error.is_some());
    }
}
