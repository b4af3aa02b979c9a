//! Resolvent diagonal elements `(N|G(z)|N)`, `G(z) = (z - H)^-1`, and what
//! follows from them: resonant closed forms, numeric Fourier inversion back
//! to the propagator, and the continuum (Wigner–Weisskopf) decay law.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{DecoherenceCurve, Method};
use crate::model::{ModelParams, SpectralDensity};
use crate::quadrature::{integrate, Tolerance};

/// Detunings below this count as exact resonance.
pub const RESONANCE_TOL: f64 = 1e-12;

/// One term `weight / (z - position)` of a self-energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergyTerm {
    pub weight: f64,
    pub position: f64,
}

/// `1 / (z - center - sum_j weight_j / (z - position_j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventDiagonal {
    pub center: f64,
    pub self_energy: Vec<SelfEnergyTerm>,
    /// Real pole locations, when known in closed form.
    pub poles_hint: Option<Vec<f64>>,
    pub params_digest: String,
}

impl ResolventDiagonal {
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        let sigma: Complex64 = self
            .self_energy
            .iter()
            .map(|t| t.weight / (z - t.position))
            .sum();
        1.0 / (z - self.center - sigma)
    }

    /// Sum of self-energy weights, i.e. the second moment of the spectral
    /// measure about `center`.
    pub fn total_weight(&self) -> f64 {
        self.self_energy.iter().map(|t| t.weight).sum()
    }

    /// Interval guaranteed to contain every pole (Gershgorin discs of the
    /// underlying arrow matrix).
    pub fn pole_bounds(&self) -> (f64, f64) {
        let radius: f64 = self.self_energy.iter().map(|t| t.weight.sqrt()).sum();
        let mut lo = self.center - radius;
        let mut hi = self.center + radius;
        for t in &self.self_energy {
            lo = lo.min(t.position - t.weight.sqrt());
            hi = hi.max(t.position + t.weight.sqrt());
        }
        (lo, hi)
    }

    /// Poles when every self-energy term sits at `center`: then
    /// `(z - E)^2 = W` with `W` the total weight.
    pub fn resonant_poles(&self) -> Option<(f64, f64)> {
        let degenerate = self.self_energy.iter().all(|t| {
            (t.position - self.center).abs() <= RESONANCE_TOL * self.center.abs().max(1.0)
        });
        degenerate.then(|| {
            let half_split = self.total_weight().sqrt();
            (self.center - half_split, self.center + half_split)
        })
    }
}

fn single_mode_parts(params: &ModelParams) -> Result<(f64, f64, f64)> {
    match params.modes.as_slice() {
        [m] => Ok((params.omega_e, m.omega, m.coupling)),
        other => Err(Error::InvalidInput(format!(
            "single-mode resolvent needs exactly one reservoir mode, got {}",
            other.len()
        ))),
    }
}

/// `(N|G(z)|N) = 1 / (z - E_N - 2N d^2/(z - E_N + Delta) - 2(N+1) d^2/(z - E_N - Delta))`
/// with `E_N = omega_e + N omega_j` and `Delta = omega_j - omega_e`.
pub fn single_mode_resolvent(
    params: &ModelParams,
    photon_number: u32,
) -> Result<ResolventDiagonal> {
    let (we, wj, d) = single_mode_parts(params)?;
    let n = photon_number as f64;
    let energy = we + n * wj;
    let detuning = wj - we;
    let mut self_energy = Vec::with_capacity(2);
    if photon_number > 0 {
        self_energy.push(SelfEnergyTerm {
            weight: 2.0 * n * d * d,
            position: energy - detuning,
        });
    }
    self_energy.push(SelfEnergyTerm {
        weight: 2.0 * (n + 1.0) * d * d,
        position: energy + detuning,
    });
    let mut res = ResolventDiagonal {
        center: energy,
        self_energy,
        poles_hint: None,
        params_digest: format!("{}/N={photon_number}", params.digest()),
    };
    if detuning.abs() <= RESONANCE_TOL {
        res.poles_hint = res.resonant_poles().map(|(a, b)| vec![a, b]);
    }
    Ok(res)
}

/// `(0|G(z)|0) = 1 / (z - omega_e - sum_j 2 d_j^2 / (z - omega_j))`.
pub fn multi_mode_resolvent(params: &ModelParams) -> Result<ResolventDiagonal> {
    if params.modes.is_empty() {
        return Err(Error::InvalidInput(
            "multi-mode resolvent needs at least one mode".into(),
        ));
    }
    Ok(ResolventDiagonal {
        center: params.omega_e,
        self_energy: params
            .modes
            .iter()
            .map(|m| SelfEnergyTerm {
                weight: 2.0 * m.coupling * m.coupling,
                position: m.omega,
            })
            .collect(),
        poles_hint: None,
        params_digest: params.digest(),
    })
}

/// Resonant decoherence factor `cos^2(Omega_N T)`, with `Omega_N` half the
/// splitting of the two poles of the single-mode resolvent at zero detuning
/// (`Omega_N = |d| sqrt(4N + 2)`).
pub fn resonant_closed_form(
    params: &ModelParams,
    photon_number: u32,
    times: &[f64],
) -> Result<DecoherenceCurve> {
    let (we, wj, _) = single_mode_parts(params)?;
    if (wj - we).abs() > RESONANCE_TOL {
        return Err(Error::InvalidInput(format!(
            "resonant closed form needs omega_j = omega_e, detuning is {}",
            wj - we
        )));
    }
    let res = single_mode_resolvent(params, photon_number)?;
    let (lo, hi) = res
        .resonant_poles()
        .expect("zero detuning gives degenerate self-energy");
    let omega = 0.5 * (hi - lo);
    Ok(DecoherenceCurve {
        times: times.to_vec(),
        factor: times.iter().map(|t| (omega * t).cos().powi(2)).collect(),
        method: Method::ClosedFormResonant,
        params_digest: res.params_digest,
    })
}

/// Candidate closed forms for the resonant single-mode factor. Only the
/// one derived from the resolvent's pole splitting agrees with exact
/// propagation; the others are kept so the disagreement stays testable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonantCandidate {
    /// `cos^2(|d| sqrt(4N+1) T)`
    SqrtFourNPlusOne,
    /// `cos^2(|d| sqrt(4N+2) T)`
    SqrtFourNPlusTwo,
    /// `cos^2((4N+1) d^2 T)`
    QuadraticInCoupling,
}

impl ResonantCandidate {
    pub const ALL: [ResonantCandidate; 3] = [
        ResonantCandidate::SqrtFourNPlusOne,
        ResonantCandidate::SqrtFourNPlusTwo,
        ResonantCandidate::QuadraticInCoupling,
    ];

    pub fn frequency(self, photon_number: u32, d: f64) -> f64 {
        let n = photon_number as f64;
        match self {
            ResonantCandidate::SqrtFourNPlusOne => d.abs() * (4.0 * n + 1.0).sqrt(),
            ResonantCandidate::SqrtFourNPlusTwo => d.abs() * (4.0 * n + 2.0).sqrt(),
            ResonantCandidate::QuadraticInCoupling => (4.0 * n + 1.0) * d * d,
        }
    }

    pub fn factor(self, photon_number: u32, d: f64, t: f64) -> f64 {
        (self.frequency(photon_number, d) * t).cos().powi(2)
    }

    pub fn formula(self) -> &'static str {
        match self {
            ResonantCandidate::SqrtFourNPlusOne => "cos^2(d sqrt(4N+1) T)",
            ResonantCandidate::SqrtFourNPlusTwo => "cos^2(d sqrt(4N+2) T)",
            ResonantCandidate::QuadraticInCoupling => "cos^2((4N+1) d^2 T)",
        }
    }
}

/// Settings for [`invert_fourier`].
#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    /// Contour height as a fraction of the spectral span.
    pub eta_fraction: f64,
    /// The integration window ends where `|integrand| < truncation * peak`.
    pub truncation: f64,
    /// Absolute tolerance on each amplitude.
    pub amplitude_tol: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            eta_fraction: 1e-3,
            truncation: 1e-12,
            amplitude_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedAmplitude {
    pub time: f64,
    pub amplitude: Complex64,
    /// Quadrature error estimate on `amplitude`.
    pub error: f64,
}

/// Contour geometry shared by every time sample.
struct Contour {
    center: f64,
    eta: f64,
    /// Depth of the reference pole `center - i kappa` used for tail subtraction.
    kappa: f64,
    second_moment: f64,
    inner: (f64, f64),
    half_width: f64,
}

impl Contour {
    fn new(res: &ResolventDiagonal, opts: &InversionOptions) -> Self {
        let (lo, hi) = res.pole_bounds();
        let span = (hi - lo).max(1e-2);
        let eta = opts.eta_fraction * span;
        let margin = 0.1 * span;
        let mut contour = Contour {
            center: res.center,
            eta,
            kappa: span,
            second_moment: res.total_weight(),
            inner: (lo - margin - res.center, hi + margin - res.center),
            half_width: 0.0,
        };
        let peak = {
            let (a, b) = contour.inner;
            let steps = ((b - a) / (0.5 * eta)).ceil() as usize;
            (0..=steps)
                .map(|i| {
                    contour
                        .remainder(res, a + (b - a) * i as f64 / steps as f64)
                        .norm()
                })
                .fold(0.0, f64::max)
        };
        let mut half_width = 2.0 * (contour.inner.1 - contour.inner.0).max(span);
        while (contour.remainder(res, half_width).norm() > opts.truncation * peak
            || contour.remainder(res, -half_width).norm() > opts.truncation * peak)
            && half_width < 1e8 * span
        {
            half_width *= 2.0;
        }
        contour.half_width = half_width;
        contour
    }

    /// `G - S` at `z = center + u + i eta`, where `S` matches the first three
    /// terms of the large-`z` expansion of `G` about `center - i kappa`.
    fn remainder(&self, res: &ResolventDiagonal, u: f64) -> Complex64 {
        let z = Complex64::new(self.center + u, self.eta);
        let w = Complex64::new(u, self.eta + self.kappa);
        let iw = 1.0 / w;
        let subtracted = iw
            + Complex64::new(0.0, self.kappa) * iw * iw
            + (self.second_moment - self.kappa * self.kappa) * iw * iw * iw;
        res.evaluate(z) - subtracted
    }

    /// Inverse transform of the subtracted terms (limit `T -> 0+` at `T = 0`).
    fn analytic_part(&self, t: f64) -> Complex64 {
        let poly =
            1.0 + self.kappa * t - 0.5 * (self.second_moment - self.kappa * self.kappa) * t * t;
        Complex64::from_polar((-self.kappa * t).exp(), -self.center * t) * poly
    }

    fn edges(&self, t: f64) -> Vec<f64> {
        let (a, b) = self.inner;
        let inner_panels = ((b - a) / self.eta).ceil().max(1.0) as usize;
        let outer_step = if t > 0.0 { (TAU / t).min(b - a) } else { b - a };
        let outer_panels = ((self.half_width - b.max(-a)) / outer_step).ceil().max(1.0) as usize;
        let left_start = -self.half_width;
        let mut edges = Vec::with_capacity(inner_panels + 2 * outer_panels + 1);
        for i in 0..outer_panels {
            edges.push(left_start + (a - left_start) * i as f64 / outer_panels as f64);
        }
        for i in 0..inner_panels {
            edges.push(a + (b - a) * i as f64 / inner_panels as f64);
        }
        for i in 0..=outer_panels {
            edges.push(b + (self.half_width - b) * i as f64 / outer_panels as f64);
        }
        edges
    }
}

fn check_inversion_times(times: &[f64]) -> Result<()> {
    match times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        Some(t) => Err(Error::InvalidInput(format!(
            "time {t} is not finite and >= 0"
        ))),
        None => Ok(()),
    }
}

/// Propagator diagonal `(N|U(T)|N) = (i / 2 pi) int dz e^{-izT} (N|G(z + i0)|N)`
/// evaluated numerically along the line `Im z = eta`.
///
/// The slowly decaying part of `G` is subtracted and transformed
/// analytically; the remainder falls off as `|z|^-4` and is integrated by
/// adaptive Gauss–Kronrod. Moving the contour to finite `eta` is exact for
/// `T >= 0` once the factor `e^{eta T}` is restored. This is a verification
/// route; [`crate::evolve`] is the production propagator.
pub fn invert_fourier_amplitudes(
    res: &ResolventDiagonal,
    times: &[f64],
    opts: &InversionOptions,
) -> Result<Vec<InvertedAmplitude>> {
    check_inversion_times(times)?;
    let contour = Contour::new(res, opts);
    times
        .par_iter()
        .map(|&t| {
            let scale = (contour.eta * t).exp() / TAU;
            let tol = Tolerance {
                abs: opts.amplitude_tol / scale,
                rel: 0.0,
                max_subdivisions: 200_000,
            };
            let integrand = |u: f64| Complex64::from_polar(1.0, -u * t) * contour.remainder(res, u);
            let q = integrate(integrand, &contour.edges(t), tol)?;
            let numeric = Complex64::new(0.0, scale)
                * Complex64::from_polar(1.0, -contour.center * t)
                * q.value;
            let tail = (contour.half_width).powi(-3) * contour.kappa.powi(3) * scale;
            Ok(InvertedAmplitude {
                time: t,
                amplitude: contour.analytic_part(t) + numeric,
                error: q.error * scale + tail,
            })
        })
        .collect()
}

pub fn invert_fourier(
    res: &ResolventDiagonal,
    times: &[f64],
    opts: &InversionOptions,
) -> Result<DecoherenceCurve> {
    let samples = invert_fourier_amplitudes(res, times, opts)?;
    Ok(DecoherenceCurve {
        times: times.to_vec(),
        factor: samples.iter().map(|s| s.amplitude.norm_sqr()).collect(),
        method: Method::ResolventInversion,
        params_digest: res.params_digest.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerWeisskopfResult {
    /// Decay rate `4 pi rho(omega_e) d(omega_e)^2`.
    pub gamma_e: f64,
    /// Frequency shift `2 P int rho d^2 / (omega_e - omega)`.
    pub delta_e: f64,
    /// Estimated error on `delta_e`.
    pub delta_e_error: f64,
}

/// Continuum decay rate and frequency shift of `|1_g,1_e>` for a reservoir
/// with the given spectral density.
///
/// The principal value excises `(omega_e - eps, omega_e + eps)`
/// symmetrically, which leaves an error odd in `eps`; Richardson
/// extrapolation over `eps, eps/2, eps/4` removes the `eps` and `eps^3` terms.
pub fn wigner_weisskopf(sd: &SpectralDensity, omega_e: f64) -> Result<WignerWeisskopfResult> {
    if !sd.contains_interior(omega_e) {
        return Err(Error::InvalidInput(format!(
            "omega_e = {omega_e} is not inside the spectral support [{}, {}]",
            sd.support.0, sd.support.1
        )));
    }
    let (lo, hi) = sd.support;
    let gamma_e = 4.0 * PI * sd.rho(omega_e) * sd.coupling(omega_e).powi(2);

    let integrand = |w: f64| sd.rho(w) * sd.coupling(w).powi(2) / (omega_e - w);
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-12,
        max_subdivisions: 20_000,
    };
    let excised = |eps: f64| -> Result<(f64, f64)> {
        let left = integrate(integrand, &[lo, omega_e - eps], tol)?;
        let right = integrate(integrand, &[omega_e + eps, hi], tol)?;
        Ok((left.value + right.value, left.error + right.error))
    };
    let eps0 = 0.25 * (omega_e - lo).min(hi - omega_e);
    let (i1, e1) = excised(eps0)?;
    let (i2, e2) = excised(0.5 * eps0)?;
    let (i4, e4) = excised(0.25 * eps0)?;
    let r1 = 2.0 * i2 - i1;
    let r2 = 2.0 * i4 - i2;
    let pv = (8.0 * r2 - r1) / 7.0;
    let quad_err = 3.0 * (e1 + e2 + e4);
    let delta_e = 2.0 * pv;
    Ok(WignerWeisskopfResult {
        gamma_e,
        delta_e,
        delta_e_error: 2.0 * ((r2 - pv).abs() + quad_err),
    })
}

/// `exp(-gamma_e T)`.
pub fn exponential_law(ww: &WignerWeisskopfResult, times: &[f64]) -> Result<DecoherenceCurve> {
    if !(ww.gamma_e >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "decay rate {} is negative",
            ww.gamma_e
        )));
    }
    Ok(DecoherenceCurve {
        times: times.to_vec(),
        factor: times.iter().map(|t| (-ww.gamma_e * t).exp()).collect(),
        method: Method::WignerWeisskopf,
        params_digest: format!("gamma_e={:e}", ww.gamma_e),
    })
}

/// `4 pi d^2 / spacing`: continuum rate of an equally spaced, uniformly
/// coupled comb.
pub fn comb_decay_rate(coupling: f64, spacing: f64) -> f64 {
    4.0 * PI * coupling * coupling / spacing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{decoherence_factor, uniform_times};
    use crate::model::ReservoirMode;
    use crate::subspace::{build_multi_mode, build_single_mode};
    use nalgebra::DMatrix;

    /// Oracle: `[(z I - H)^-1]_{ii}` by dense LU solve.
    fn dense_diagonal(h: &DMatrix<Complex64>, i: usize, z: Complex64) -> Complex64 {
        let n = h.nrows();
        let a = DMatrix::from_fn(n, n, |r, c| if r == c { z - h[(r, c)] } else { -h[(r, c)] });
        let mut e = nalgebra::DVector::zeros(n);
        e[i] = Complex64::new(1.0, 0.0);
        a.lu().solve(&e).unwrap()[i]
    }

    fn off_axis_points() -> Vec<Complex64> {
        // Deterministic spread of points with |Im z| >= 0.1.
        (0..100)
            .map(|k| {
                let x = -2.0 + 14.0 * ((k as f64 * 0.618_033_988_75) % 1.0);
                let y = 0.1 + 3.0 * ((k as f64 * 0.414_213_562_37) % 1.0);
                Complex64::new(x, if k % 2 == 0 { y } else { -y })
            })
            .collect()
    }

    #[test]
    fn free_resolvent() {
        let res = single_mode_resolvent(&ModelParams::single_mode(1.0, 1.3, 0.0), 3).unwrap();
        let z = Complex64::new(2.0, 0.5);
        let want = 1.0 / (z - (1.0 + 3.0 * 1.3));
        assert!((res.evaluate(z) - want).norm() < 1e-15);
    }

    #[test]
    fn single_mode_matches_dense_solve() {
        for n in [0u32, 1, 2, 7] {
            let p = ModelParams::single_mode(1.0, 1.2, 0.07);
            let res = single_mode_resolvent(&p, n).unwrap();
            let s = build_single_mode(&p, n).unwrap();
            let i = s.index_of(s.initial_label()).unwrap();
            for z in off_axis_points() {
                let want = dense_diagonal(&s.hamiltonian, i, z);
                assert!((res.evaluate(z) - want).norm() <= 1e-10 * want.norm());
            }
        }
    }

    #[test]
    fn multi_mode_matches_dense_solve() {
        let modes = (0..9)
            .map(|j| ReservoirMode::new(0.6 + 0.1 * j as f64, 0.17))
            .collect();
        let p = ModelParams::new(1.0, modes);
        let res = multi_mode_resolvent(&p).unwrap();
        let s = build_multi_mode(&p).unwrap();
        for z in off_axis_points() {
            let want = dense_diagonal(&s.hamiltonian, 0, z);
            assert!((res.evaluate(z) - want).norm() <= 1e-10 * want.norm());
        }
    }

    #[test]
    fn one_mode_multi_is_vacuum_single() {
        let p = ModelParams::single_mode(1.0, 1.0, 0.07);
        let a = single_mode_resolvent(&p, 0).unwrap();
        let b = multi_mode_resolvent(&p).unwrap();
        for z in off_axis_points() {
            assert!((a.evaluate(z) - b.evaluate(z)).norm() < 1e-15);
        }
    }

    #[test]
    fn herglotz_sign() {
        let modes = (0..5)
            .map(|j| ReservoirMode::new(0.8 + 0.1 * j as f64, 0.1))
            .collect();
        let res = multi_mode_resolvent(&ModelParams::new(1.0, modes)).unwrap();
        assert!(res.evaluate(Complex64::new(1.0, 0.5)).im < 0.0);
        for z in off_axis_points() {
            assert!(res.evaluate(z).im * z.im < 0.0);
        }
    }

    #[test]
    fn resonant_poles_from_quadratic() {
        let d = 0.07;
        for n in [0u32, 1, 2, 7] {
            let res = single_mode_resolvent(&ModelParams::single_mode(1.0, 1.0, d), n).unwrap();
            let poles = res.poles_hint.clone().unwrap();
            let e = 1.0 + n as f64;
            let half = d * (4.0 * n as f64 + 2.0).sqrt();
            assert!((poles[0] - (e - half)).abs() < 1e-14);
            assert!((poles[1] - (e + half)).abs() < 1e-14);
            // The denominator vanishes there.
            for p in poles {
                let g = res.evaluate(Complex64::new(p, 1e-9));
                assert!(g.norm() > 1e6);
            }
        }
    }

    #[test]
    fn off_resonance_has_no_hint() {
        let res = single_mode_resolvent(&ModelParams::single_mode(1.0, 1.2, 0.07), 1).unwrap();
        assert!(res.poles_hint.is_none());
    }

    #[test]
    fn closed_form_first_zero() {
        let p = ModelParams::single_mode(1.0, 1.0, 0.07);
        let t0 = PI / (2.0 * 0.07 * 2f64.sqrt());
        assert!((t0 - 15.867).abs() < 1e-3);
        let curve = resonant_closed_form(&p, 0, &[0.0, t0]).unwrap();
        assert_eq!(curve.factor[0], 1.0);
        assert!(curve.factor[1] < 1e-28);
        // The exact propagation vanishes at the same time.
        let s = build_single_mode(&p, 0).unwrap();
        let exact = decoherence_factor(&s, &[t0]).unwrap();
        assert!(exact.factor[0] < 1e-12);
    }

    #[test]
    fn closed_form_matches_evolution() {
        let times = uniform_times(200.0, 2001);
        for n in [0u32, 1, 2, 7] {
            let p = ModelParams::single_mode(1.0, 1.0, 0.07);
            let closed = resonant_closed_form(&p, n, &times).unwrap();
            let exact = decoherence_factor(&build_single_mode(&p, n).unwrap(), &times).unwrap();
            assert!(closed.max_deviation(&exact) < 1e-10);
        }
    }

    #[test]
    fn closed_form_requires_resonance() {
        let p = ModelParams::single_mode(1.0, 1.2, 0.07);
        assert!(resonant_closed_form(&p, 1, &[0.0]).is_err());
    }

    #[test]
    fn only_the_resolvent_candidate_matches() {
        let times = uniform_times(200.0, 801);
        let d = 0.07;
        for n in [0u32, 1, 2, 7] {
            let p = ModelParams::single_mode(1.0, 1.0, d);
            let exact = decoherence_factor(&build_single_mode(&p, n).unwrap(), &times).unwrap();
            for cand in ResonantCandidate::ALL {
                let dev = times
                    .iter()
                    .zip(&exact.factor)
                    .map(|(t, f)| (cand.factor(n, d, *t) - f).abs())
                    .fold(0.0, f64::max);
                let matches = dev < 1e-8;
                assert_eq!(
                    matches,
                    cand == ResonantCandidate::SqrtFourNPlusTwo,
                    "{cand:?} N={n}"
                );
            }
        }
    }

    #[test]
    fn inversion_of_free_pole() {
        let res = single_mode_resolvent(&ModelParams::single_mode(1.0, 1.2, 0.0), 2).unwrap();
        let times = uniform_times(300.0, 7);
        let curve = invert_fourier(&res, &times, &InversionOptions::default()).unwrap();
        for f in curve.factor {
            assert!((f - 1.0).abs() < 1e-4, "{f}");
        }
    }

    #[test]
    fn inversion_matches_closed_form_at_resonance() {
        let p = ModelParams::single_mode(1.0, 1.0, 0.07);
        let times = uniform_times(100.0, 11);
        let res = single_mode_resolvent(&p, 1).unwrap();
        let inv = invert_fourier(&res, &times, &InversionOptions::default()).unwrap();
        let closed = resonant_closed_form(&p, 1, &times).unwrap();
        assert!(inv.max_deviation(&closed) < 1e-4);
        assert_eq!(inv.method, Method::ResolventInversion);
    }

    #[test]
    fn inversion_amplitude_has_right_phase() {
        let p = ModelParams::single_mode(1.0, 1.2, 0.07);
        let s = build_single_mode(&p, 2).unwrap();
        let spec = crate::evolve::eigendecompose(&s).unwrap();
        let res = single_mode_resolvent(&p, 2).unwrap();
        let times = [0.0, 3.0, 47.5];
        let got = invert_fourier_amplitudes(&res, &times, &InversionOptions::default()).unwrap();
        for g in got {
            let want = spec.amplitude(1, 1, g.time);
            assert!(
                (g.amplitude - want).norm() < 1e-6,
                "{:?} vs {want}",
                g.amplitude
            );
            assert!(g.error < 1e-5);
        }
    }

    #[test]
    fn flat_spectrum_rate() {
        let sd = SpectralDensity::flat(10.0, 0.02, (0.0, 2.0)).unwrap();
        let ww = wigner_weisskopf(&sd, 1.0).unwrap();
        assert!((ww.gamma_e - 4.0 * PI * 10.0 * 0.0004).abs() < 1e-15);
        assert!((ww.gamma_e - 0.050265).abs() < 1e-6);
        assert!(ww.delta_e.abs() < 1e-8);
    }

    #[test]
    fn asymmetric_flat_shift() {
        let (rho, d, we) = (10.0, 0.02, 1.0);
        for (a, b) in [(0.5, 1.0), (0.9, 0.3), (0.2, 0.7)] {
            let sd = SpectralDensity::flat(rho, d, (we - a, we + b)).unwrap();
            let ww = wigner_weisskopf(&sd, we).unwrap();
            let want = 2.0 * rho * d * d * (a / b).ln();
            assert!((ww.delta_e - want).abs() < 1e-6, "{} vs {want}", ww.delta_e);
        }
    }

    /// Smooth profile with a closed-form principal value:
    /// P int_{-1}^{1} (1 + u + u^2 + u^3) / u du = 2 + 2/3 (with u = omega_e - omega).
    #[test]
    fn smooth_profile_shift() {
        let we = 1.0;
        let sd = SpectralDensity::new(
            move |w| {
                let u = we - w;
                1.0 + u + u * u + u * u * u
            },
            |_| 1.0,
            (0.0, 2.0),
        )
        .unwrap();
        let ww = wigner_weisskopf(&sd, we).unwrap();
        assert!(
            (ww.delta_e - 2.0 * (2.0 + 2.0 / 3.0)).abs() < 1e-8,
            "{}",
            ww.delta_e
        );
    }

    #[test]
    fn reflected_spectrum_flips_shift() {
        let we = 1.0;
        let a = SpectralDensity::flat(5.0, 0.1, (we - 0.3, we + 0.8)).unwrap();
        let b = SpectralDensity::flat(5.0, 0.1, (we - 0.8, we + 0.3)).unwrap();
        let (da, db) = (
            wigner_weisskopf(&a, we).unwrap().delta_e,
            wigner_weisskopf(&b, we).unwrap().delta_e,
        );
        assert!((da + db).abs() < 1e-10);
        assert!(da.abs() > 1e-3);
    }

    #[test]
    fn omega_e_outside_support() {
        let sd = SpectralDensity::flat(10.0, 0.02, (1.0, 2.0)).unwrap();
        assert!(wigner_weisskopf(&sd, 1.0).is_err());
        assert!(wigner_weisskopf(&sd, 2.5).is_err());
    }

    #[test]
    fn exponential_law_values() {
        let ww = WignerWeisskopfResult {
            gamma_e: 0.0,
            delta_e: 0.0,
            delta_e_error: 0.0,
        };
        assert!(exponential_law(&ww, &[0.0, 10.0])
            .unwrap()
            .factor
            .iter()
            .all(|&f| f == 1.0));
        let ww = WignerWeisskopfResult {
            gamma_e: 0.25,
            ..ww
        };
        let curve = exponential_law(&ww, &[4.0]).unwrap();
        assert!((curve.factor[0] - (-1.0f64).exp()).abs() < 1e-15);
        let bad = WignerWeisskopfResult {
            gamma_e: -1.0,
            ..ww
        };
        assert!(exponential_law(&bad, &[0.0]).is_err());
    }

    #[test]
    fn mode_count_checks() {
        let empty = ModelParams::new(1.0, vec![]);
        assert!(single_mode_resolvent(&empty, 0).is_err());
        assert!(multi_mode_resolvent(&empty).is_err());
    }
}
