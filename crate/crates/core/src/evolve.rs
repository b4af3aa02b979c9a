//! Exact unitary propagation on an invariant subspace.
//!
//! `U(T) = V exp(-i diag(lambda) T) V^dag` from a full Hermitian
//! eigendecomposition, so every time sample is exact to machine precision
//! and no step-size control is involved.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::{hermiticity_deviation, AtomState, BasisLabel, SubspaceSystem};

pub const DEFAULT_SAMPLES: usize = 2048;
/// Minimum number of samples per shortest oscillation period of a curve.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 20.0;
/// Tolerance for `sum_M |(M|U|N)|^2 = 1`.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Eigen-pairs of a Hermitian matrix: `H = V diag(lambda) V^dag`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    pub eigenvectors: DMatrix<Complex64>,
}

impl Spectrum {
    /// `<row|U(t)|col>`, valid for any real `t`.
    pub fn amplitude(&self, row: usize, col: usize, t: f64) -> Complex64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &lambda)| {
                self.eigenvectors[(row, k)]
                    * self.eigenvectors[(col, k)].conj()
                    * Complex64::from_polar(1.0, -lambda * t)
            })
            .sum()
    }

    /// Largest eigenvalue gap, which sets the fastest oscillation in any
    /// propagator element.
    pub fn spread(&self) -> f64 {
        let lo = self
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// `max |H V - V diag(lambda)|`.
    pub fn residual(&self, h: &DMatrix<Complex64>) -> f64 {
        let hv = h * &self.eigenvectors;
        let mut worst = 0.0f64;
        for k in 0..self.eigenvalues.len() {
            for i in 0..h.nrows() {
                let r = hv[(i, k)] - self.eigenvectors[(i, k)] * self.eigenvalues[k];
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    /// `max |V^dag V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        let mut worst = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - want).norm());
            }
        }
        worst
    }
}

pub fn eigendecompose_matrix(h: &DMatrix<Complex64>) -> Result<Spectrum> {
    if h.nrows() != h.ncols() {
        return Err(Error::InvalidInput("Hamiltonian must be square".into()));
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let deviation = hermiticity_deviation(h);
    if deviation > crate::subspace::HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::new(h.clone());
    Ok(Spectrum {
        eigenvalues: eig.eigenvalues.iter().cloned().collect(),
        eigenvectors: eig.eigenvectors,
    })
}

pub fn eigendecompose(system: &SubspaceSystem) -> Result<Spectrum> {
    eigendecompose_matrix(&system.hamiltonian)
}

/// `n` uniform samples on `[0, t_max]`, both ends included.
pub fn uniform_times(t_max: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    match times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        Some(t) => Err(Error::InvalidInput(format!(
            "time {t} is not finite and >= 0"
        ))),
        None => Ok(()),
    }
}

/// Returns a warning when a grid has fewer than [`MIN_SAMPLES_PER_PERIOD`]
/// samples across the shortest period `2 pi / spread` of the spectrum.
pub fn sampling_warning(spectrum: &Spectrum, times: &[f64]) -> Option<String> {
    let spread = spectrum.spread();
    if times.len() < 2 || spread <= 0.0 {
        return None;
    }
    let step = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let period = TAU / spread;
    let per_period = period / step;
    (per_period < MIN_SAMPLES_PER_PERIOD).then(|| {
        format!(
            "time grid has {per_period:.1} samples per shortest period {period:.4}; \
             at least {MIN_SAMPLES_PER_PERIOD} recommended"
        )
    })
}

/// Amplitudes `(M|U(T)|initial)` for every label `M` of a subspace.
#[derive(Debug, Clone)]
pub struct PropagatorRow {
    pub times: Vec<f64>,
    pub initial: BasisLabel,
    pub basis: Vec<BasisLabel>,
    /// Rows are times, columns follow `basis`.
    pub amplitudes: DMatrix<Complex64>,
}

impl PropagatorRow {
    pub fn column(&self, label: BasisLabel) -> Option<Vec<Complex64>> {
        let j = self.basis.iter().position(|&b| b == label)?;
        Some(self.amplitudes.column(j).iter().cloned().collect())
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        self.column(self.initial)
            .expect("initial label is in the basis")
    }

    /// `max_T |sum_M |(M|U(T)|N)|^2 - 1|`.
    pub fn norm_deviation(&self) -> f64 {
        self.amplitudes
            .row_iter()
            .map(|row| (row.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn weights_at(&self, row: usize) -> ReducedDensityWeights {
        let mut w = ReducedDensityWeights {
            p_upper: 0.0,
            p_mid: 0.0,
            p_lower: 0.0,
        };
        for (j, label) in self.basis.iter().enumerate() {
            let p = self.amplitudes[(row, j)].norm_sqr();
            match label.atom_state() {
                AtomState::Upper => w.p_upper += p,
                AtomState::Mid => w.p_mid += p,
                AtomState::Lower => w.p_lower += p,
            }
        }
        w
    }
}

pub fn propagate_with(
    system: &SubspaceSystem,
    spectrum: &Spectrum,
    initial: BasisLabel,
    times: &[f64],
) -> Result<PropagatorRow> {
    check_times(times)?;
    let col = system.index_of(initial)?;
    let dim = system.dim();
    // weight[m][k] = V[m,k] conj(V[col,k])
    let weights = DMatrix::from_fn(dim, dim, |m, k| {
        spectrum.eigenvectors[(m, k)] * spectrum.eigenvectors[(col, k)].conj()
    });
    let mut amplitudes = DMatrix::<Complex64>::zeros(times.len(), dim);
    let mut phases = vec![Complex64::new(0.0, 0.0); dim];
    for (i, &t) in times.iter().enumerate() {
        for (p, &lambda) in phases.iter_mut().zip(&spectrum.eigenvalues) {
            *p = Complex64::from_polar(1.0, -lambda * t);
        }
        for m in 0..dim {
            amplitudes[(i, m)] = (0..dim).map(|k| weights[(m, k)] * phases[k]).sum();
        }
    }
    Ok(PropagatorRow {
        times: times.to_vec(),
        initial,
        basis: system.basis.clone(),
        amplitudes,
    })
}

pub fn propagate(
    system: &SubspaceSystem,
    initial: BasisLabel,
    times: &[f64],
) -> Result<PropagatorRow> {
    let spectrum = eigendecompose(system)?;
    if let Some(w) = sampling_warning(&spectrum, times) {
        log::warn!("{w}");
    }
    propagate_with(system, &spectrum, initial, times)
}

/// Which computation produced a decoherence curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Evolution,
    ResolventInversion,
    ClosedFormResonant,
    WignerWeisskopf,
    FullSpaceOracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Evolution => "evolution",
            Method::ResolventInversion => "resolvent_inversion",
            Method::ClosedFormResonant => "closed_form_resonant",
            Method::WignerWeisskopf => "wigner_weisskopf",
            Method::FullSpaceOracle => "full_space_oracle",
        };
        f.write_str(s)
    }
}

/// Sampled decoherence factor `|(N|U(T)|N)|^2` (or `|(0|U(T)|0)|^2`).
///
/// Values are kept unclipped; use [`DecoherenceCurve::clipped`] for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceCurve {
    pub times: Vec<f64>,
    pub factor: Vec<f64>,
    pub method: Method,
    pub params_digest: String,
}

impl DecoherenceCurve {
    pub fn clipped(&self) -> Vec<f64> {
        self.factor.iter().map(|f| f.clamp(0.0, 1.0)).collect()
    }

    /// `max_i |self[i] - other[i]|`; curves must share a time grid.
    pub fn max_deviation(&self, other: &DecoherenceCurve) -> f64 {
        assert_eq!(
            self.times.len(),
            other.times.len(),
            "curves on different grids"
        );
        self.factor
            .iter()
            .zip(&other.factor)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn system_digest(system: &SubspaceSystem) -> String {
    match system.photon_number {
        Some(n) => format!("{}/N={n}", system.params.digest()),
        None => system.params.digest(),
    }
}

pub fn decoherence_factor(system: &SubspaceSystem, times: &[f64]) -> Result<DecoherenceCurve> {
    let row = propagate(system, system.initial_label(), times)?;
    Ok(decoherence_from_row(system, &row))
}

/// Decoherence curve from an already propagated row of `system`.
pub fn decoherence_from_row(system: &SubspaceSystem, row: &PropagatorRow) -> DecoherenceCurve {
    DecoherenceCurve {
        times: row.times.clone(),
        factor: row.diagonal().iter().map(|a| a.norm_sqr()).collect(),
        method: Method::Evolution,
        params_digest: system_digest(system),
    }
}

/// Diagonal weights of the two-atom reduced density operator over
/// `{|0_g,2_e>, |1_g,1_e>, |2_g,0_e>}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedDensityWeights {
    pub p_upper: f64,
    pub p_mid: f64,
    pub p_lower: f64,
}

impl ReducedDensityWeights {
    pub fn total(&self) -> f64 {
        self.p_upper + self.p_mid + self.p_lower
    }
}

pub fn reduced_density(system: &SubspaceSystem, t: f64) -> Result<ReducedDensityWeights> {
    Ok(reduced_density_series(system, &[t])?[0])
}

pub fn reduced_density_series(
    system: &SubspaceSystem,
    times: &[f64],
) -> Result<Vec<ReducedDensityWeights>> {
    let row = propagate(system, system.initial_label(), times)?;
    Ok((0..times.len()).map(|i| row.weights_at(i)).collect())
}
