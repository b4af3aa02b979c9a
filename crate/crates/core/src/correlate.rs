//! Second-order correlation `G(t, t') = Tr(rho B^dag(t) B^dag(t') B(t') B(t))`
//! of the two-atom state, with `B(t) = c1 b_g + c2 b_e e^{-i omega_e t}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::ReducedDensityWeights;
use crate::model::MeasurementCoeffs;
use crate::subspace::AtomState;

const WEIGHT_TOL: f64 = 1e-10;

/// Diagonal two-atom density over `{|0_g,2_e>, |1_g,1_e>, |2_g,0_e>}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoAtomState {
    pub weights: [f64; 3],
}

impl TwoAtomState {
    pub fn new(p_upper: f64, p_mid: f64, p_lower: f64) -> Result<Self> {
        let weights = [p_upper, p_mid, p_lower];
        if weights.iter().any(|w| !w.is_finite() || *w < -WEIGHT_TOL) {
            return Err(Error::InvalidInput(format!(
                "state weights {weights:?} must be >= 0"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidInput(format!(
                "state weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn pure(state: AtomState) -> Self {
        let mut weights = [0.0; 3];
        weights[state as usize] = 1.0;
        Self { weights }
    }

    /// Mixture of `|1_g,1_e>` with weight `p_mid`, the rest in `|2_g,0_e>`.
    pub fn from_mid_weight(p_mid: f64) -> Result<Self> {
        Self::new(0.0, p_mid, 1.0 - p_mid)
    }

    pub fn p_mid(&self) -> f64 {
        self.weights[AtomState::Mid as usize]
    }
}

impl TryFrom<ReducedDensityWeights> for TwoAtomState {
    type Error = Error;

    fn try_from(w: ReducedDensityWeights) -> Result<Self> {
        Self::new(w.p_upper, w.p_mid, w.p_lower)
    }
}

/// Two-mode Fock space `|n_g, n_e>` with `n_g, n_e <= 2`; index `3 n_g + n_e`.
const CUTOFF: usize = 2;
const DIM: usize = (CUTOFF + 1) * (CUTOFF + 1);

fn fock_index(n_g: usize, n_e: usize) -> usize {
    (CUTOFF + 1) * n_g + n_e
}

fn annihilators() -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mut b_g = DMatrix::zeros(DIM, DIM);
    let mut b_e = DMatrix::zeros(DIM, DIM);
    for n_g in 0..=CUTOFF {
        for n_e in 0..=CUTOFF {
            let from = fock_index(n_g, n_e);
            if n_g > 0 {
                b_g[(fock_index(n_g - 1, n_e), from)] = Complex64::new((n_g as f64).sqrt(), 0.0);
            }
            if n_e > 0 {
                b_e[(fock_index(n_g, n_e - 1), from)] = Complex64::new((n_e as f64).sqrt(), 0.0);
            }
        }
    }
    (b_g, b_e)
}

fn density_matrix(state: &TwoAtomState) -> DMatrix<Complex64> {
    let mut diag = DVector::zeros(DIM);
    for (w, atoms) in state
        .weights
        .iter()
        .zip([AtomState::Upper, AtomState::Mid, AtomState::Lower])
    {
        let (n_g, n_e) = atoms.occupations();
        diag[fock_index(n_g as usize, n_e as usize)] = Complex64::new(*w, 0.0);
    }
    DMatrix::from_diagonal(&diag)
}

/// Precomputed operators for repeated evaluation on one state.
pub struct Correlator {
    rho: DMatrix<Complex64>,
    b_g: DMatrix<Complex64>,
    b_e: DMatrix<Complex64>,
    coeffs: MeasurementCoeffs,
    omega_e: f64,
}

impl Correlator {
    pub fn new(state: &TwoAtomState, coeffs: MeasurementCoeffs, omega_e: f64) -> Self {
        let (b_g, b_e) = annihilators();
        Self {
            rho: density_matrix(state),
            b_g,
            b_e,
            coeffs,
            omega_e,
        }
    }

    fn field(&self, t: f64) -> DMatrix<Complex64> {
        let phase = Complex64::from_polar(1.0, -self.omega_e * t);
        &self.b_g * self.coeffs.c1 + &self.b_e * (self.coeffs.c2 * phase)
    }

    pub fn evaluate(&self, t: f64, tprime: f64) -> f64 {
        let b_t = self.field(t);
        let b_tp = self.field(tprime);
        let op = b_t.adjoint() * b_tp.adjoint() * &b_tp * &b_t;
        (&self.rho * op).trace().re
    }
}

/// Evaluates the trace directly from the ladder-operator matrices.
pub fn g2_first_principles(
    state: &TwoAtomState,
    coeffs: MeasurementCoeffs,
    omega_e: f64,
    t: f64,
    tprime: f64,
) -> f64 {
    Correlator::new(state, coeffs, omega_e).evaluate(t, tprime)
}

/// `1/2 [1 + p_mid cos(omega_e (t - t'))]`, valid for the balanced
/// measurement `c1 = c2 = 1/sqrt(2)`.
pub fn g2_compact(p_mid: f64, omega_e: f64, t: f64, tprime: f64) -> Result<f64> {
    if !(-WEIGHT_TOL..=1.0 + WEIGHT_TOL).contains(&p_mid) {
        return Err(Error::InvalidInput(format!(
            "p_mid = {p_mid} is outside [0, 1]"
        )));
    }
    Ok(0.5 * (1.0 + p_mid * (omega_e * (t - tprime)).cos()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub t_values: Vec<f64>,
    pub tprime_values: Vec<f64>,
    /// Rows follow `t_values`, columns `tprime_values`.
    pub g: Vec<Vec<f64>>,
}

impl CorrelationGrid {
    pub fn max(&self) -> f64 {
        self.g
            .iter()
            .flatten()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.g
            .iter()
            .flatten()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Fringe visibility `(max - min) / (max + min)` over the grid.
    pub fn visibility(&self) -> f64 {
        let (hi, lo) = (self.max(), self.min());
        if hi + lo == 0.0 {
            0.0
        } else {
            (hi - lo) / (hi + lo)
        }
    }

    pub fn max_deviation(&self, other: &CorrelationGrid) -> f64 {
        self.g
            .iter()
            .flatten()
            .zip(other.g.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn g2_grid(
    state: &TwoAtomState,
    coeffs: MeasurementCoeffs,
    omega_e: f64,
    t_values: &[f64],
    tprime_values: &[f64],
) -> Result<CorrelationGrid> {
    if t_values.is_empty() || tprime_values.is_empty() {
        return Err(Error::InvalidInput(
            "correlation grid axes must be non-empty".into(),
        ));
    }
    let c = Correlator::new(state, coeffs, omega_e);
    let g = t_values
        .iter()
        .map(|&t| tprime_values.iter().map(|&tp| c.evaluate(t, tp)).collect())
        .collect();
    Ok(CorrelationGrid {
        t_values: t_values.to_vec(),
        tprime_values: tprime_values.to_vec(),
        g,
    })
}

/// Grid of [`g2_compact`] values.
pub fn g2_compact_grid(
    p_mid: f64,
    omega_e: f64,
    t_values: &[f64],
    tprime_values: &[f64],
) -> Result<CorrelationGrid> {
    let g = t_values
        .iter()
        .map(|&t| {
            tprime_values
                .iter()
                .map(|&tp| g2_compact(p_mid, omega_e, t, tp))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(CorrelationGrid {
        t_values: t_values.to_vec(),
        tprime_values: tprime_values.to_vec(),
        g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::uniform_times;
    use proptest::prelude::*;

    const WE: f64 = 1.0;

    fn grid() -> Vec<f64> {
        uniform_times(20.0, 64)
    }

    #[test]
    fn mid_state_fringes() {
        let s = TwoAtomState::pure(AtomState::Mid);
        let c = Correlator::new(&s, MeasurementCoeffs::balanced(), WE);
        for &t in &grid() {
            for &tp in &grid() {
                let want = (0.5 * WE * (t - tp)).cos().powi(2);
                assert!((c.evaluate(t, tp) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn doubly_occupied_states_are_flat() {
        for atoms in [AtomState::Upper, AtomState::Lower] {
            let s = TwoAtomState::pure(atoms);
            let g = g2_grid(&s, MeasurementCoeffs::balanced(), WE, &grid(), &grid()).unwrap();
            assert!(g.g.iter().flatten().all(|v| (v - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn equal_times() {
        let s = TwoAtomState::new(0.2, 0.5, 0.3).unwrap();
        for t in [0.0, 1.7, 33.0] {
            let g = g2_first_principles(&s, MeasurementCoeffs::balanced(), WE, t, t);
            assert!((g - 0.5 * (1.0 + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn compact_special_cases() {
        assert_eq!(g2_compact(1.0, WE, 3.0, 3.0).unwrap(), 1.0);
        for (t, tp) in [(0.0, 1.0), (5.0, -2.0)] {
            assert_eq!(g2_compact(0.0, WE, t, tp).unwrap(), 0.5);
        }
        assert!(g2_compact(1.5, WE, 0.0, 0.0).is_err());
        assert!(g2_compact(-0.1, WE, 0.0, 0.0).is_err());
    }

    #[test]
    fn compact_equals_trace_on_grid() {
        for p in [0.0, 0.3, 0.77, 1.0] {
            let s = TwoAtomState::from_mid_weight(p).unwrap();
            let full = g2_grid(&s, MeasurementCoeffs::balanced(), WE, &grid(), &grid()).unwrap();
            let compact = g2_compact_grid(p, WE, &grid(), &grid()).unwrap();
            assert!(full.max_deviation(&compact) < 1e-12);
        }
    }

    #[test]
    fn single_cell_grid() {
        let s = TwoAtomState::new(0.1, 0.6, 0.3).unwrap();
        let coeffs = MeasurementCoeffs::balanced();
        let g = g2_grid(&s, coeffs, WE, &[1.3], &[0.4]).unwrap();
        assert_eq!(g.g[0][0], g2_first_principles(&s, coeffs, WE, 1.3, 0.4));
    }

    #[test]
    fn symmetric_grid() {
        let s = TwoAtomState::new(0.1, 0.6, 0.3).unwrap();
        let g = g2_grid(&s, MeasurementCoeffs::balanced(), WE, &grid(), &grid()).unwrap();
        for i in 0..g.g.len() {
            for j in 0..g.g.len() {
                assert!((g.g[i][j] - g.g[j][i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn visibility_is_mid_weight() {
        // One full fringe period on each axis; t - t' = 0 and pi/omega_e are on the grid.
        let axis: Vec<f64> = (0..=64)
            .map(|i| std::f64::consts::TAU * i as f64 / 64.0)
            .collect();
        for p in [0.0, 0.25, 0.9, 1.0] {
            let s = TwoAtomState::from_mid_weight(p).unwrap();
            let g = g2_grid(&s, MeasurementCoeffs::balanced(), WE, &axis, &[0.0]).unwrap();
            assert!(
                (g.visibility() - p).abs() < 1e-12,
                "p={p} vis={}",
                g.visibility()
            );
        }
    }

    #[test]
    fn unbalanced_measurement_still_interferes() {
        let coeffs = MeasurementCoeffs::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let s = TwoAtomState::pure(AtomState::Mid);
        let c = Correlator::new(&s, coeffs, WE);
        // |c1 c2|^2 |1 + e^{i w (t - t')}|^2
        for (t, tp) in [(0.0, 0.0), (0.0, std::f64::consts::PI), (1.0, 2.5)] {
            let want = 0.48f64.powi(2) * 2.0 * (1.0 + (WE * (t - tp)).cos());
            assert!((c.evaluate(t, tp) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_states_rejected() {
        assert!(TwoAtomState::new(0.5, 0.6, 0.0).is_err());
        assert!(TwoAtomState::new(-0.5, 1.0, 0.5).is_err());
        assert!(g2_grid(
            &TwoAtomState::pure(AtomState::Mid),
            MeasurementCoeffs::balanced(),
            WE,
            &[],
            &[1.0]
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn compact_matches_trace(
            p_upper in 0.0f64..1.0, split in 0.0f64..1.0,
            t in -50.0f64..50.0, tp in -50.0f64..50.0, shift in -20.0f64..20.0,
        ) {
            let p_mid = (1.0 - p_upper) * split;
            let s = TwoAtomState::new(p_upper, p_mid, 1.0 - p_upper - p_mid).unwrap();
            let c = Correlator::new(&s, MeasurementCoeffs::balanced(), WE);
            let g = c.evaluate(t, tp);
            prop_assert!((g - g2_compact(p_mid, WE, t, tp).unwrap()).abs() < 1e-12);
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&g));
            // Stationarity: only t - t' matters.
            prop_assert!((g - c.evaluate(t + shift, tp + shift)).abs() < 1e-12);
        }
    }
}
