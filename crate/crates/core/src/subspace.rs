//! Invariant subspaces of the two-atom + reservoir Hamiltonian.
//!
//! Starting from `|1_g,1_e>` the interaction only ever trades one atom
//! between the two modes against one reservoir quantum, so the dynamics stay
//! inside a tiny subspace:
//!
//! * one reservoir mode in Fock state `|N>`: `{|0_g,2_e,N-1>, |1_g,1_e,N>, |2_g,0_e,N+1>}`,
//!   written `|N-1), |N), |N+1)` (only the last two exist for `N = 0`);
//! * many modes in vacuum: `|0) = |1_g,1_e,{0}>` and `|1_j) = |2_g,0_e,1_j>`.
//!
//! Matrix elements come from the ladder-operator action of
//! `V = sum_j d_j (a_j b_e^dag b_g + a_j^dag b_g^dag b_e)`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Tolerance on the entrywise Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-14;

/// The three two-atom Fock states `|n_g, n_e>` with `n_g + n_e = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomState {
    /// `|0_g, 2_e>`
    Upper,
    /// `|1_g, 1_e>`
    Mid,
    /// `|2_g, 0_e>`
    Lower,
}

impl AtomState {
    /// Occupations `(n_g, n_e)`.
    pub fn occupations(self) -> (u32, u32) {
        match self {
            AtomState::Upper => (0, 2),
            AtomState::Mid => (1, 1),
            AtomState::Lower => (2, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisLabel {
    /// `|N+k)` for `k` in {-1, 0, +1}.
    SingleMode { k: i8 },
    /// `|0) = |1_g,1_e,{0_j}>`.
    Vacuum,
    /// `|1_j) = |2_g,0_e,1_j>`.
    Photon { mode: usize },
}

impl BasisLabel {
    pub fn atom_state(self) -> AtomState {
        match self {
            BasisLabel::SingleMode { k: -1 } => AtomState::Upper,
            BasisLabel::SingleMode { k: 0 } | BasisLabel::Vacuum => AtomState::Mid,
            BasisLabel::SingleMode { .. } | BasisLabel::Photon { .. } => AtomState::Lower,
        }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::SingleMode { k: 0 } => f.write_str("N"),
            BasisLabel::SingleMode { k } => write!(f, "N{k:+}"),
            BasisLabel::Vacuum => f.write_str("0"),
            BasisLabel::Photon { mode } => write!(f, "1_{mode}"),
        }
    }
}

/// A basis of one invariant subspace and the Hamiltonian restricted to it.
#[derive(Debug, Clone)]
pub struct SubspaceSystem {
    pub basis: Vec<BasisLabel>,
    pub hamiltonian: DMatrix<Complex64>,
    /// Reservoir Fock number `N` for the single-mode case.
    pub photon_number: Option<u32>,
    pub params: ModelParams,
}

impl SubspaceSystem {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, label: BasisLabel) -> Result<usize> {
        self.basis
            .iter()
            .position(|&b| b == label)
            .ok_or_else(|| Error::LabelNotInBasis(label.to_string()))
    }

    /// The state `|1_g,1_e>` tensored with the initial reservoir state.
    pub fn initial_label(&self) -> BasisLabel {
        if self.photon_number.is_some() {
            BasisLabel::SingleMode { k: 0 }
        } else {
            BasisLabel::Vacuum
        }
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.hamiltonian)
    }
}

pub fn hermiticity_deviation(h: &DMatrix<Complex64>) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn build_single_mode(params: &ModelParams, photon_number: u32) -> Result<SubspaceSystem> {
    let [mode] = params.modes.as_slice() else {
        return Err(Error::InvalidInput(format!(
            "single-mode subspace needs exactly one reservoir mode, got {}",
            params.modes.len()
        )));
    };
    let n = photon_number as f64;
    let (we, wj, d) = (params.omega_e, mode.omega, mode.coupling);
    let energy = |k: i8| (1.0 - k as f64) * we + (n + k as f64) * wj;

    let basis: Vec<BasisLabel> = if photon_number == 0 {
        vec![
            BasisLabel::SingleMode { k: 0 },
            BasisLabel::SingleMode { k: 1 },
        ]
    } else {
        (-1..=1).map(|k| BasisLabel::SingleMode { k }).collect()
    };
    let dim = basis.len();
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for (i, label) in basis.iter().enumerate() {
        let BasisLabel::SingleMode { k } = *label else {
            unreachable!()
        };
        h[(i, i)] = real(energy(k));
    }
    let mid = basis
        .iter()
        .position(|&b| b == BasisLabel::SingleMode { k: 0 })
        .unwrap();
    // a b_e^dag b_g |1,1,N> = sqrt(2N) |0,2,N-1>
    if photon_number > 0 {
        let g = d * (2.0 * n).sqrt();
        h[(mid - 1, mid)] = real(g);
        h[(mid, mid - 1)] = real(g);
    }
    // a^dag b_g^dag b_e |1,1,N> = sqrt(2(N+1)) |2,0,N+1>
    let g = d * (2.0 * (n + 1.0)).sqrt();
    h[(mid + 1, mid)] = real(g);
    h[(mid, mid + 1)] = real(g);

    Ok(SubspaceSystem {
        basis,
        hamiltonian: h,
        photon_number: Some(photon_number),
        params: params.clone(),
    })
}

pub fn build_multi_mode(params: &ModelParams) -> Result<SubspaceSystem> {
    if params.modes.is_empty() {
        return Err(Error::InvalidInput(
            "multi-mode subspace needs at least one reservoir mode".into(),
        ));
    }
    let m = params.modes.len();
    let mut basis = Vec::with_capacity(m + 1);
    basis.push(BasisLabel::Vacuum);
    basis.extend((0..m).map(|mode| BasisLabel::Photon { mode }));

    let mut h = DMatrix::<Complex64>::zeros(m + 1, m + 1);
    h[(0, 0)] = real(params.omega_e);
    for (j, mode) in params.modes.iter().enumerate() {
        h[(j + 1, j + 1)] = real(mode.omega);
        let g = mode.coupling * std::f64::consts::SQRT_2;
        h[(j + 1, 0)] = real(g);
        h[(0, j + 1)] = real(g);
    }
    Ok(SubspaceSystem {
        basis,
        hamiltonian: h,
        photon_number: None,
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, ReservoirMode};
    use proptest::prelude::*;

    fn re(h: &DMatrix<Complex64>, i: usize, j: usize) -> f64 {
        h[(i, j)].re
    }

    #[test]
    fn vacuum_single_mode_is_two_by_two() {
        let s = build_single_mode(&ModelParams::single_mode(1.0, 1.0, 0.07), 0).unwrap();
        assert_eq!(s.dim(), 2);
        let g = 0.07 * 2f64.sqrt();
        let want = [[1.0, g], [g, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((re(&s.hamiltonian, i, j) - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_coupling_is_diagonal() {
        for n in [0, 1, 5] {
            let s = build_single_mode(&ModelParams::single_mode(1.0, 1.3, 0.0), n).unwrap();
            for i in 0..s.dim() {
                for j in 0..s.dim() {
                    if i != j {
                        assert_eq!(s.hamiltonian[(i, j)], Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn n_one_couplings() {
        let d = 0.07;
        let s = build_single_mode(&ModelParams::single_mode(1.0, 1.2, d), 1).unwrap();
        assert!((re(&s.hamiltonian, 0, 1) - d * 2f64.sqrt()).abs() < 1e-15);
        assert!((re(&s.hamiltonian, 2, 1) - 2.0 * d).abs() < 1e-15);
        assert_eq!(re(&s.hamiltonian, 0, 2), 0.0);
    }

    #[test]
    fn diagonal_energies() {
        let (we, wj, n) = (1.0, 1.2, 7u32);
        let s = build_single_mode(&ModelParams::single_mode(we, wj, 0.07), n).unwrap();
        let nf = n as f64;
        let want = [2.0 * we + (nf - 1.0) * wj, we + nf * wj, (nf + 1.0) * wj];
        for i in 0..3 {
            assert!((re(&s.hamiltonian, i, i) - want[i]).abs() < 1e-13);
        }
    }

    /// The squared couplings must reproduce the resolvent's self-energy
    /// weights 2N d^2 and 2(N+1) d^2.
    #[test]
    fn couplings_match_resolvent_weights() {
        let d = 0.13;
        for n in 1..20u32 {
            let s = build_single_mode(&ModelParams::single_mode(1.0, 1.1, d), n).unwrap();
            let lower = re(&s.hamiltonian, 0, 1).powi(2);
            let upper = re(&s.hamiltonian, 2, 1).powi(2);
            let nf = n as f64;
            assert!((lower - 2.0 * nf * d * d).abs() < 1e-14);
            assert!((upper - 2.0 * (nf + 1.0) * d * d).abs() < 1e-14);
            assert!((lower + upper - (4.0 * nf + 2.0) * d * d).abs() < 1e-13);
        }
    }

    #[test]
    fn one_mode_multi_equals_vacuum_single() {
        let p = ModelParams::single_mode(1.0, 1.2, 0.07);
        let a = build_single_mode(&p, 0).unwrap();
        let b = build_multi_mode(&p).unwrap();
        assert_eq!(a.hamiltonian, b.hamiltonian);
    }

    #[test]
    fn multi_mode_weights() {
        let p = ModelParams::new(
            1.0,
            vec![ReservoirMode::new(0.9, 0.1), ReservoirMode::new(1.1, 0.2)],
        );
        let s = build_multi_mode(&p).unwrap();
        assert_eq!(s.dim(), 3);
        assert!((re(&s.hamiltonian, 1, 0).powi(2) - 2.0 * 0.01).abs() < 1e-15);
        assert!((re(&s.hamiltonian, 2, 0).powi(2) - 2.0 * 0.04).abs() < 1e-15);
        assert_eq!(re(&s.hamiltonian, 1, 2), 0.0);
    }

    #[test]
    fn wrong_mode_counts_rejected() {
        let empty = ModelParams::new(1.0, vec![]);
        assert!(build_single_mode(&empty, 1).is_err());
        assert!(build_multi_mode(&empty).is_err());
        let two = ModelParams::new(
            1.0,
            vec![ReservoirMode::new(0.9, 0.1), ReservoirMode::new(1.1, 0.2)],
        );
        assert!(build_single_mode(&two, 1).is_err());
    }

    #[test]
    fn atom_states_of_labels() {
        assert_eq!(
            BasisLabel::SingleMode { k: -1 }.atom_state(),
            AtomState::Upper
        );
        assert_eq!(BasisLabel::Vacuum.atom_state(), AtomState::Mid);
        assert_eq!(
            BasisLabel::Photon { mode: 3 }.atom_state(),
            AtomState::Lower
        );
    }

    proptest! {
        #[test]
        fn always_hermitian(
            we in 0.1f64..3.0, wj in 0.1f64..3.0, d in 0.0f64..0.5, n in 0u32..50,
            freqs in prop::collection::vec((0.1f64..3.0, 0.0f64..0.5), 1..30),
        ) {
            let s = build_single_mode(&ModelParams::single_mode(we, wj, d), n).unwrap();
            prop_assert!(s.hermiticity_deviation() < HERMITIAN_TOL);
            prop_assert!(s.hamiltonian.iter().all(|z| z.im == 0.0));
            let modes = freqs.iter().map(|&(w, c)| ReservoirMode::new(w, c)).collect::<Vec<_>>();
            let m = build_multi_mode(&ModelParams::new(we, modes.clone())).unwrap();
            prop_assert_eq!(m.dim(), modes.len() + 1);
            prop_assert!(m.hermiticity_deviation() < HERMITIAN_TOL);
        }
    }
}
