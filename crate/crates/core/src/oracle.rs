//! Brute-force reference: the Hamiltonian on an enumerated Fock basis of
//! every mode (`g`, `e`, and each reservoir mode), built from ladder
//! operators alone and diagonalized with a cyclic Jacobi solver.
//!
//! Nothing here uses the invariant-subspace construction. The basis is
//! filtered by the two conserved numbers of the initial state (atom number
//! `n_g + n_e` and excitation number `n_e + sum_j n_j`), which removes
//! states the dynamics can never reach, so the result has no truncation
//! error.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolve::{DecoherenceCurve, Method};
use crate::model::ModelParams;
use crate::subspace::BasisLabel;

pub const DEFAULT_STATE_CAP: usize = 20_000;

/// Occupation numbers ordered `[n_g, n_e, n_1, ..., n_M]`.
pub type Occupation = Vec<u32>;

const G: usize = 0;
const E: usize = 1;
const RESERVOIR: usize = 2;

#[derive(Debug, Clone)]
pub struct FockSpace {
    pub cutoffs: Vec<u32>,
    pub basis: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
    /// `prod (cutoff + 1)`, the size before any filtering.
    pub unfiltered_dimension: f64,
}

impl FockSpace {
    fn from_basis(cutoffs: Vec<u32>, basis: Vec<Occupation>) -> Self {
        let index = basis
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let unfiltered_dimension = cutoffs.iter().map(|&c| c as f64 + 1.0).product();
        Self {
            cutoffs,
            basis,
            index,
            unfiltered_dimension,
        }
    }

    /// Every occupation tuple within `cutoffs`.
    pub fn truncated(cutoffs: Vec<u32>, cap: usize) -> Result<Self> {
        let size: f64 = cutoffs.iter().map(|&c| c as f64 + 1.0).product();
        if size > cap as f64 {
            return Err(Error::BasisTooLarge {
                size: size as usize,
                cap,
            });
        }
        let mut basis = vec![Vec::with_capacity(cutoffs.len())];
        for &c in &cutoffs {
            basis = basis
                .into_iter()
                .flat_map(|prefix: Occupation| {
                    (0..=c).map(move |n| {
                        let mut s = prefix.clone();
                        s.push(n);
                        s
                    })
                })
                .collect();
        }
        Ok(Self::from_basis(cutoffs, basis))
    }

    /// Tuples within `cutoffs` with `n_g + n_e = atoms` and
    /// `n_e + sum_j n_j = excitations`.
    pub fn sector(cutoffs: Vec<u32>, atoms: u32, excitations: u32, cap: usize) -> Result<Self> {
        if cutoffs.len() < RESERVOIR {
            return Err(Error::InvalidInput(
                "Fock space needs the g and e modes".into(),
            ));
        }
        let mut basis = Vec::new();
        let mut current = vec![0u32; cutoffs.len()];
        for n_e in 0..=atoms.min(cutoffs[E]).min(excitations) {
            let n_g = atoms - n_e;
            if n_g > cutoffs[G] {
                continue;
            }
            current[G] = n_g;
            current[E] = n_e;
            fill_reservoir(
                &cutoffs,
                &mut current,
                RESERVOIR,
                excitations - n_e,
                &mut basis,
                cap,
            )?;
        }
        Ok(Self::from_basis(cutoffs, basis))
    }

    /// The conserved sector containing `initial`, with cutoffs no tighter
    /// than the conserved totals allow.
    pub fn for_initial(initial: &[u32], cap: usize) -> Result<Self> {
        if initial.len() < RESERVOIR {
            return Err(Error::InvalidInput(
                "occupation must list n_g and n_e".into(),
            ));
        }
        let too_large = || Error::InvalidInput(format!("occupation {initial:?} is too large"));
        let atoms = initial[G]
            .checked_add(initial[E])
            .filter(|&a| a < u32::MAX)
            .ok_or_else(too_large)?;
        let excitations = u32::try_from(excitation_number(initial))
            .ok()
            .filter(|&x| x < u32::MAX)
            .ok_or_else(too_large)?;
        let mut cutoffs = vec![atoms, atoms];
        cutoffs.extend(std::iter::repeat_n(excitations, initial.len() - RESERVOIR));
        Self::sector(cutoffs, atoms, excitations, cap)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, state: &[u32]) -> Option<usize> {
        self.index.get(state).copied()
    }
}

fn fill_reservoir(
    cutoffs: &[u32],
    current: &mut Occupation,
    mode: usize,
    remaining: u32,
    out: &mut Vec<Occupation>,
    cap: usize,
) -> Result<()> {
    if mode == cutoffs.len() {
        if remaining == 0 {
            if out.len() == cap {
                return Err(Error::BasisTooLarge { size: cap + 1, cap });
            }
            out.push(current.clone());
        }
        return Ok(());
    }
    for n in 0..=remaining.min(cutoffs[mode]) {
        current[mode] = n;
        fill_reservoir(cutoffs, current, mode + 1, remaining - n, out, cap)?;
    }
    current[mode] = 0;
    Ok(())
}

/// `n_e + sum_j n_j`.
pub fn excitation_number(state: &[u32]) -> u64 {
    state[E] as u64 + state[RESERVOIR..].iter().map(|&n| n as u64).sum::<u64>()
}

/// Occupation tuple of a subspace label.
pub fn occupation_of(label: BasisLabel, photon_number: Option<u32>, modes: usize) -> Occupation {
    let (n_g, n_e) = label.atom_state().occupations();
    let mut s = vec![0; modes + RESERVOIR];
    s[G] = n_g;
    s[E] = n_e;
    match label {
        BasisLabel::SingleMode { k } => {
            let n = photon_number.expect("single-mode labels need the photon number") as i64;
            s[RESERVOIR] = u32::try_from(n + k as i64).expect("photon number out of range");
        }
        BasisLabel::Vacuum => {}
        BasisLabel::Photon { mode } => s[RESERVOIR + mode] = 1,
    }
    s
}

/// `H = omega_e n_e + sum_j omega_j n_j + sum_j d_j (a_j b_e^dag b_g + h.c.)`
/// on `space`. Matrix elements leading outside the space are dropped, which
/// is exact for conserved sectors.
pub fn build_full_hamiltonian(params: &ModelParams, space: &FockSpace) -> Result<DMatrix<f64>> {
    let m = params.modes.len();
    if space.cutoffs.len() != m + RESERVOIR {
        return Err(Error::InvalidInput(format!(
            "Fock space has {} modes, parameters need {}",
            space.cutoffs.len(),
            m + RESERVOIR
        )));
    }
    let n = space.dim();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for (col, s) in space.basis.iter().enumerate() {
        h[(col, col)] = params.omega_e * s[E] as f64
            + params
                .modes
                .iter()
                .enumerate()
                .map(|(j, mode)| mode.omega * s[RESERVOIR + j] as f64)
                .sum::<f64>();
        for (j, mode) in params.modes.iter().enumerate() {
            let r = RESERVOIR + j;
            // a_j b_e^dag b_g
            if s[r] > 0 && s[G] > 0 {
                let amp = (s[r] as f64).sqrt() * (s[E] as f64 + 1.0).sqrt() * (s[G] as f64).sqrt();
                let mut t = s.clone();
                t[r] -= 1;
                t[G] -= 1;
                t[E] += 1;
                if let Some(row) = space.index_of(&t) {
                    h[(row, col)] += mode.coupling * amp;
                }
            }
            // a_j^dag b_g^dag b_e
            if s[E] > 0 {
                let amp =
                    (s[r] as f64 + 1.0).sqrt() * (s[G] as f64 + 1.0).sqrt() * (s[E] as f64).sqrt();
                let mut t = s.clone();
                t[r] += 1;
                t[G] += 1;
                t[E] -= 1;
                if let Some(row) = space.index_of(&t) {
                    h[(row, col)] += mode.coupling * amp;
                }
            }
        }
    }
    let deviation = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (h[(i, j)] - h[(j, i)]).abs())
        .fold(0.0, f64::max);
    if deviation > crate::subspace::HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(h)
}

/// Cyclic Jacobi diagonalization of a real symmetric matrix.
/// Returns eigenvalues and the orthogonal matrix of eigenvectors (columns).
pub fn jacobi_eigen(matrix: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    const MAX_SWEEPS: usize = 100;
    let n = matrix.nrows();
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale * 1e-2 || off == 0.0 {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Eigen { sweeps: MAX_SWEEPS })
}

/// Diagonalized full-space dynamics.
#[derive(Debug, Clone)]
pub struct FullSpaceEvolution {
    pub space: FockSpace,
    pub hamiltonian: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl FullSpaceEvolution {
    pub fn new(params: &ModelParams, space: FockSpace) -> Result<Self> {
        let hamiltonian = build_full_hamiltonian(params, &space)?;
        let (eigenvalues, eigenvectors) = jacobi_eigen(&hamiltonian)?;
        Ok(Self {
            space,
            hamiltonian,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Sector of `initial` with the default state cap.
    pub fn for_initial(params: &ModelParams, initial: &[u32]) -> Result<Self> {
        Self::new(params, FockSpace::for_initial(initial, DEFAULT_STATE_CAP)?)
    }

    fn index(&self, state: &[u32]) -> Result<usize> {
        self.space.index_of(state).ok_or_else(|| {
            Error::InvalidInput(format!("occupation {state:?} is outside the Fock space"))
        })
    }

    /// `<to|U(t)|from>`.
    pub fn amplitude(&self, to: &[u32], from: &[u32], t: f64) -> Result<Complex64> {
        let (i, j) = (self.index(to)?, self.index(from)?);
        Ok(self.amplitude_at(i, j, t))
    }

    fn amplitude_at(&self, i: usize, j: usize, t: f64) -> Complex64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &lambda)| {
                Complex64::from_polar(
                    self.eigenvectors[(i, k)] * self.eigenvectors[(j, k)],
                    -lambda * t,
                )
            })
            .sum()
    }

    /// `U(t)|from>` over the whole basis.
    pub fn state_at(&self, from: &[u32], t: f64) -> Result<Vec<Complex64>> {
        let j = self.index(from)?;
        Ok((0..self.space.dim())
            .map(|i| self.amplitude_at(i, j, t))
            .collect())
    }

    /// `<psi(t)| n_e + sum_j n_j |psi(t)>` starting from `from`.
    pub fn mean_excitation(&self, from: &[u32], t: f64) -> Result<f64> {
        let psi = self.state_at(from, t)?;
        Ok(psi
            .iter()
            .zip(&self.space.basis)
            .map(|(a, s)| a.norm_sqr() * excitation_number(s) as f64)
            .sum())
    }
}

/// `|<initial|U(T)|initial>|^2` from the full-space reference.
pub fn oracle_factor(
    params: &ModelParams,
    initial: &[u32],
    times: &[f64],
) -> Result<DecoherenceCurve> {
    oracle_factor_capped(params, initial, times, DEFAULT_STATE_CAP)
}

/// [`oracle_factor`] with an explicit cap on the sector size.
pub fn oracle_factor_capped(
    params: &ModelParams,
    initial: &[u32],
    times: &[f64],
    cap: usize,
) -> Result<DecoherenceCurve> {
    let evo = FullSpaceEvolution::new(params, FockSpace::for_initial(initial, cap)?)?;
    let i = evo.index(initial)?;
    Ok(DecoherenceCurve {
        times: times.to_vec(),
        factor: times
            .iter()
            .map(|&t| evo.amplitude_at(i, i, t).norm_sqr())
            .collect(),
        method: Method::FullSpaceOracle,
        params_digest: params.digest(),
    })
}

/// Initial occupation `|1_g, 1_e, N>` for one reservoir mode.
pub fn single_mode_initial(photon_number: u32) -> Occupation {
    vec![1, 1, photon_number]
}

/// Initial occupation `|1_g, 1_e, {0}>` for `modes` reservoir modes.
pub fn vacuum_initial(modes: usize) -> Occupation {
    let mut s = vec![0; modes + RESERVOIR];
    s[G] = 1;
    s[E] = 1;
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{propagate, uniform_times};
    use crate::model::ReservoirMode;
    use crate::subspace::{build_multi_mode, build_single_mode};

    #[test]
    fn single_mode_sector_sizes() {
        assert_eq!(
            FockSpace::for_initial(&single_mode_initial(0), 100)
                .unwrap()
                .dim(),
            2
        );
        for n in [1, 2, 7, 30] {
            assert_eq!(
                FockSpace::for_initial(&single_mode_initial(n), 100)
                    .unwrap()
                    .dim(),
                3
            );
        }
    }

    #[test]
    fn vacuum_sector_size() {
        for m in [1, 3, 9, 40] {
            assert_eq!(
                FockSpace::for_initial(&vacuum_initial(m), 1000)
                    .unwrap()
                    .dim(),
                m + 1
            );
        }
    }

    #[test]
    fn zero_coupling_diagonal() {
        let p = ModelParams::single_mode(1.0, 1.2, 0.0);
        let space = FockSpace::truncated(vec![2, 2, 3], 100).unwrap();
        let h = build_full_hamiltonian(&p, &space).unwrap();
        assert_eq!(h.nrows(), 36);
        for i in 0..36 {
            for j in 0..36 {
                if i != j {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn huge_occupation_rejected() {
        let err = FockSpace::for_initial(&single_mode_initial(u32::MAX), 100).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn state_cap_enforced() {
        let err = FockSpace::truncated(vec![9; 6], 1000).unwrap_err();
        assert!(matches!(err, Error::BasisTooLarge { .. }));
        let err = FockSpace::for_initial(&vacuum_initial(50), 10).unwrap_err();
        assert!(matches!(err, Error::BasisTooLarge { .. }));
    }

    #[test]
    fn jacobi_reconstructs() {
        let modes = (0..12)
            .map(|j| ReservoirMode::new(0.5 + 0.09 * j as f64, 0.03 * j as f64))
            .collect();
        let p = ModelParams::new(1.0, modes);
        let evo = FullSpaceEvolution::for_initial(&p, &vacuum_initial(12)).unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(evo.eigenvalues.clone()));
        let back = &evo.eigenvectors * d * evo.eigenvectors.transpose();
        assert!((back - &evo.hamiltonian).abs().max() < 1e-13);
        let gram = evo.eigenvectors.transpose() * &evo.eigenvectors;
        assert!((gram - DMatrix::identity(13, 13)).abs().max() < 1e-13);
    }

    #[test]
    fn unit_at_time_zero() {
        let p = ModelParams::single_mode(1.0, 1.2, 0.07);
        let curve = oracle_factor(&p, &single_mode_initial(3), &[0.0]).unwrap();
        assert!((curve.factor[0] - 1.0).abs() < 1e-14);
        assert_eq!(curve.method, Method::FullSpaceOracle);
    }

    #[test]
    fn labels_map_to_occupations() {
        assert_eq!(
            occupation_of(BasisLabel::SingleMode { k: -1 }, Some(4), 1),
            vec![0, 2, 3]
        );
        assert_eq!(
            occupation_of(BasisLabel::SingleMode { k: 1 }, Some(4), 1),
            vec![2, 0, 5]
        );
        assert_eq!(occupation_of(BasisLabel::Vacuum, None, 2), vec![1, 1, 0, 0]);
        assert_eq!(
            occupation_of(BasisLabel::Photon { mode: 1 }, None, 2),
            vec![2, 0, 0, 1]
        );
    }

    /// Entry-by-entry agreement of subspace propagation with the full space.
    #[test]
    fn subspace_equivalence() {
        let times = uniform_times(300.0, 61);
        for n in [0u32, 1, 2, 7] {
            let p = ModelParams::single_mode(1.0, 1.2, 0.07);
            let s = build_single_mode(&p, n).unwrap();
            let row = propagate(&s, s.initial_label(), &times).unwrap();
            let evo = FullSpaceEvolution::for_initial(&p, &single_mode_initial(n)).unwrap();
            for (j, label) in row.basis.iter().enumerate() {
                let occ = occupation_of(*label, Some(n), 1);
                for (i, &t) in times.iter().enumerate() {
                    let want = evo.amplitude(&occ, &single_mode_initial(n), t).unwrap();
                    assert!((row.amplitudes[(i, j)] - want).norm() < 1e-10);
                }
            }
        }
        let modes = (0..5)
            .map(|j| ReservoirMode::new(0.6 + 0.2 * j as f64, 0.17))
            .collect();
        let p = ModelParams::new(1.0, modes);
        let s = build_multi_mode(&p).unwrap();
        let row = propagate(&s, BasisLabel::Vacuum, &times).unwrap();
        let evo = FullSpaceEvolution::for_initial(&p, &vacuum_initial(5)).unwrap();
        for (j, label) in row.basis.iter().enumerate() {
            let occ = occupation_of(*label, None, 5);
            for (i, &t) in times.iter().enumerate() {
                let want = evo.amplitude(&occ, &vacuum_initial(5), t).unwrap();
                assert!((row.amplitudes[(i, j)] - want).norm() < 1e-10);
            }
        }
    }

    /// On a plain truncated space (no sector filtering) the excitation number
    /// is still conserved by the dynamics.
    #[test]
    fn excitation_conserved_dynamically() {
        let p = ModelParams::new(
            1.0,
            vec![ReservoirMode::new(0.9, 0.15), ReservoirMode::new(1.3, 0.1)],
        );
        let space = FockSpace::truncated(vec![2, 2, 3, 3], 1000).unwrap();
        let evo = FullSpaceEvolution::new(&p, space).unwrap();
        let initial = [1, 1, 1, 0];
        let n0 = excitation_number(&initial) as f64;
        for t in uniform_times(100.0, 41) {
            assert!((evo.mean_excitation(&initial, t).unwrap() - n0).abs() < 1e-10);
        }
        // The sector holding |1,1,1,0> is closed under H: no amplitude leaks.
        let psi = evo.state_at(&initial, 37.0).unwrap();
        for (a, s) in psi.iter().zip(&evo.space.basis) {
            if excitation_number(s) != 2 || s[0] + s[1] != 2 {
                assert!(a.norm() < 1e-12, "leak into {s:?}");
            }
        }
    }
}
