//! Second-order decoherence of a two-mode boson system coupled to a bosonic
//! reservoir.
//!
//! The two-atom state `|1_g, 1_e>` together with a reservoir Fock state
//! evolves inside a small invariant subspace ([`subspace`]); its exact
//! propagation ([`evolve`]) gives the decoherence factor
//! `|(N|U(T)|N)|^2` that sets the fringe contrast of the second-order
//! correlation function ([`correlate`]). [`resolvent`] covers the
//! Green's-function view and the continuum (Wigner-Weisskopf) limit,
//! [`oracle`] is a subspace-free reference on the full Fock space, and
//! [`experiments`] holds the canned scans.

pub mod correlate;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod features;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod resolvent;
pub mod subspace;

pub use correlate::{CorrelationGrid, TwoAtomState};
pub use error::{Error, ErrorKind, Result};
pub use evolve::{DecoherenceCurve, Method, PropagatorRow, ReducedDensityWeights};
pub use experiments::{ScanCurve, ScanResult};
pub use features::{CurveFeatures, Thresholds};
pub use model::{
    CombSpec, MeasurementCoeffs, ModelConfig, ModelParams, ReservoirMode, SpectralDensity,
};
pub use oracle::FockSpace;
pub use subspace::{AtomState, BasisLabel, SubspaceSystem};
