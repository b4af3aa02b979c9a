//! Shared fixtures for the benchmarks.

use sodec_core::model::{build_comb, CombSpec, ModelParams};
use sodec_core::subspace::{build_multi_mode, build_single_mode, SubspaceSystem};

pub fn single_mode_system(photon_number: u32) -> SubspaceSystem {
    build_single_mode(&ModelParams::single_mode(1.0, 1.2, 0.07), photon_number)
        .expect("valid fixture")
}

pub fn comb_params(count: usize) -> ModelParams {
    let comb = CombSpec {
        center: 1.0,
        half_bandwidth: 0.9,
        count,
        coupling: 0.02,
    };
    ModelParams::new(1.0, build_comb(&comb).expect("valid comb"))
}

pub fn comb_system(count: usize) -> SubspaceSystem {
    build_multi_mode(&comb_params(count)).expect("valid fixture")
}
