//! Shared fixtures for the benchmarks.

use dqlab::elliptical::equicorrelated;
use dqlab::{sample_elliptical, EllipticalFamily, EllipticalSpec, ScenarioMatrix};

pub const SEED: u64 = 20240901;

/// Four equicorrelated t3 losses with `r = 0.3`.
pub fn t3_scenarios(rows: usize) -> ScenarioMatrix {
    let spec = EllipticalSpec::centered(EllipticalFamily::StudentT { dof: 3.0 }, equicorrelated(4, 0.3))
        .expect("valid dispersion");
    sample_elliptical(&spec, rows, SEED).expect("sampling succeeds")
}

/// The two-asset t3 model used for optimizer timings.
pub fn two_asset_scenarios(rows: usize) -> ScenarioMatrix {
    let sigma = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
    let spec = EllipticalSpec::centered(EllipticalFamily::StudentT { dof: 3.0 }, sigma).expect("valid dispersion");
    sample_elliptical(&spec, rows, SEED).expect("sampling succeeds")
}
