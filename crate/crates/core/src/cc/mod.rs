//! Spin-orbital coupled-cluster singles and doubles, its Λ equations, and a
//! determinant-space FCI reference.

pub(crate) mod equations;
mod fci;
mod solver;
mod system;

pub use fci::{determinants, fci_rdm1, fci_rdm2, fci_solve, FciResult, MAX_DETERMINANTS};
pub use solver::{
    ccsd_residuals, lagrangian_value, lambda_residuals, mp2_amplitudes, mp2_lambda, solve_ccsd,
    solve_lambda, CcOptions, CcResult,
};
pub use system::{Space, SpinOrbitalSystem};
