//! Λ-state reduced density matrices and the observables built from them.

mod grid;
mod properties;
mod rdm;

pub use grid::{density_on_grid, on_top_pair_density, orbital_values, pair_density, write_cube, CubeGrid};
pub use properties::{
    dipole, field_point, forces_fd, forces_from_energy, frobenius_error, polarizability_ff, quadrupole, system_dipole,
    Polarizability, PropertyReport,
};
pub use rdm::{
    cc_rdm1, cc_rdm2, cc_rdms, energy_from_rdms, hf_rdm1, hf_rdm2, natural_occupations,
    one_body_expectation, xccsd_rdm1, Rdm1, Rdm2, RdmKind,
};
