//! Molecules, embedded s-type basis sets, closed-form AO integrals and
//! FCIDUMP ingestion.

pub mod basis;
pub mod boys;
pub mod fcidump;
pub mod integrals;
pub mod molecule;

pub use basis::{build_basis, BasisSet, Shell};
pub use fcidump::{ingest_fcidump, write_fcidump, FcidumpSystem};
pub use integrals::{compute_integrals, kinetic, IntegralSet, QUAD_PAIRS};
pub use molecule::{parse_geometries, parse_xyz, parse_xyz_frames, Atom, Geometry, Molecule, ANGSTROM_TO_BOHR};
