//! Restricted Hartree–Fock, integral transformation and spin-orbital expansion.

mod rhf;
mod spin;
mod transform;

pub use rhf::{fix_phases, solve_rhf, ScfOptions, ScfResult};
pub use spin::spin_orbital_expand;
pub use transform::{mo_transform, MoIntegrals};
