//! Coupled-cluster response-state engine.
//!
//! The pipeline runs restricted Hartree–Fock on small s-type Gaussian systems
//! (or on FCIDUMP integrals), localizes the occupied and virtual spaces
//! separately, solves the CCSD amplitude equations and the Λ equations, and
//! reconstructs energies, densities, multipoles, polarizabilities and forces
//! from `(T, Λ)`. A symmetry-constrained surrogate predicts the same four
//! amplitude tensors directly from localized orbitals.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod bench;
pub mod cc;
pub mod chem;
pub mod datastore;
pub mod error;
pub mod gauge;
pub mod linalg;
pub mod pipeline;
pub mod response;
pub mod scf;
pub mod surrogate;
pub mod tensor;

pub use error::{Error, Result};
