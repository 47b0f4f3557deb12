//! End-to-end runs: geometry → integrals → RHF → spin orbitals → CCSD/Λ,
//! plus the localized gauge when multipole integrals exist.

use crate::cc::{mp2_amplitudes, solve_ccsd, solve_lambda, CcOptions, CcResult, SpinOrbitalSystem};
use crate::chem::{build_basis, compute_integrals, BasisSet, FcidumpSystem, IntegralSet, Molecule};
use crate::error::{Error, Result};
use crate::gauge::{localized_gauge, matrix_id, transform_amplitudes, AmplitudeSet, Direction, GaugeSpec, LocalizeOptions};
use crate::scf::{mo_transform, solve_rhf, spin_orbital_expand, MoIntegrals, ScfOptions, ScfResult};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineOptions {
    pub scf: ScfOptions,
    pub cc: CcOptions,
    pub localize: LocalizeOptions,
}

/// Total-energy model used for finite-difference forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Hf,
    Mp2,
    Ccsd,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hf" | "rhf" => Ok(Method::Hf),
            "mp2" => Ok(Method::Mp2),
            "ccsd" => Ok(Method::Ccsd),
            other => Err(Error::Invalid(format!("unknown method `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hf => "hf",
            Method::Mp2 => "mp2",
            Method::Ccsd => "ccsd",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub mol: Option<Molecule>,
    pub basis: Option<BasisSet>,
    pub ints: IntegralSet,
    pub scf: ScfResult,
    pub mo: MoIntegrals,
    /// Canonical-gauge spin-orbital Hamiltonian.
    pub sys: SpinOrbitalSystem,
}

fn from_integrals(ints: IntegralSet, n_electrons: usize, opts: &ScfOptions) -> Result<(ScfResult, MoIntegrals, SpinOrbitalSystem)> {
    let scf = solve_rhf(&ints, n_electrons, opts)?;
    if !scf.converged {
        return Err(Error::NotConverged {
            what: "SCF",
            iterations: scf.n_iter,
            residual: f64::NAN,
        });
    }
    let mo = mo_transform(&ints, &scf.c)?;
    let sys = spin_orbital_expand(&mo, scf.n_occ);
    Ok((scf, mo, sys))
}

/// Integrals about the centre of nuclear charge, converged RHF, spin orbitals.
pub fn prepare(mol: &Molecule, basis_name: &str, opts: &ScfOptions) -> Result<Prepared> {
    let basis = build_basis(mol, basis_name)?;
    let origin = mol.charge_center();
    let ints = compute_integrals(mol, &basis, origin);
    let (scf, mo, mut sys) = from_integrals(ints.clone(), mol.n_electrons, opts)?;
    sys.nuc_dipole = mol.nuclear_dipole(origin);
    Ok(Prepared {
        mol: Some(mol.clone()),
        basis: Some(basis),
        ints,
        scf,
        mo,
        sys,
    })
}

/// RHF in the orthonormal FCIDUMP orbital basis, then spin orbitals.
pub fn prepare_fcidump(fd: &FcidumpSystem, opts: &ScfOptions) -> Result<Prepared> {
    let (scf, mo, sys) = from_integrals(fd.ints.clone(), fd.n_electrons, opts)?;
    Ok(Prepared {
        mol: None,
        basis: None,
        ints: fd.ints.clone(),
        scf,
        mo,
        sys,
    })
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub prep: Prepared,
    /// Canonical-gauge amplitudes; multipliers filled when requested.
    pub cc: CcResult,
    pub gauge: Option<GaugeSpec>,
    pub localized: Option<AmplitudeSet>,
}

/// CCSD (and optionally Λ) on a prepared system; localizes when possible.
pub fn solve_prepared(prep: Prepared, lambda: bool, opts: &PipelineOptions) -> Result<Solved> {
    let mut cc = solve_ccsd(&prep.sys, &opts.cc)?;
    if lambda {
        cc = solve_lambda(&prep.sys, &cc, &opts.cc)?;
    }
    cc.amps.basis_id = matrix_id(&prep.scf.c);
    let (gauge, localized) = match &prep.mol {
        Some(mol) if prep.ints.has_multipoles => {
            let g = localized_gauge(&prep.scf, &prep.ints, mol, &opts.localize)?;
            let loc = transform_amplitudes(&cc.amps, &g, Direction::ToLocalized)?;
            (Some(g), Some(loc))
        }
        _ => (None, None),
    };
    Ok(Solved {
        prep,
        cc,
        gauge,
        localized,
    })
}

pub fn solve(mol: &Molecule, basis_name: &str, lambda: bool, opts: &PipelineOptions) -> Result<Solved> {
    let prep = prepare(mol, basis_name, &opts.scf)?;
    solve_prepared(prep, lambda, opts)
}

/// Total energy of `mol` for the given method, re-solving everything.
pub fn total_energy(mol: &Molecule, basis_name: &str, method: Method, opts: &PipelineOptions) -> Result<f64> {
    let prep = prepare(mol, basis_name, &opts.scf)?;
    match method {
        Method::Hf => Ok(prep.scf.e_hf),
        Method::Mp2 => Ok(prep.sys.e_ref + mp2_amplitudes(&prep.sys)?.1),
        Method::Ccsd => Ok(solve_ccsd(&prep.sys, &opts.cc)?.e_total),
    }
}
