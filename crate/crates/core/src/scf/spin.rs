use ndarray::{Array2, Array4};

use super::transform::MoIntegrals;
use crate::cc::SpinOrbitalSystem;
use crate::gauge::antisymmetrize;

fn expand_one(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    Array2::from_shape_fn((2 * n, 2 * n), |(p, q)| {
        if p % 2 == q % 2 {
            m[[p / 2, q / 2]]
        } else {
            0.0
        }
    })
}

/// Interleaved αβ spin orbitals (`2p + σ`) with `⟨pq||rs⟩ = (pr|qs) − (ps|qr)`.
pub fn spin_orbital_expand(mo: &MoIntegrals, n_occ: usize) -> SpinOrbitalSystem {
    let n = 2 * mo.n_mo;
    let g = &mo.eri;
    let eri = Array4::from_shape_fn((n, n, n, n), |(p, q, r, s)| {
        let (sp, sq, sr, ss) = (p % 2, q % 2, r % 2, s % 2);
        let (p2, q2, r2, s2) = (p / 2, q / 2, r / 2, s / 2);
        let direct = if sp == sr && sq == ss { g[[p2, r2, q2, s2]] } else { 0.0 };
        let exchange = if sp == ss && sq == sr { g[[p2, s2, q2, r2]] } else { 0.0 };
        direct - exchange
    });
    // exact antisymmetry even where the transformed (pq|rs) is symmetric only to rounding
    let eri = antisymmetrize(&eri);
    let mut sys = SpinOrbitalSystem::new(expand_one(&mo.h), eri, 2 * n_occ, mo.e_nuc);
    sys.dipole = mo.dipole.as_ref().map(|d| d.clone().map(|m| expand_one(&m)));
    sys.quadrupole = mo.quadrupole.as_ref().map(|d| d.clone().map(|m| expand_one(&m)));
    sys
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{build_basis, compute_integrals, Atom, Molecule};
    use crate::scf::{mo_transform, solve_rhf, ScfOptions};

    #[test]
    fn h2_bookkeeping_and_canonical_fock() {
        let mol = Molecule::new(
            vec![
                Atom { z: 1, pos: [0.0; 3] },
                Atom { z: 1, pos: [0.0, 0.0, 1.4] },
            ],
            0,
        )
        .unwrap();
        let ints = compute_integrals(&mol, &build_basis(&mol, "sto-3g").unwrap(), [0.0; 3]);
        let scf = solve_rhf(&ints, 2, &ScfOptions::default()).unwrap();
        let mo = mo_transform(&ints, &scf.c).unwrap();
        let sys = spin_orbital_expand(&mo, scf.n_occ);
        assert_eq!(sys.n_so(), 4);
        assert_eq!(sys.n_occ, 2);
        assert_eq!(sys.n_virt, 2);
        for p in 0..4 {
            for q in 0..4 {
                let expect = if p == q { scf.eps[p / 2] } else { 0.0 };
                assert!((sys.f[[p, q]] - expect).abs() < 1e-8);
                for r in 0..4 {
                    for s in 0..4 {
                        assert_eq!(sys.eri[[p, q, r, s]], -sys.eri[[p, q, s, r]]);
                        assert_eq!(sys.eri[[p, q, r, s]], -sys.eri[[q, p, r, s]]);
                    }
                }
            }
        }
        assert!((sys.e_ref - scf.e_hf).abs() < 1e-10);
    }
}
