use std::f64::consts::PI;

use super::molecule::{element_symbol, Molecule};
use crate::error::{Error, Result};

/// One contracted s-type function centred on an atom.
///
/// `prims` holds `(exponent, coefficient)` with the coefficient already
/// multiplying the bare `exp(-α|r-A|²)`, so the contraction is normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub center: usize,
    pub prims: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub name: String,
    pub shells: Vec<Shell>,
}

impl BasisSet {
    pub fn n_ao(&self) -> usize {
        self.shells.len()
    }

    /// Basis function values at `r`.
    pub fn values_at(&self, mol: &Molecule, r: [f64; 3], out: &mut [f64]) {
        for (k, sh) in self.shells.iter().enumerate() {
            let c = mol.atoms[sh.center].pos;
            let r2 = (r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2) + (r[2] - c[2]).powi(2);
            out[k] = sh.prims.iter().map(|&(a, d)| d * (-a * r2).exp()).sum();
        }
    }
}

// STO-3G contraction for 1s shells, zeta-scaled exponents
const STO3G_D: [f64; 3] = [0.15432897, 0.53532814, 0.44463454];
const STO3G_H: [f64; 3] = [3.42525091, 0.62391373, 0.16885540];
const STO3G_HE: [f64; 3] = [6.36242139, 1.15892300, 0.31364979];

fn primitive_norm(alpha: f64) -> f64 {
    (2.0 * alpha / PI).powf(0.75)
}

/// Rescales coefficients so the contracted function has unit self-overlap.
pub fn normalize(prims: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = prims
        .iter()
        .map(|&(a, d)| (a, d * primitive_norm(a)))
        .collect();
    let mut s = 0.0;
    for &(a, ca) in &out {
        for &(b, cb) in &out {
            s += ca * cb * (PI / (a + b)).powf(1.5);
        }
    }
    let scale = 1.0 / s.sqrt();
    for p in &mut out {
        p.1 *= scale;
    }
    out
}

pub fn build_basis(mol: &Molecule, name: &str) -> Result<BasisSet> {
    if !name.eq_ignore_ascii_case("sto-3g") {
        return Err(Error::UnsupportedBasis(name.to_string()));
    }
    let mut shells = Vec::with_capacity(mol.atoms.len());
    for (k, atom) in mol.atoms.iter().enumerate() {
        let exps = match atom.z {
            1 => STO3G_H,
            2 => STO3G_HE,
            z => {
                return Err(Error::UnsupportedElement {
                    element: element_symbol(z).to_string(),
                    basis: name.to_string(),
                })
            }
        };
        let prims: Vec<(f64, f64)> = exps.iter().copied().zip(STO3G_D).collect();
        shells.push(Shell {
            center: k,
            prims: normalize(&prims),
        });
    }
    Ok(BasisSet {
        name: "sto-3g".into(),
        shells,
    })
}
