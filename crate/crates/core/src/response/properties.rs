use ndarray::Array2;
use rayon::prelude::*;

use super::rdm::{cc_rdm1, natural_occupations, Rdm1};
use crate::cc::{solve_ccsd, solve_lambda, CcOptions, SpinOrbitalSystem};
use crate::chem::{Molecule, QUAD_PAIRS};
use crate::error::{Error, Result};
use crate::pipeline::{total_energy, Method, PipelineOptions};

/// `μ_α = Σ_A Z_A (R_A − O)_α − Σ_pq ⟨p|r_α − O_α|q⟩ γ_pq`, integrals about `origin`.
pub fn dipole(rdm: &Rdm1, mo_dipole: &[Array2<f64>; 3], mol: &Molecule, origin: [f64; 3]) -> Result<[f64; 3]> {
    electronic_dipole(rdm, mo_dipole, mol.nuclear_dipole(origin))
}

fn electronic_dipole(rdm: &Rdm1, d: &[Array2<f64>; 3], nuclear: [f64; 3]) -> Result<[f64; 3]> {
    let mut mu = nuclear;
    for a in 0..3 {
        if d[a].dim() != rdm.gamma.dim() {
            return Err(Error::Dimension("dipole integrals and density differ in size".into()));
        }
        mu[a] -= (&d[a] * &rdm.gamma).sum();
    }
    Ok(mu)
}

/// Dipole of a spin-orbital system carrying its own integrals and nuclear part.
pub fn system_dipole(rdm: &Rdm1, sys: &SpinOrbitalSystem) -> Result<[f64; 3]> {
    let d = sys
        .dipole
        .as_ref()
        .ok_or_else(|| Error::Invalid("system has no dipole integrals".into()))?;
    electronic_dipole(rdm, d, sys.nuc_dipole)
}

/// Second moment `Σ_A Z_A (R−O)_α(R−O)_β − Σ_pq ⟨p|(r−O)_α(r−O)_β|q⟩ γ_pq`.
pub fn quadrupole(rdm: &Rdm1, mo_quadrupole: &[Array2<f64>; 6], mol: &Molecule, origin: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let mut q = mol.nuclear_second_moment(origin);
    for (k, &(a, b)) in QUAD_PAIRS.iter().enumerate() {
        if mo_quadrupole[k].dim() != rdm.gamma.dim() {
            return Err(Error::Dimension("quadrupole integrals and density differ in size".into()));
        }
        let e = (&mo_quadrupole[k] * &rdm.gamma).sum();
        q[a][b] -= e;
        if a != b {
            q[b][a] -= e;
        }
    }
    Ok(q)
}

/// CCSD total energy and Λ-state dipole of `sys` under a uniform field.
pub fn field_point(sys: &SpinOrbitalSystem, field: [f64; 3], opts: &CcOptions) -> Result<(f64, [f64; 3])> {
    let s = sys.with_field(field)?;
    let cc = solve_ccsd(&s, opts)?;
    let cc = solve_lambda(&s, &cc, opts)?;
    let mu = system_dipole(&cc_rdm1(&cc.amps)?, &s)?;
    Ok((cc.e_total, mu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polarizability {
    /// Symmetrized tensor.
    pub alpha: [[f64; 3]; 3],
    /// `max |α_ab − α_ba|` before symmetrization.
    pub asymmetry: f64,
    pub step: f64,
}

/// Frozen-orbital static polarizability by central differences of the
/// Λ-state dipole, `α_αβ = [μ_α(+h e_β) − μ_α(−h e_β)] / 2h`.
pub fn polarizability_ff(sys: &SpinOrbitalSystem, step: f64, opts: &CcOptions) -> Result<Polarizability> {
    if !(1e-4..=1e-2).contains(&step) {
        return Err(Error::Invalid(format!("field step {step} outside [1e-4, 1e-2]")));
    }
    let points: Vec<(usize, f64)> = (0..3).flat_map(|b| [(b, step), (b, -step)]).collect();
    let dip: Vec<Result<[f64; 3]>> = points
        .par_iter()
        .map(|&(b, h)| {
            let mut f = [0.0; 3];
            f[b] = h;
            field_point(sys, f, opts).map(|x| x.1)
        })
        .collect();
    let dip: Vec<[f64; 3]> = dip.into_iter().collect::<Result<_>>()?;
    let mut raw = [[0.0; 3]; 3];
    for b in 0..3 {
        for a in 0..3 {
            raw[a][b] = (dip[2 * b][a] - dip[2 * b + 1][a]) / (2.0 * step);
        }
    }
    let mut alpha = [[0.0; 3]; 3];
    let mut asymmetry = 0.0_f64;
    for a in 0..3 {
        for b in 0..3 {
            alpha[a][b] = 0.5 * (raw[a][b] + raw[b][a]);
            asymmetry = asymmetry.max((raw[a][b] - raw[b][a]).abs());
        }
    }
    Ok(Polarizability { alpha, asymmetry, step })
}

pub fn frobenius_error(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += (a[i][j] - b[i][j]).powi(2);
        }
    }
    s.sqrt()
}

/// `F_Aα = −[E(R + h e_Aα) − E(R − h e_Aα)] / 2h` with a full re-solve per point.
pub fn forces_fd(mol: &Molecule, basis: &str, method: Method, step: f64, opts: &PipelineOptions) -> Result<Vec<[f64; 3]>> {
    forces_from_energy(mol, step, |m| total_energy(m, basis, method, opts))
}

/// `F = −∂E/∂R` by central differences of an arbitrary energy model; the
/// displaced evaluations run in parallel and merge by displacement index.
pub fn forces_from_energy<E>(mol: &Molecule, step: f64, energy: E) -> Result<Vec<[f64; 3]>>
where
    E: Fn(&Molecule) -> Result<f64> + Sync,
{
    let n = mol.atoms.len();
    let jobs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|a| (0..3).flat_map(move |k| [(a, k, step), (a, k, -step)]))
        .collect();
    let energies: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(a, k, h)| energy(&mol.displaced(a, k, h)))
        .collect();
    let energies: Vec<f64> = energies.into_iter().collect::<Result<_>>()?;
    let mut f = vec![[0.0; 3]; n];
    for a in 0..n {
        for k in 0..3 {
            let idx = 2 * (3 * a + k);
            f[a][k] = -(energies[idx] - energies[idx + 1]) / (2.0 * step);
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub e_total: f64,
    pub dipole: Option<[f64; 3]>,
    pub quadrupole: Option<[[f64; 3]; 3]>,
    pub polarizability: Option<Polarizability>,
    pub forces: Option<Vec<[f64; 3]>>,
    pub natural_occupations: Vec<f64>,
    /// Method, gauge, origin, tolerances and density conventions.
    pub provenance: Vec<(String, String)>,
}

impl PropertyReport {
    pub fn new(e_total: f64, rdm: &Rdm1) -> Self {
        Self {
            e_total,
            dipole: None,
            quadrupole: None,
            polarizability: None,
            forces: None,
            natural_occupations: natural_occupations(rdm),
            provenance: Vec::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.provenance.push((key.to_string(), value.to_string()));
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("e_total: {:.12}\n", self.e_total);
        let v3 = |v: &[f64; 3]| format!("{:.10} {:.10} {:.10}", v[0], v[1], v[2]);
        if let Some(d) = &self.dipole {
            out.push_str(&format!("dipole: {}\n", v3(d)));
        }
        if let Some(q) = &self.quadrupole {
            for (k, row) in q.iter().enumerate() {
                out.push_str(&format!("quadrupole_{}: {}\n", ["x", "y", "z"][k], v3(row)));
            }
        }
        if let Some(p) = &self.polarizability {
            for (k, row) in p.alpha.iter().enumerate() {
                out.push_str(&format!("polarizability_{}: {}\n", ["x", "y", "z"][k], v3(row)));
            }
            out.push_str(&format!("polarizability_asymmetry: {:e}\n", p.asymmetry));
            out.push_str(&format!("field_step: {:e}\n", p.step));
        }
        if let Some(f) = &self.forces {
            for (a, row) in f.iter().enumerate() {
                out.push_str(&format!("force_{a}: {}\n", v3(row)));
            }
        }
        let occ: Vec<String> = self.natural_occupations.iter().map(|x| format!("{x:.10}")).collect();
        out.push_str(&format!("natural_occupations: {}\n", occ.join(" ")));
        for (k, v) in &self.provenance {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out
    }
}
