use ndarray::{Array1, Array2, Array4};

use super::rdm::{Rdm1, Rdm2};
use crate::chem::{BasisSet, Molecule};
use crate::error::{Error, Result};

/// Regular grid in Gaussian cube layout (x slowest, z fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct CubeGrid {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub counts: [usize; 3],
}

impl CubeGrid {
    /// Box enclosing every nucleus with `margin` bohr on each side.
    pub fn around(mol: &Molecule, spacing: f64, margin: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for a in &mol.atoms {
            for k in 0..3 {
                lo[k] = lo[k].min(a.pos[k] - margin);
                hi[k] = hi[k].max(a.pos[k] + margin);
            }
        }
        let counts = [0, 1, 2].map(|k| ((hi[k] - lo[k]) / spacing).ceil() as usize + 1);
        Self { origin: lo, spacing, counts }
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        let [nx, ny, nz] = self.counts;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    out.push([
                        self.origin[0] + i as f64 * self.spacing,
                        self.origin[1] + j as f64 * self.spacing,
                        self.origin[2] + k as f64 * self.spacing,
                    ]);
                }
            }
        }
        out
    }
}

/// Values of the orbitals `ψ_p = Σ_μ C_μp χ_μ` at `r`.
pub fn orbital_values(c: &Array2<f64>, basis: &BasisSet, mol: &Molecule, r: [f64; 3]) -> Result<Array1<f64>> {
    let mut chi = vec![0.0; basis.n_ao()];
    basis.values_at(mol, r, &mut chi);
    if chi.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotFinite(format!("basis values at {r:?}")));
    }
    Ok(c.t().dot(&Array1::from(chi)))
}

/// `ρ(r) = Σ_pq γ_pq ψ_p(r) ψ_q(r)` with the symmetrized spin-traced density.
pub fn density_on_grid(rdm: &Rdm1, c: &Array2<f64>, basis: &BasisSet, mol: &Molecule, points: &[[f64; 3]]) -> Result<Vec<f64>> {
    let g = rdm.symmetrized().spatial();
    if g.nrows() != c.ncols() {
        return Err(Error::Dimension("density and orbital counts differ".into()));
    }
    let d_ao = c.dot(&g).dot(&c.t());
    points
        .iter()
        .map(|&r| {
            let mut chi = vec![0.0; basis.n_ao()];
            basis.values_at(mol, r, &mut chi);
            if chi.iter().any(|x| !x.is_finite()) {
                return Err(Error::NotFinite(format!("basis values at {r:?}")));
            }
            let chi = Array1::from(chi);
            Ok(chi.dot(&d_ao.dot(&chi)))
        })
        .collect()
}

fn symmetric_spatial(rdm: &Rdm2) -> Array4<f64> {
    let g = rdm.spatial();
    Array4::from_shape_fn(g.dim(), |(p, q, r, s)| 0.5 * (g[[p, q, r, s]] + g[[r, s, p, q]]))
}

/// `Π(r, r′) = Σ Γ_pq,rs ψ_p(r) ψ_r(r) ψ_q(r′) ψ_s(r′)`, spin-traced, with the
/// normalization `∫∫ Π = N(N−1)`.
pub fn pair_density(
    rdm: &Rdm2,
    c: &Array2<f64>,
    basis: &BasisSet,
    mol: &Molecule,
    r_ref: [f64; 3],
    points: &[[f64; 3]],
) -> Result<Vec<f64>> {
    let g = symmetric_spatial(rdm);
    let n = g.dim().0;
    if n != c.ncols() {
        return Err(Error::Dimension("pair density and orbital counts differ".into()));
    }
    let phi_ref = orbital_values(c, basis, mol, r_ref)?;
    let mut m = Array2::<f64>::zeros((n, n));
    for p in 0..n {
        for r in 0..n {
            let mut x = 0.0;
            for q in 0..n {
                for s in 0..n {
                    x += g[[p, q, r, s]] * phi_ref[q] * phi_ref[s];
                }
            }
            m[[p, r]] = x;
        }
    }
    points
        .iter()
        .map(|&pt| {
            let phi = orbital_values(c, basis, mol, pt)?;
            Ok(phi.dot(&m.dot(&phi)))
        })
        .collect()
}

/// `Π(r, r)`.
pub fn on_top_pair_density(rdm: &Rdm2, c: &Array2<f64>, basis: &BasisSet, mol: &Molecule, points: &[[f64; 3]]) -> Result<Vec<f64>> {
    let g = symmetric_spatial(rdm);
    let n = g.dim().0;
    if n != c.ncols() {
        return Err(Error::Dimension("pair density and orbital counts differ".into()));
    }
    points
        .iter()
        .map(|&pt| {
            let phi = orbital_values(c, basis, mol, pt)?;
            let mut x = 0.0;
            for ((p, q, r, s), v) in g.indexed_iter() {
                x += v * phi[p] * phi[r] * phi[q] * phi[s];
            }
            Ok(x)
        })
        .collect()
}

/// Gaussian cube text for values laid out as [`CubeGrid::points`].
pub fn write_cube(mol: &Molecule, grid: &CubeGrid, values: &[f64], comment: &str) -> String {
    let mut s = format!("{comment}\ngenerated on a regular grid, bohr\n");
    s.push_str(&format!(
        "{:5} {:12.6} {:12.6} {:12.6}\n",
        mol.atoms.len(),
        grid.origin[0],
        grid.origin[1],
        grid.origin[2]
    ));
    for k in 0..3 {
        let mut v = [0.0; 3];
        v[k] = grid.spacing;
        s.push_str(&format!("{:5} {:12.6} {:12.6} {:12.6}\n", grid.counts[k], v[0], v[1], v[2]));
    }
    for a in &mol.atoms {
        s.push_str(&format!(
            "{:5} {:12.6} {:12.6} {:12.6} {:12.6}\n",
            a.z, a.z as f64, a.pos[0], a.pos[1], a.pos[2]
        ));
    }
    let nz = grid.counts[2];
    for row in values.chunks(nz) {
        for (k, v) in row.iter().enumerate() {
            s.push_str(&format!(" {v:13.5e}"));
            if k % 6 == 5 {
                s.push('\n');
            }
        }
        if !nz.is_multiple_of(6) {
            s.push('\n');
        }
    }
    s
}
