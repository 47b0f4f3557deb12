use std::f64::consts::PI;

use ndarray::{Array2, Array4};

use super::basis::BasisSet;
use super::boys::boys0;
use super::molecule::Molecule;

/// Cartesian pairs of the six stored quadrupole components.
pub const QUAD_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// AO-basis (or orthonormal MO-basis, for FCIDUMP input) integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub n_ao: usize,
    pub s: Array2<f64>,
    pub hcore: Array2<f64>,
    /// `(pq|rs)`, chemists' notation.
    pub eri: Array4<f64>,
    /// `⟨p|r_α − O_α|q⟩`.
    pub dipole: [Array2<f64>; 3],
    /// `⟨p|(r−O)_α (r−O)_β|q⟩` in [`QUAD_PAIRS`] order.
    pub quadrupole: [Array2<f64>; 6],
    pub e_nuc: f64,
    pub origin: [f64; 3],
    /// False for FCIDUMP input, which carries no multipole integrals.
    pub has_multipoles: bool,
}

impl IntegralSet {
    /// The same set with two-electron integrals removed.
    pub fn without_interaction(&self) -> Self {
        let mut out = self.clone();
        out.eri.fill(0.0);
        out
    }
}

struct Prim {
    alpha: f64,
    coef: f64,
    center: [f64; 3],
}

fn primitives(mol: &Molecule, basis: &BasisSet) -> Vec<Vec<Prim>> {
    basis
        .shells
        .iter()
        .map(|sh| {
            sh.prims
                .iter()
                .map(|&(alpha, coef)| Prim {
                    alpha,
                    coef,
                    center: mol.atoms[sh.center].pos,
                })
                .collect()
        })
        .collect()
}

fn d2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

struct Pair {
    p: f64,
    center: [f64; 3],
    /// `c_a c_b exp(-αβ/p |AB|²)`
    pref: f64,
    /// `αβ/p`
    mu: f64,
    ab2: f64,
}

fn pair(a: &Prim, b: &Prim) -> Pair {
    let p = a.alpha + b.alpha;
    let mu = a.alpha * b.alpha / p;
    let ab2 = d2(&a.center, &b.center);
    let mut center = [0.0; 3];
    for k in 0..3 {
        center[k] = (a.alpha * a.center[k] + b.alpha * b.center[k]) / p;
    }
    Pair {
        p,
        center,
        pref: a.coef * b.coef * (-mu * ab2).exp(),
        mu,
        ab2,
    }
}

/// Closed-form integrals over contracted s functions; multipoles about `origin`.
pub fn compute_integrals(mol: &Molecule, basis: &BasisSet, origin: [f64; 3]) -> IntegralSet {
    let prims = primitives(mol, basis);
    let n = prims.len();
    let mut s = Array2::zeros((n, n));
    let mut t = Array2::zeros((n, n));
    let mut v = Array2::<f64>::zeros((n, n));
    let mut dipole: [Array2<f64>; 3] = std::array::from_fn(|_| Array2::zeros((n, n)));
    let mut quad: [Array2<f64>; 6] = std::array::from_fn(|_| Array2::zeros((n, n)));

    let pairs: Vec<Vec<Vec<Pair>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    prims[i]
                        .iter()
                        .flat_map(|a| prims[j].iter().map(move |b| pair(a, b)))
                        .collect()
                })
                .collect()
        })
        .collect();

    for i in 0..n {
        for j in 0..=i {
            for pp in &pairs[i][j] {
                let ov = pp.pref * (PI / pp.p).powf(1.5);
                s[[i, j]] += ov;
                t[[i, j]] += ov * pp.mu * (3.0 - 2.0 * pp.mu * pp.ab2);
                for atom in &mol.atoms {
                    let x = pp.p * d2(&pp.center, &atom.pos);
                    v[[i, j]] -= atom.z as f64 * pp.pref * 2.0 * PI / pp.p * boys0(x);
                }
                let rel = [
                    pp.center[0] - origin[0],
                    pp.center[1] - origin[1],
                    pp.center[2] - origin[2],
                ];
                for k in 0..3 {
                    dipole[k][[i, j]] += ov * rel[k];
                }
                for (c, &(a, b)) in QUAD_PAIRS.iter().enumerate() {
                    let diag = if a == b { 0.5 / pp.p } else { 0.0 };
                    quad[c][[i, j]] += ov * (rel[a] * rel[b] + diag);
                }
            }
        }
    }

    for m in [&mut s, &mut t, &mut v].into_iter().chain(dipole.iter_mut()).chain(quad.iter_mut()) {
        mirror_lower(m);
    }

    let mut eri = Array4::zeros((n, n, n, n));
    for i in 0..n {
        for j in 0..=i {
            let ij = i * (i + 1) / 2 + j;
            for k in 0..n {
                for l in 0..=k {
                    let kl = k * (k + 1) / 2 + l;
                    if kl > ij {
                        continue;
                    }
                    let mut val = 0.0;
                    for pab in &pairs[i][j] {
                        for pcd in &pairs[k][l] {
                            let (p, q) = (pab.p, pcd.p);
                            let x = p * q / (p + q) * d2(&pab.center, &pcd.center);
                            val += pab.pref * pcd.pref * 2.0 * PI.powf(2.5)
                                / (p * q * (p + q).sqrt())
                                * boys0(x);
                        }
                    }
                    for (a, b, c, d) in [
                        (i, j, k, l),
                        (j, i, k, l),
                        (i, j, l, k),
                        (j, i, l, k),
                        (k, l, i, j),
                        (l, k, i, j),
                        (k, l, j, i),
                        (l, k, j, i),
                    ] {
                        eri[[a, b, c, d]] = val;
                    }
                }
            }
        }
    }

    IntegralSet {
        n_ao: n,
        hcore: &t + &v,
        s,
        eri,
        dipole,
        quadrupole: quad,
        e_nuc: mol.nuclear_repulsion(),
        origin,
        has_multipoles: true,
    }
}

fn mirror_lower(m: &mut Array2<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            m[[j, i]] = m[[i, j]];
        }
    }
}

/// Kinetic-energy matrix alone (the core Hamiltonian folds it with attraction).
pub fn kinetic(mol: &Molecule, basis: &BasisSet) -> Array2<f64> {
    let prims = primitives(mol, basis);
    let n = prims.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        prims[i]
            .iter()
            .flat_map(|a| prims[j].iter().map(move |b| pair(a, b)))
            .map(|pp| pp.pref * (PI / pp.p).powf(1.5) * pp.mu * (3.0 - 2.0 * pp.mu * pp.ab2))
            .sum()
    })
}
