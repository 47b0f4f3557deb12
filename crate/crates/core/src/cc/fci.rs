//! Determinant-space configuration interaction for small systems.

use std::collections::HashMap;

use ndarray::{Array1, Array2, Array4};

use super::system::SpinOrbitalSystem;
use crate::error::{Error, Result};
use crate::linalg::eigh;

/// Largest determinant space accepted.
pub const MAX_DETERMINANTS: usize = 20_000;
const DENSE_LIMIT: usize = 600;

#[derive(Debug, Clone, PartialEq)]
pub struct FciResult {
    /// Lowest eigenvalue plus nuclear repulsion.
    pub energy: f64,
    pub vector: Array1<f64>,
    /// Occupation bitmasks over spin orbitals, index `2p + σ`.
    pub determinants: Vec<u64>,
}

fn annihilate(det: u64, p: usize) -> Option<(f64, u64)> {
    let bit = 1u64 << p;
    if det & bit == 0 {
        return None;
    }
    let sign = if (det & (bit - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((sign, det ^ bit))
}

fn create(det: u64, p: usize) -> Option<(f64, u64)> {
    let bit = 1u64 << p;
    if det & bit != 0 {
        return None;
    }
    let sign = if (det & (bit - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((sign, det | bit))
}

fn occupied(det: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&p| det & (1 << p) != 0).collect()
}

fn combinations(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    fn rec(start: usize, n: usize, k: usize, acc: u64, out: &mut Vec<u64>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for p in start..n {
            if n - p < k {
                break;
            }
            rec(p + 1, n, k - 1, acc | (1 << p), out);
        }
    }
    rec(0, n, k, 0, &mut out);
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn spread(spatial: u64, spin: usize, n: usize) -> u64 {
    (0..n)
        .filter(|&p| spatial & (1 << p) != 0)
        .fold(0u64, |acc, p| acc | 1 << (2 * p + spin))
}

/// All `S_z = 0` determinants, ordered by (α string, β string).
pub fn determinants(n_spatial: usize, n_electrons: usize) -> Result<Vec<u64>> {
    if !n_electrons.is_multiple_of(2) {
        return Err(Error::OddElectrons(n_electrons as i64));
    }
    if 2 * n_spatial > 64 {
        return Err(Error::SpaceTooLarge(usize::MAX));
    }
    let k = n_electrons / 2;
    let dim = binomial(n_spatial, k).saturating_mul(binomial(n_spatial, k));
    if dim > MAX_DETERMINANTS {
        return Err(Error::SpaceTooLarge(dim));
    }
    let strings = combinations(n_spatial, k);
    let mut dets = Vec::with_capacity(dim);
    for &a in &strings {
        for &b in &strings {
            dets.push(spread(a, 0, n_spatial) | spread(b, 1, n_spatial));
        }
    }
    Ok(dets)
}

/// Sparse rows `(J, ⟨J|H|I⟩)` for every determinant `I` (electronic part only).
fn hamiltonian_columns(sys: &SpinOrbitalSystem, dets: &[u64]) -> Vec<Vec<(usize, f64)>> {
    let n = sys.n_so();
    let index: HashMap<u64, usize> = dets.iter().enumerate().map(|(k, &d)| (d, k)).collect();
    let (h, v) = (&sys.h, &sys.eri);
    dets.iter()
        .map(|&det| {
            let occ = occupied(det, n);
            let virt: Vec<usize> = (0..n).filter(|p| det & (1 << p) == 0).collect();
            let mut col = Vec::new();
            let mut diag = 0.0;
            for &i in &occ {
                diag += h[[i, i]];
                for &j in &occ {
                    diag += 0.5 * v[[i, j, i, j]];
                }
            }
            col.push((index[&det], diag));
            for &i in &occ {
                for &a in &virt {
                    if a % 2 != i % 2 {
                        continue;
                    }
                    let (s1, d1) = annihilate(det, i).expect("occupied");
                    let (s2, d2) = create(d1, a).expect("empty");
                    let Some(&k) = index.get(&d2) else { continue };
                    let mut val = h[[a, i]];
                    for &m in &occ {
                        val += v[[a, m, i, m]];
                    }
                    col.push((k, s1 * s2 * val));
                }
            }
            for (x, &i) in occ.iter().enumerate() {
                for &j in &occ[x + 1..] {
                    for (y, &a) in virt.iter().enumerate() {
                        for &b in &virt[y + 1..] {
                            if (a % 2 + b % 2) != (i % 2 + j % 2) {
                                continue;
                            }
                            let (s1, d1) = annihilate(det, i).expect("occupied");
                            let (s2, d2) = annihilate(d1, j).expect("occupied");
                            let (s3, d3) = create(d2, b).expect("empty");
                            let (s4, d4) = create(d3, a).expect("empty");
                            let Some(&k) = index.get(&d4) else { continue };
                            let val = v[[a, b, i, j]];
                            if val != 0.0 {
                                col.push((k, s1 * s2 * s3 * s4 * val));
                            }
                        }
                    }
                }
            }
            col
        })
        .collect()
}

fn matvec(cols: &[Vec<(usize, f64)>], x: &Array1<f64>) -> Array1<f64> {
    let mut y = Array1::zeros(x.len());
    for (i, col) in cols.iter().enumerate() {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for &(j, v) in col {
            y[j] += v * xi;
        }
    }
    y
}

fn davidson(cols: &[Vec<(usize, f64)>], start: usize) -> Result<(f64, Array1<f64>)> {
    let n = cols.len();
    let diag: Vec<f64> = cols
        .iter()
        .enumerate()
        .map(|(i, c)| c.iter().filter(|(j, _)| *j == i).map(|(_, v)| v).sum())
        .collect();
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut images: Vec<Array1<f64>> = Vec::new();
    let mut guess = Array1::zeros(n);
    guess[start] = 1.0;
    let mut next = guess;
    let max_sub = 40;
    for _ in 0..500 {
        for b in &basis {
            let ov = b.dot(&next);
            next.scaled_add(-ov, b);
        }
        let norm = next.dot(&next).sqrt();
        if norm < 1e-14 {
            return Err(Error::NotConverged {
                what: "Davidson",
                iterations: basis.len(),
                residual: norm,
            });
        }
        next /= norm;
        images.push(matvec(cols, &next));
        basis.push(next);
        let m = basis.len();
        let sub = Array2::from_shape_fn((m, m), |(i, j)| basis[i].dot(&images[j]));
        let (w, u) = eigh(&sub);
        let theta = w[0];
        let mut x = Array1::zeros(n);
        let mut hx = Array1::zeros(n);
        for k in 0..m {
            x.scaled_add(u[[k, 0]], &basis[k]);
            hx.scaled_add(u[[k, 0]], &images[k]);
        }
        let r = &hx - &(&x * theta);
        let rn = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if rn < 1e-11 {
            return Ok((theta, x));
        }
        next = Array1::from_shape_fn(n, |i| {
            let d = theta - diag[i];
            r[i] / if d.abs() < 1e-8 { 1e-8 } else { d }
        });
        if m >= max_sub {
            basis = vec![x.clone()];
            images = vec![hx];
        }
    }
    Err(Error::NotConverged {
        what: "Davidson",
        iterations: 500,
        residual: f64::NAN,
    })
}

/// Lowest `S_z = 0` eigenstate of the spin-orbital Hamiltonian.
pub fn fci_solve(sys: &SpinOrbitalSystem, n_electrons: usize) -> Result<FciResult> {
    if !sys.n_so().is_multiple_of(2) {
        return Err(Error::Invalid("spin-orbital count must be even".into()));
    }
    let dets = determinants(sys.n_so() / 2, n_electrons)?;
    let cols = hamiltonian_columns(sys, &dets);
    let reference: u64 = (0..n_electrons).fold(0, |acc, p| acc | 1 << p);
    let start = dets.iter().position(|&d| d == reference).unwrap_or(0);
    let (e, mut c) = if dets.len() <= DENSE_LIMIT {
        let n = dets.len();
        let mut h = Array2::zeros((n, n));
        for (i, col) in cols.iter().enumerate() {
            for &(j, v) in col {
                h[[j, i]] += v;
            }
        }
        let (w, u) = eigh(&h);
        (w[0], u.column(0).to_owned())
    } else {
        davidson(&cols, start)?
    };
    let norm = c.dot(&c).sqrt();
    c /= norm;
    if c[start] < 0.0 {
        c.mapv_inplace(|x| -x);
    }
    Ok(FciResult {
        energy: e + sys.e_nuc,
        vector: c,
        determinants: dets,
    })
}

/// `γ_pq = ⟨Ψ|p†q|Ψ⟩`.
pub fn fci_rdm1(fci: &FciResult, n_so: usize) -> Array2<f64> {
    let index: HashMap<u64, usize> = fci.determinants.iter().enumerate().map(|(k, &d)| (d, k)).collect();
    let mut g = Array2::zeros((n_so, n_so));
    for (k, &det) in fci.determinants.iter().enumerate() {
        let ck = fci.vector[k];
        for q in occupied(det, n_so) {
            let (s1, d1) = annihilate(det, q).expect("occupied");
            for p in 0..n_so {
                let Some((s2, d2)) = create(d1, p) else { continue };
                if let Some(&j) = index.get(&d2) {
                    g[[p, q]] += s1 * s2 * fci.vector[j] * ck;
                }
            }
        }
    }
    g
}

/// `Γ_pq,rs = ⟨Ψ|p†q†sr|Ψ⟩`.
pub fn fci_rdm2(fci: &FciResult, n_so: usize) -> Array4<f64> {
    let index: HashMap<u64, usize> = fci.determinants.iter().enumerate().map(|(k, &d)| (d, k)).collect();
    let mut g = Array4::zeros((n_so, n_so, n_so, n_so));
    for (k, &det) in fci.determinants.iter().enumerate() {
        let ck = fci.vector[k];
        let occ = occupied(det, n_so);
        for &r in &occ {
            let (s1, d1) = annihilate(det, r).expect("occupied");
            for &s in &occ {
                let Some((s2, d2)) = annihilate(d1, s) else { continue };
                for q in 0..n_so {
                    let Some((s3, d3)) = create(d2, q) else { continue };
                    for p in 0..n_so {
                        let Some((s4, d4)) = create(d3, p) else { continue };
                        if let Some(&j) = index.get(&d4) {
                            g[[p, q, r, s]] += s1 * s2 * s3 * s4 * fci.vector[j] * ck;
                        }
                    }
                }
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_counts() {
        assert_eq!(determinants(2, 2).unwrap().len(), 4);
        assert_eq!(determinants(4, 4).unwrap().len(), 36);
        assert!(matches!(determinants(12, 12), Err(Error::SpaceTooLarge(_))));
        assert!(determinants(3, 3).is_err());
    }

    #[test]
    fn operator_signs() {
        // a_1 on |0 1⟩ passes one occupied orbital
        assert_eq!(annihilate(0b11, 1), Some((-1.0, 0b01)));
        assert_eq!(create(0b01, 1), Some((-1.0, 0b11)));
        assert_eq!(create(0b01, 0), None);
    }
}
