use ndarray::{s, Array1, Array2, Axis};

use crate::chem::IntegralSet;
use crate::error::{Error, Result};
use crate::linalg::{eigh, inv_sqrt, Diis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfOptions {
    pub max_iter: usize,
    pub e_tol: f64,
    pub d_tol: f64,
    /// 0 or 1 disables DIIS.
    pub diis_depth: usize,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            e_tol: 1e-12,
            d_tol: 1e-10,
            diis_depth: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScfResult {
    /// AO × MO coefficients, columns ordered by orbital energy.
    pub c: Array2<f64>,
    pub eps: Array1<f64>,
    pub e_hf: f64,
    pub n_occ: usize,
    pub n_virt: usize,
    /// Total AO density `2 C_occ C_occᵀ`.
    pub density: Array2<f64>,
    pub converged: bool,
    pub n_iter: usize,
}

impl ScfResult {
    pub fn c_occ(&self) -> Array2<f64> {
        self.c.slice(s![.., ..self.n_occ]).to_owned()
    }

    pub fn c_virt(&self) -> Array2<f64> {
        self.c.slice(s![.., self.n_occ..]).to_owned()
    }
}

fn density(c: &Array2<f64>, n_occ: usize) -> Array2<f64> {
    let co = c.slice(s![.., ..n_occ]);
    co.dot(&co.t()) * 2.0
}

fn fock(ints: &IntegralSet, d: &Array2<f64>) -> Array2<f64> {
    let n = ints.n_ao;
    let mut f = ints.hcore.clone();
    for p in 0..n {
        for q in 0..n {
            let mut g = 0.0;
            for r in 0..n {
                for s in 0..n {
                    g += d[[r, s]] * (ints.eri[[p, q, r, s]] - 0.5 * ints.eri[[p, r, q, s]]);
                }
            }
            f[[p, q]] += g;
        }
    }
    f
}

fn energy(ints: &IntegralSet, d: &Array2<f64>, f: &Array2<f64>) -> f64 {
    0.5 * (d * &(&ints.hcore + f)).sum() + ints.e_nuc
}

/// Largest-magnitude coefficient of every column made positive, ties
/// resolved toward the lowest row index.
pub fn fix_phases(c: &mut Array2<f64>) {
    for mut col in c.axis_iter_mut(Axis(1)) {
        let big = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let tol = 1e-8 * big.max(1e-300);
        if let Some(v) = col.iter().copied().find(|x| x.abs() >= big - tol) {
            if v < 0.0 {
                col.mapv_inplace(|x| -x);
            }
        }
    }
}

fn diagonalize(f: &Array2<f64>, x: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let fp = x.t().dot(f).dot(x);
    let (eps, cp) = eigh(&fp);
    let mut c = x.dot(&cp);
    fix_phases(&mut c);
    (eps, c)
}

/// Roothaan–Hall SCF with Löwdin orthogonalization, core-Hamiltonian guess and
/// Fock-matrix DIIS. Non-convergence is reported through `converged`.
pub fn solve_rhf(ints: &IntegralSet, n_electrons: usize, opts: &ScfOptions) -> Result<ScfResult> {
    let n = ints.n_ao;
    if !n_electrons.is_multiple_of(2) {
        return Err(Error::OddElectrons(n_electrons as i64));
    }
    if n_electrons > 2 * n {
        return Err(Error::Invalid(format!(
            "{n_electrons} electrons exceed the capacity of {n} orbitals"
        )));
    }
    let n_occ = n_electrons / 2;
    let x = inv_sqrt(&ints.s, 1e-10, 1e12)?;
    let (_, c0) = diagonalize(&ints.hcore, &x);
    let mut d = density(&c0, n_occ);
    let mut e_prev = energy(ints, &d, &fock(ints, &d));
    let mut diis = Diis::new(opts.diis_depth);
    let mut converged = false;
    let mut n_iter = 0;
    for it in 1..=opts.max_iter {
        n_iter = it;
        let f = fock(ints, &d);
        let e = energy(ints, &d, &f);
        let err = x.t().dot(&(f.dot(&d).dot(&ints.s) - ints.s.dot(&d).dot(&f))).dot(&x);
        let f_use = if opts.diis_depth >= 2 {
            let flat = diis.extrapolate(f.iter().copied().collect(), err.iter().copied().collect());
            Array2::from_shape_vec((n, n), flat).expect("shape")
        } else {
            f
        };
        let (_, c) = diagonalize(&f_use, &x);
        let d_new = density(&c, n_occ);
        let dd = (&d_new - &d).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let de = (e - e_prev).abs();
        d = d_new;
        e_prev = e;
        if de < opts.e_tol && dd < opts.d_tol {
            converged = true;
            break;
        }
    }
    let f = fock(ints, &d);
    let e_hf = energy(ints, &d, &f);
    let (eps, c) = diagonalize(&f, &x);
    Ok(ScfResult {
        density: density(&c, n_occ),
        c,
        eps,
        e_hf,
        n_occ,
        n_virt: n - n_occ,
        converged,
        n_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{build_basis, compute_integrals, Atom, Molecule};

    fn ints_for(atoms: Vec<Atom>, charge: i32) -> (Molecule, IntegralSet) {
        let mol = Molecule::new(atoms, charge).unwrap();
        let b = build_basis(&mol, "sto-3g").unwrap();
        let ints = compute_integrals(&mol, &b, [0.0; 3]);
        (mol, ints)
    }

    fn h2(r: f64) -> (Molecule, IntegralSet) {
        ints_for(
            vec![
                Atom { z: 1, pos: [0.0; 3] },
                Atom { z: 1, pos: [0.0, 0.0, r] },
            ],
            0,
        )
    }

    /// Closed-shell energy of the normalized occupied orbital `cosθ φ₁ + sinθ φ₂`.
    fn rotation_energy(ints: &IntegralSet, theta: f64) -> f64 {
        let v = [theta.cos(), theta.sin()];
        let norm: f64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| v[i] * v[j] * ints.s[[i, j]])
            .sum();
        let c: Vec<f64> = v.iter().map(|x| x / norm.sqrt()).collect();
        let mut h = 0.0;
        let mut j = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                h += c[p] * c[q] * ints.hcore[[p, q]];
                for r in 0..2 {
                    for s in 0..2 {
                        j += c[p] * c[q] * c[r] * c[s] * ints.eri[[p, q, r, s]];
                    }
                }
            }
        }
        2.0 * h + j + ints.e_nuc
    }

    #[test]
    fn h2_energy_matches_angle_scan() {
        let (_, ints) = h2(1.4);
        let r = solve_rhf(&ints, 2, &ScfOptions::default()).unwrap();
        assert!(r.converged);
        // brute-force scan, then golden-section refinement
        let mut best = (0.0, f64::INFINITY);
        for k in 0..=3600 {
            let th = k as f64 * std::f64::consts::PI / 3600.0;
            let e = rotation_energy(&ints, th);
            if e < best.1 {
                best = (th, e);
            }
        }
        let (mut a, mut b) = (best.0 - 1e-3, best.0 + 1e-3);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let (x1, x2) = (b - g * (b - a), a + g * (b - a));
            if rotation_energy(&ints, x1) < rotation_energy(&ints, x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let oracle = rotation_energy(&ints, 0.5 * (a + b));
        assert!((r.e_hf - oracle).abs() < 1e-10, "{} vs {oracle}", r.e_hf);
        assert!((r.e_hf - (-1.1167)).abs() < 5e-5, "{}", r.e_hf);
        assert!(r.eps[0] < 0.0 && r.eps[1] > 0.0);
    }

    #[test]
    fn orthonormal_idempotent_sorted() {
        let (_, ints) = ints_for(
            vec![
                Atom { z: 2, pos: [0.0; 3] },
                Atom { z: 1, pos: [0.0, 0.0, 1.46] },
                Atom { z: 1, pos: [1.2, 0.3, -0.8] },
                Atom { z: 1, pos: [-0.9, 1.1, 0.4] },
            ],
            1,
        );
        let r = solve_rhf(&ints, 4, &ScfOptions::default()).unwrap();
        assert!(r.converged);
        let ctsc = r.c.t().dot(&ints.s).dot(&r.c);
        for i in 0..ctsc.nrows() {
            for j in 0..ctsc.ncols() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ctsc[[i, j]] - e).abs() < 1e-9);
            }
        }
        assert!(r.eps.windows(2).into_iter().all(|w| w[0] <= w[1]));
        let dsd = r.density.dot(&ints.s).dot(&r.density);
        assert!((dsd - &r.density * 2.0).iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn non_interacting_limit() {
        let (_, ints) = h2(1.4);
        let free = ints.without_interaction();
        let r = solve_rhf(&free, 2, &ScfOptions::default()).unwrap();
        let c0 = r.c.column(0);
        let h00 = c0.dot(&free.hcore.dot(&c0));
        assert!((r.e_hf - (2.0 * h00 + free.e_nuc)).abs() < 1e-12);
    }

    #[test]
    fn helium_single_function() {
        let (_, ints) = ints_for(vec![Atom { z: 2, pos: [0.0; 3] }], 0);
        let r = solve_rhf(&ints, 2, &ScfOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.n_iter, 1);
        assert!((r.c[[0, 0]] - 1.0 / ints.s[[0, 0]].sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diis_on_off_agree() {
        let (_, ints) = ints_for(
            vec![
                Atom { z: 1, pos: [0.0; 3] },
                Atom { z: 1, pos: [0.0, 0.0, 1.5] },
                Atom { z: 1, pos: [0.0, 0.0, 3.3] },
                Atom { z: 1, pos: [0.0, 0.4, 4.9] },
            ],
            0,
        );
        let on = solve_rhf(&ints, 4, &ScfOptions::default()).unwrap();
        let off = solve_rhf(
            &ints,
            4,
            &ScfOptions {
                diis_depth: 0,
                max_iter: 2000,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(on.converged && off.converged);
        assert!((on.e_hf - off.e_hf).abs() < 1e-9);
    }

    #[test]
    fn too_many_electrons() {
        let (_, ints) = h2(1.4);
        assert!(solve_rhf(&ints, 6, &ScfOptions::default()).is_err());
    }
}
