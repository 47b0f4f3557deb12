//! Shared test oracles: a dense Fock-space representation of coupled-cluster
//! quantities and small molecular systems.

#![allow(dead_code)]

use ccresp::cc::SpinOrbitalSystem;
use ccresp::chem::{build_basis, compute_integrals, Atom, BasisSet, IntegralSet, Molecule};
use ccresp::gauge::antisymmetrize;
use ccresp::scf::{mo_transform, solve_rhf, spin_orbital_expand, MoIntegrals, ScfOptions, ScfResult};
use ndarray::{Array1, Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Second-quantized operator `(creator?, orbital)`.
pub type Op = (bool, usize);

/// Dense vectors over all `2^n` occupation bitmasks.
pub struct FockSpace {
    pub n: usize,
}

impl FockSpace {
    pub fn new(n: usize) -> Self {
        assert!(n <= 16);
        Self { n }
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn vacuum_state(&self, n_occ: usize) -> Array1<f64> {
        let mut v = Array1::zeros(self.dim());
        v[(1usize << n_occ) - 1] = 1.0;
        v
    }

    /// Applies the product `ops[0] ops[1] … ops[k]` (rightmost acts first).
    pub fn apply(&self, ops: &[Op], x: &Array1<f64>, coef: f64, out: &mut Array1<f64>) {
        for (det, &c) in x.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut d = det;
            let mut sign = 1.0;
            let mut ok = true;
            for &(create, p) in ops.iter().rev() {
                let bit = 1usize << p;
                let occupied = d & bit != 0;
                if occupied == create {
                    ok = false;
                    break;
                }
                if (d & (bit - 1)).count_ones() % 2 == 1 {
                    sign = -sign;
                }
                d ^= bit;
            }
            if ok {
                out[d] += coef * sign * c;
            }
        }
    }

    pub fn hamiltonian(&self, h: &Array2<f64>, v: &Array4<f64>, x: &Array1<f64>) -> Array1<f64> {
        let n = self.n;
        let mut out = Array1::zeros(self.dim());
        for p in 0..n {
            for q in 0..n {
                if h[[p, q]] != 0.0 {
                    self.apply(&[(true, p), (false, q)], x, h[[p, q]], &mut out);
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let c = v[[p, q, r, s]];
                        if c != 0.0 {
                            self.apply(&[(true, p), (true, q), (false, s), (false, r)], x, 0.25 * c, &mut out);
                        }
                    }
                }
            }
        }
        out
    }

    /// `T x` (or `T† x` when `dagger`), amplitudes with virtual offset `o`.
    pub fn cluster(&self, t1: &Array2<f64>, t2: &Array4<f64>, dagger: bool, x: &Array1<f64>) -> Array1<f64> {
        let (o, v) = t1.dim();
        let mut out = Array1::zeros(self.dim());
        for i in 0..o {
            for a in 0..v {
                let ops = if dagger { [(true, i), (false, o + a)] } else { [(true, o + a), (false, i)] };
                self.apply(&ops, x, t1[[i, a]], &mut out);
            }
        }
        for i in 0..o {
            for j in 0..o {
                for a in 0..v {
                    for b in 0..v {
                        let c = t2[[i, j, a, b]];
                        if c == 0.0 {
                            continue;
                        }
                        if dagger {
                            // (a†b†ji)† = i†j†ba
                            self.apply(&[(true, i), (true, j), (false, o + b), (false, o + a)], x, 0.25 * c, &mut out);
                        } else {
                            self.apply(&[(true, o + a), (true, o + b), (false, j), (false, i)], x, 0.25 * c, &mut out);
                        }
                    }
                }
            }
        }
        out
    }

    /// `exp(s·T) x` by its terminating power series.
    pub fn exp_cluster(&self, t1: &Array2<f64>, t2: &Array4<f64>, s: f64, dagger: bool, x: &Array1<f64>) -> Array1<f64> {
        let mut term = x.clone();
        let mut out = x.clone();
        for k in 1..=self.n {
            term = self.cluster(t1, t2, dagger, &term) * (s / k as f64);
            if term.iter().all(|v| *v == 0.0) {
                break;
            }
            out += &term;
        }
        out
    }

    /// Sign-carrying index of `a†_{a} a_i |0⟩` and `a†_a a†_b a_j a_i |0⟩`.
    pub fn project(&self, ops: &[Op], n_occ: usize, x: &Array1<f64>) -> f64 {
        let mut basis = Array1::zeros(self.dim());
        self.apply(ops, &self.vacuum_state(n_occ), 1.0, &mut basis);
        basis.dot(x)
    }
}

/// Energy and residuals of `e^{−T} H e^{T}|0⟩` from the dense representation.
pub struct OracleResiduals {
    pub energy: f64,
    pub r1: Array2<f64>,
    pub r2: Array4<f64>,
}

pub fn oracle_residuals(sys: &SpinOrbitalSystem, t1: &Array2<f64>, t2: &Array4<f64>) -> OracleResiduals {
    let fs = FockSpace::new(sys.n_so());
    let (o, v) = t1.dim();
    let ref0 = fs.vacuum_state(o);
    let right = fs.exp_cluster(t1, t2, 1.0, false, &ref0);
    let hr = fs.hamiltonian(&sys.h, &sys.eri, &right);
    let hbar = fs.exp_cluster(t1, t2, -1.0, false, &hr);
    let energy = hbar[(1usize << o) - 1] + sys.e_nuc - sys.e_ref;
    let r1 = Array2::from_shape_fn((o, v), |(i, a)| fs.project(&[(true, o + a), (false, i)], o, &hbar));
    let r2 = Array4::from_shape_fn((o, o, v, v), |(i, j, a, b)| {
        if i == j || a == b {
            0.0
        } else {
            fs.project(&[(true, o + a), (true, o + b), (false, j), (false, i)], o, &hbar)
        }
    });
    OracleResiduals { energy, r1, r2 }
}

/// Bra `⟨0|(1+Λ)e^{−T}` as a column vector.
pub fn lambda_bra(
    fs: &FockSpace,
    o: usize,
    t1: &Array2<f64>,
    t2: &Array4<f64>,
    l1: &Array2<f64>,
    l2: &Array4<f64>,
) -> Array1<f64> {
    let ref0 = fs.vacuum_state(o);
    // (1+Λ)† |0⟩ excites with the multipliers
    let mut x = ref0.clone();
    x += &fs.cluster(l1, l2, false, &ref0);
    fs.exp_cluster(t1, t2, -1.0, true, &x)
}

/// Non-symmetric `γ_pq = ⟨p†q⟩` and `Γ_pqrs = ⟨p†q†sr⟩` of the Λ state.
pub fn oracle_rdms(
    n: usize,
    t1: &Array2<f64>,
    t2: &Array4<f64>,
    l1: &Array2<f64>,
    l2: &Array4<f64>,
) -> (Array2<f64>, Array4<f64>) {
    let fs = FockSpace::new(n);
    let o = t1.nrows();
    let bra = lambda_bra(&fs, o, t1, t2, l1, l2);
    let ket = fs.exp_cluster(t1, t2, 1.0, false, &fs.vacuum_state(o));
    let mut g1 = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            let mut y = Array1::zeros(fs.dim());
            fs.apply(&[(true, p), (false, q)], &ket, 1.0, &mut y);
            g1[[p, q]] = bra.dot(&y);
        }
    }
    let mut g2 = Array4::zeros((n, n, n, n));
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let mut y = Array1::zeros(fs.dim());
                    fs.apply(&[(true, p), (true, q), (false, s), (false, r)], &ket, 1.0, &mut y);
                    g2[[p, q, r, s]] = bra.dot(&y);
                }
            }
        }
    }
    (g1, g2)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random2(r: &mut ChaCha8Rng, d: (usize, usize), scale: f64) -> Array2<f64> {
    Array2::from_shape_fn(d, |_| scale * r.random_range(-1.0..1.0))
}

pub fn random4(r: &mut ChaCha8Rng, d: (usize, usize, usize, usize), scale: f64) -> Array4<f64> {
    antisymmetrize(&Array4::from_shape_fn(d, |_| scale * r.random_range(-1.0..1.0)))
}

/// A Hamiltonian with no Hermiticity: random `h` and a `⟨pq||rs⟩` that is
/// antisymmetric within each pair but not symmetric under `(pq)↔(rs)`.
pub fn random_system(n_occ: usize, n_virt: usize, seed: u64) -> SpinOrbitalSystem {
    let n = n_occ + n_virt;
    let mut r = rng(seed);
    let mut h = random2(&mut r, (n, n), 0.3);
    for p in 0..n {
        h[[p, p]] += if p < n_occ { -1.5 } else { 1.0 } + 0.1 * p as f64;
    }
    let v = random4(&mut r, (n, n, n, n), 0.2);
    SpinOrbitalSystem::new(h, v, n_occ, 0.37)
}

pub fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn max_diff2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_diff4(a: &Array4<f64>, b: &Array4<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Rotation matrix of a uniformly drawn unit quaternion.
pub fn random_rotation(seed: u64) -> [[f64; 3]; 3] {
    let mut r = rng(seed);
    let q: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Two H₂ molecules side by side, `sep` bohr apart along x.
pub fn h2_dimer(sep: f64) -> Molecule {
    Molecule::new(
        vec![atom(1, 0.0, 0.0, 0.0), atom(1, 0.0, 0.0, 1.4), atom(1, sep, 0.0, 0.0), atom(1, sep, 0.0, 1.4)],
        0,
    )
    .unwrap()
}

pub fn atom(z: u32, x: f64, y: f64, zc: f64) -> Atom {
    Atom { z, pos: [x, y, zc] }
}

pub fn h2(r: f64) -> Molecule {
    Molecule::new(vec![atom(1, 0.0, 0.0, 0.0), atom(1, 0.0, 0.0, r)], 0).unwrap()
}

pub fn heh_cation(r: f64) -> Molecule {
    Molecule::new(vec![atom(2, 0.0, 0.0, 0.0), atom(1, 0.0, 0.0, r)], 1).unwrap()
}

/// Four hydrogens with no spatial symmetry.
pub fn distorted_h4() -> Molecule {
    Molecule::new(
        vec![
            atom(1, 0.0, 0.0, 0.0),
            atom(1, 0.1, 0.05, 1.45),
            atom(1, 1.9, 0.3, 2.2),
            atom(1, 2.2, -0.4, 3.7),
        ],
        0,
    )
    .unwrap()
}

pub struct Prepared {
    pub mol: Molecule,
    pub basis: BasisSet,
    pub ints: IntegralSet,
    pub scf: ScfResult,
    pub mo: MoIntegrals,
    pub sys: SpinOrbitalSystem,
}

/// Integrals about the centre of nuclear charge, RHF and spin-orbital system.
pub fn prepare(mol: &Molecule) -> Prepared {
    let basis = build_basis(mol, "sto-3g").unwrap();
    let origin = mol.charge_center();
    let ints = compute_integrals(mol, &basis, origin);
    let scf = solve_rhf(&ints, mol.n_electrons, &ScfOptions::default()).unwrap();
    assert!(scf.converged);
    let mo = mo_transform(&ints, &scf.c).unwrap();
    let mut sys = spin_orbital_expand(&mo, scf.n_occ);
    let mut nd = [0.0; 3];
    for a in &mol.atoms {
        for k in 0..3 {
            nd[k] += a.z as f64 * (a.pos[k] - origin[k]);
        }
    }
    sys.nuc_dipole = nd;
    Prepared {
        mol: mol.clone(),
        basis,
        ints,
        scf,
        mo,
        sys,
    }
}

/// Central differences of the Lagrangian over every independent amplitude.
pub fn max_lagrangian_gradient(sys: &SpinOrbitalSystem, amps: &ccresp::gauge::AmplitudeSet) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let (o, v) = amps.t1.dim();
    let fd = |bump: &dyn Fn(&mut ccresp::gauge::AmplitudeSet, f64)| {
        let mut x = amps.clone();
        bump(&mut x, h);
        let lp = ccresp::cc::lagrangian_value(sys, &x);
        let mut x = amps.clone();
        bump(&mut x, -h);
        let lm = ccresp::cc::lagrangian_value(sys, &x);
        ((lp - lm) / (2.0 * h)).abs()
    };
    for i in 0..o {
        for a in 0..v {
            worst = worst.max(fd(&|x, s| x.t1[[i, a]] += s));
            worst = worst.max(fd(&|x, s| x.l1[[i, a]] += s));
        }
    }
    for i in 0..o {
        for j in i + 1..o {
            for a in 0..v {
                for b in a + 1..v {
                    let put = |t: &mut ndarray::Array4<f64>, s: f64| {
                        t[[i, j, a, b]] += s;
                        t[[j, i, a, b]] -= s;
                        t[[i, j, b, a]] -= s;
                        t[[j, i, b, a]] += s;
                    };
                    worst = worst.max(fd(&|x, s| put(&mut x.t2, s)));
                    worst = worst.max(fd(&|x, s| put(&mut x.l2, s)));
                }
            }
        }
    }
    worst
}
