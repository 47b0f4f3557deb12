use ndarray::{s, Array1, Array2, Array4};

use crate::error::{Error, Result};
use crate::tensor::{einsum, Tensor};

/// Orbital space selector used when slicing integral blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Occ,
    Virt,
}

/// Spin-orbital Hamiltonian over an occupied-first orbital ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOrbitalSystem {
    pub n_occ: usize,
    pub n_virt: usize,
    pub h: Array2<f64>,
    /// `f_pq = h_pq + Σ_i ⟨pi||qi⟩`.
    pub f: Array2<f64>,
    /// `⟨pq||rs⟩`.
    pub eri: Array4<f64>,
    pub eps: Array1<f64>,
    pub e_nuc: f64,
    /// Reference determinant energy including `e_nuc`.
    pub e_ref: f64,
    /// Electronic position integrals `⟨p|r_α|q⟩`, when available.
    pub dipole: Option<[Array2<f64>; 3]>,
    pub quadrupole: Option<[Array2<f64>; 6]>,
    /// `Σ_A Z_A R_A` about the same origin as `dipole`.
    pub nuc_dipole: [f64; 3],
}

impl SpinOrbitalSystem {
    pub fn new(h: Array2<f64>, eri: Array4<f64>, n_occ: usize, e_nuc: f64) -> Self {
        let n = h.nrows();
        let mut sys = Self {
            n_occ,
            n_virt: n - n_occ,
            f: h.clone(),
            h,
            eri,
            eps: Array1::zeros(n),
            e_nuc,
            e_ref: 0.0,
            dipole: None,
            quadrupole: None,
            nuc_dipole: [0.0; 3],
        };
        sys.refresh();
        sys
    }

    pub fn n_so(&self) -> usize {
        self.n_occ + self.n_virt
    }

    pub fn n_electrons(&self) -> usize {
        self.n_occ
    }

    /// Recomputes `f`, `eps` and `e_ref` from `h` and `eri`.
    pub fn refresh(&mut self) {
        let (n, o) = (self.n_so(), self.n_occ);
        let mut f = self.h.clone();
        for p in 0..n {
            for q in 0..n {
                f[[p, q]] += (0..o).map(|i| self.eri[[p, i, q, i]]).sum::<f64>();
            }
        }
        let mut e = self.e_nuc;
        for i in 0..o {
            e += self.h[[i, i]];
            for j in 0..o {
                e += 0.5 * self.eri[[i, j, i, j]];
            }
        }
        self.eps = f.diag().to_owned();
        self.f = f;
        self.e_ref = e;
    }

    fn range(&self, s: Space) -> std::ops::Range<usize> {
        match s {
            Space::Occ => 0..self.n_occ,
            Space::Virt => self.n_occ..self.n_so(),
        }
    }

    pub fn f_block(&self, a: Space, b: Space) -> Tensor {
        self.f.slice(s![self.range(a), self.range(b)]).to_owned().into_dyn()
    }

    pub fn eri_block(&self, p: Space, q: Space, r: Space, t: Space) -> Tensor {
        self.eri
            .slice(s![self.range(p), self.range(q), self.range(r), self.range(t)])
            .to_owned()
            .into_dyn()
    }

    /// `max |f_pq|` over off-diagonal elements.
    pub fn max_offdiag_fock(&self) -> f64 {
        let mut m = 0.0_f64;
        for ((p, q), v) in self.f.indexed_iter() {
            if p != q {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Adds `Σ_β F_β r_β` to every electron and `−F·Σ Z R` to the nuclear
    /// energy, i.e. `H − F·μ̂`.
    pub fn with_field(&self, field: [f64; 3]) -> Result<Self> {
        let d = self
            .dipole
            .as_ref()
            .ok_or_else(|| Error::Invalid("finite field requires dipole integrals".into()))?;
        let mut out = self.clone();
        for b in 0..3 {
            out.h.scaled_add(field[b], &d[b]);
            out.e_nuc -= field[b] * self.nuc_dipole[b];
        }
        out.refresh();
        Ok(out)
    }

    /// Scales every `⟨pq||rs⟩` by `lambda` while keeping the Fock matrix fixed.
    pub fn with_scaled_interaction(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.eri *= lambda;
        let f = self.f.clone();
        let n = self.n_so();
        for p in 0..n {
            for q in 0..n {
                out.h[[p, q]] = f[[p, q]] - (0..self.n_occ).map(|i| out.eri[[p, i, q, i]]).sum::<f64>();
            }
        }
        out.refresh();
        out
    }

    pub fn without_interaction(&self) -> Self {
        let mut out = self.clone();
        out.eri.fill(0.0);
        out.refresh();
        out
    }

    /// Rotates occupied and virtual spin orbitals separately, `φ̃ = φ U`.
    pub fn rotated(&self, u_occ: &Array2<f64>, u_virt: &Array2<f64>) -> Result<Self> {
        let (o, v) = (self.n_occ, self.n_virt);
        if u_occ.dim() != (o, o) || u_virt.dim() != (v, v) {
            return Err(Error::Dimension("rotation blocks do not match orbital spaces".into()));
        }
        let n = o + v;
        let mut u = Array2::zeros((n, n));
        u.slice_mut(s![..o, ..o]).assign(u_occ);
        u.slice_mut(s![o.., o..]).assign(u_virt);
        let one = |m: &Array2<f64>| u.t().dot(m).dot(&u);
        let ud = u.clone().into_dyn();
        let g = self.eri.clone().into_dyn();
        let g = einsum("pqrs,pi->iqrs", &[&g, &ud]);
        let g = einsum("iqrs,qj->ijrs", &[&g, &ud]);
        let g = einsum("ijrs,rk->ijks", &[&g, &ud]);
        let g = einsum("ijks,sl->ijkl", &[&g, &ud]);
        let mut out = self.clone();
        out.h = one(&self.h);
        out.eri = g.into_dimensionality().expect("rank 4");
        out.dipole = self.dipole.as_ref().map(|d| d.clone().map(|m| one(&m)));
        out.quadrupole = self.quadrupole.as_ref().map(|d| d.clone().map(|m| one(&m)));
        out.refresh();
        Ok(out)
    }
}
