use ndarray::{Array2, Array4};

use crate::chem::IntegralSet;
use crate::error::{Error, Result};

/// Integrals in an orthonormal molecular-orbital basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MoIntegrals {
    pub n_mo: usize,
    pub h: Array2<f64>,
    /// `(pq|rs)`, chemists' notation.
    pub eri: Array4<f64>,
    pub dipole: Option<[Array2<f64>; 3]>,
    pub quadrupole: Option<[Array2<f64>; 6]>,
    /// `Cᵀ S C`, identity for orthonormal input.
    pub overlap: Array2<f64>,
    pub e_nuc: f64,
    pub origin: [f64; 3],
}

fn one_body(c: &Array2<f64>, m: &Array2<f64>) -> Array2<f64> {
    c.t().dot(m).dot(c)
}

/// Four successive one-index contractions, each `O(N⁵)`. Every pass
/// contracts the leading index as a matrix product and moves the new index to
/// the back, so after four passes the order is `ijkl` again.
fn two_body(c: &Array2<f64>, eri: &Array4<f64>) -> Array4<f64> {
    let m = c.ncols();
    let mut g = eri.as_standard_layout().into_owned();
    for _ in 0..4 {
        let (d0, d1, d2, d3) = g.dim();
        let mat = g.into_shape_with_order((d0, d1 * d2 * d3)).expect("standard layout");
        let t = c.t().dot(&mat).into_shape_with_order((m, d1, d2, d3)).expect("standard layout");
        g = t.permuted_axes([1, 2, 3, 0]).as_standard_layout().into_owned();
    }
    g
}

impl MoIntegrals {
    /// Integrals over the rotated orbitals `φ̃_q = Σ_p φ_p U_pq`.
    pub fn rotated(&self, u: &Array2<f64>) -> Result<MoIntegrals> {
        if u.nrows() != self.n_mo {
            return Err(Error::Dimension(format!(
                "rotation has {} rows for {} orbitals",
                u.nrows(),
                self.n_mo
            )));
        }
        Ok(MoIntegrals {
            n_mo: u.ncols(),
            h: one_body(u, &self.h),
            eri: two_body(u, &self.eri),
            dipole: self.dipole.as_ref().map(|d| d.clone().map(|m| one_body(u, &m))),
            quadrupole: self.quadrupole.as_ref().map(|d| d.clone().map(|m| one_body(u, &m))),
            overlap: one_body(u, &self.overlap),
            e_nuc: self.e_nuc,
            origin: self.origin,
        })
    }
}

pub fn mo_transform(ints: &IntegralSet, c: &Array2<f64>) -> Result<MoIntegrals> {
    if c.nrows() != ints.n_ao {
        return Err(Error::Dimension(format!(
            "coefficient matrix has {} rows for {} basis functions",
            c.nrows(),
            ints.n_ao
        )));
    }
    let (dipole, quadrupole) = if ints.has_multipoles {
        (
            Some(ints.dipole.clone().map(|d| one_body(c, &d))),
            Some(ints.quadrupole.clone().map(|q| one_body(c, &q))),
        )
    } else {
        (None, None)
    };
    Ok(MoIntegrals {
        n_mo: c.ncols(),
        h: one_body(c, &ints.hcore),
        eri: two_body(c, &ints.eri),
        dipole,
        quadrupole,
        overlap: one_body(c, &ints.s),
        e_nuc: ints.e_nuc,
        origin: ints.origin,
    })
}
